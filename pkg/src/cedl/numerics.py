"""Numerically stable primitives and the package's seeded random generator.

All arithmetic is float64. The functions accept Python scalars or numpy
arrays and broadcast like ufuncs.

Random numbers come from :class:`SeededRng`, a counter-based SplitMix64
generator implemented here rather than borrowed from numpy, so that the
streams do not change when numpy changes its default bit generator.
Independent streams (weight init, shuffling, sampling, ...) are derived
from a master seed with :meth:`SeededRng.stream` using the fixed offsets
listed below.
"""

import math

import numpy as np

from .exceptions import DimensionError, EvaluationError

__all__ = [
    "stable_sigmoid",
    "stable_softplus",
    "l2_distance",
    "finite_difference_gradient",
    "SeededRng",
    "STREAM_INIT",
    "STREAM_SHUFFLE",
    "STREAM_SAMPLING",
    "STREAM_HEAD",
    "STREAM_DATA",
]

# Stream offsets for SeededRng.stream(). Changing any of these changes
# every seeded result in the package.
STREAM_INIT = 1
STREAM_SHUFFLE = 2
STREAM_SAMPLING = 3
STREAM_HEAD = 4
STREAM_DATA = 5

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def stable_sigmoid(z):
    """Logistic function that never overflows.

    Uses ``1 / (1 + exp(-z))`` for ``z >= 0`` and ``exp(z) / (1 + exp(z))``
    otherwise, so ``exp`` is only ever called on non-positive arguments.
    """
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(-np.abs(z))
    out = np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return out[()] if out.ndim == 0 else out


def stable_softplus(z):
    """``log(1 + exp(z))`` as ``max(z, 0) + log1p(exp(-|z|))``."""
    z = np.asarray(z, dtype=np.float64)
    out = np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))
    return out[()] if out.ndim == 0 else out


def l2_distance(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"length mismatch: {a.shape} vs {b.shape}")
    return float(np.sqrt(np.sum((a - b) ** 2)))


def finite_difference_gradient(f, x, h=1e-5):
    """Central-difference gradient of a scalar function.

    Parameters
    ----------
    f : callable
        Maps a float64 array shaped like ``x`` to a scalar.
    x : array_like
        Evaluation point. Any shape; the gradient has the same shape.
    h : float
        Step, must be positive.

    Raises
    ------
    EvaluationError
        If ``f`` returns a non-finite value at any probe point.
    """
    if not h > 0:
        raise ValueError("h must be positive")
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat_x = x.reshape(-1)
    flat_g = grad.reshape(-1)
    for i in range(flat_x.size):
        orig = flat_x[i]
        flat_x[i] = orig + h
        fp = float(f(x))
        flat_x[i] = orig - h
        fm = float(f(x))
        flat_x[i] = orig
        if not (math.isfinite(fp) and math.isfinite(fm)):
            raise EvaluationError(f"non-finite evaluation at coordinate {i}")
        flat_g[i] = (fp - fm) / (2.0 * h)
    return grad


def _mix64(z):
    """SplitMix64 finaliser on a uint64 array (wrapping arithmetic)."""
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


def _mix64_int(z):
    z &= _MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


class SeededRng:
    """Counter-based SplitMix64 generator.

    The i-th 64-bit output (counting from 1) is
    ``mix64(seed + i * 0x9E3779B97F4A7C15 mod 2**64)``, which is exactly
    the sequence produced by the reference sequential SplitMix64 started
    at ``seed``. Being counter-based, blocks of outputs are computed with
    vectorised numpy integer arithmetic.

    An instance is single-owner: every draw advances its counter.
    """

    def __init__(self, seed=0):
        seed = int(seed)
        if seed < 0:
            raise ValueError("seed must be non-negative")
        self.seed = seed & _MASK64
        self.counter = 0

    def __repr__(self):
        return f"SeededRng(seed={self.seed}, counter={self.counter})"

    def stream(self, offset):
        """Independent generator for ``offset`` derived from the master seed.

        The child seed is ``mix64(seed + offset * golden)``; it does not
        depend on how many draws the parent has made.
        """
        return SeededRng(_mix64_int(self.seed + (int(offset) & _MASK64) * _GOLDEN))

    def next_uint64(self, n):
        """Next ``n`` raw 64-bit outputs as a uint64 array."""
        n = int(n)
        idx = np.arange(self.counter + 1, self.counter + n + 1, dtype=np.uint64)
        self.counter += n
        z = np.uint64(self.seed) + idx * np.uint64(_GOLDEN)
        return _mix64(z)

    def random(self, size=None):
        """Uniform floats in [0, 1) with 53 random bits."""
        n = 1 if size is None else int(np.prod(size))
        u = (self.next_uint64(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53
        return float(u[0]) if size is None else u.reshape(size)

    def uniform(self, low=0.0, high=1.0, size=None):
        u = self.random(size)
        return low + (high - low) * u

    def normal(self, loc=0.0, scale=1.0, size=None):
        """Gaussian draws by the Box-Muller transform (cosine branch only)."""
        n = 1 if size is None else int(np.prod(size))
        bits = self.next_uint64(2 * n) >> np.uint64(11)
        u1 = (bits[:n].astype(np.float64) + 1.0) * 2.0**-53  # (0, 1]
        u2 = bits[n:].astype(np.float64) * 2.0**-53
        z = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
        z = loc + scale * z
        return float(z[0]) if size is None else z.reshape(size)

    def permutation(self, n):
        """Uniform random permutation of ``range(n)`` (sort by random keys)."""
        keys = self.next_uint64(n)
        return np.argsort(keys, kind="stable").astype(np.int64)

    def choice(self, n, k):
        """``k`` distinct indices from ``range(n)``, in draw order."""
        if k > n:
            raise ValueError(f"cannot choose {k} of {n}")
        return self.permutation(n)[:k]
