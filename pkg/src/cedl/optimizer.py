"""Adam and plain SGD over lists of numpy arrays.

Both updates are functional: inputs are never modified, new arrays are
returned.
"""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DimensionError, GradientError

BETA1 = 0.9
BETA2 = 0.999
EPS = 1e-8


@dataclass
class AdamState:
    lr: float = 1e-4
    beta1: float = BETA1
    beta2: float = BETA2
    eps: float = EPS
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def __post_init__(self):
        if not self.lr >= 0:
            raise ValueError("learning rate must be non-negative")

    @classmethod
    def for_params(cls, params, lr=1e-4, **kwargs):
        return cls(lr=lr, m=[np.zeros_like(p, dtype=np.float64) for p in params],
                   v=[np.zeros_like(p, dtype=np.float64) for p in params], **kwargs)

    def constants(self):
        return {"optimizer": "adam", "lr": self.lr, "beta1": self.beta1,
                "beta2": self.beta2, "eps": self.eps}


def _check(params, grads, what="grads"):
    if len(params) != len(grads):
        raise DimensionError(f"{len(params)} params but {len(grads)} {what}")
    for k, (p, g) in enumerate(zip(params, grads)):
        if np.shape(p) != np.shape(g):
            raise DimensionError(f"param {k} shape {np.shape(p)} vs {what} shape {np.shape(g)}")


def adam_step(state, params, grads):
    """One bias-corrected Adam update.

    Returns ``(new_params, new_state)``.
    """
    _check(params, grads)
    _check(params, state.m, "first moments")
    for k, g in enumerate(grads):
        if not np.all(np.isfinite(g)):
            raise GradientError(f"non-finite gradient in parameter {k}")
    t = state.t + 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    new_p, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        g = np.asarray(g, dtype=np.float64)
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * (g * g)
        m_hat = m / c1
        v_hat = v / c2
        new_p.append(p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps))
        new_m.append(m)
        new_v.append(v)
    return new_p, AdamState(state.lr, b1, b2, state.eps, t, new_m, new_v)


def sgd_step(params, grads, lr):
    if lr < 0:
        raise ValueError("learning rate must be non-negative")
    _check(params, grads)
    return [p - lr * np.asarray(g, dtype=np.float64) for p, g in zip(params, grads)]
