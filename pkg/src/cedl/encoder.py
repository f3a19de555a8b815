"""Dense multilayer perceptron with explicit forward cache and backprop.

Weights are stored ``(out_dim, in_dim)`` and applied to row-major batches,
so a layer computes ``z = a @ W.T + b``.
"""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import CacheError, DimensionError, InputError, SpecError
from .numerics import STREAM_INIT, SeededRng

ACTIVATIONS = ("relu", "leaky_relu", "tanh", "identity")
LEAKY_SLOPE = 0.01


@dataclass(frozen=True)
class LayerSpec:
    in_dim: int
    out_dim: int
    activation: str = "relu"

    def __post_init__(self):
        if int(self.in_dim) < 1 or int(self.out_dim) < 1:
            raise SpecError(f"layer dims must be positive, got {self.in_dim}->{self.out_dim}")
        if self.activation not in ACTIVATIONS:
            raise SpecError(f"unknown activation {self.activation!r}; expected one of {ACTIVATIONS}")

    def to_dict(self):
        return {"in_dim": int(self.in_dim), "out_dim": int(self.out_dim), "activation": self.activation}


def mlp_specs(in_dim, hidden=(1000, 256, 64), latent_dim=32,
              hidden_activation="relu", output_activation="tanh"):
    """Layer chain ``in_dim -> *hidden -> latent_dim``.

    The defaults are the tabular encoder: three ReLU hidden layers and a
    tanh-bounded 32-dimensional representation.
    """
    dims = [int(in_dim), *[int(h) for h in hidden], int(latent_dim)]
    specs = []
    for k in range(len(dims) - 1):
        act = output_activation if k == len(dims) - 2 else hidden_activation
        specs.append(LayerSpec(dims[k], dims[k + 1], act))
    return specs


def _check_chain(specs):
    if not specs:
        raise SpecError("an encoder needs at least one layer")
    for k in range(len(specs) - 1):
        if specs[k].out_dim != specs[k + 1].in_dim:
            raise SpecError(
                f"layer {k} out_dim {specs[k].out_dim} does not chain to "
                f"layer {k + 1} in_dim {specs[k + 1].in_dim}"
            )


@dataclass
class EncoderModel:
    layers: tuple
    weights: list
    biases: list

    def __post_init__(self):
        self.layers = tuple(self.layers)
        _check_chain(self.layers)
        if len(self.weights) != len(self.layers) or len(self.biases) != len(self.layers):
            raise SpecError("one weight matrix and one bias vector per layer")
        for k, spec in enumerate(self.layers):
            if self.weights[k].shape != (spec.out_dim, spec.in_dim):
                raise SpecError(f"layer {k} weight shape {self.weights[k].shape}")
            if self.biases[k].shape != (spec.out_dim,):
                raise SpecError(f"layer {k} bias shape {self.biases[k].shape}")

    @property
    def input_dim(self):
        return self.layers[0].in_dim

    @property
    def latent_dim(self):
        return self.layers[-1].out_dim

    def parameters(self):
        """Flat list ``[W0, b0, W1, b1, ...]`` (references, not copies)."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def with_parameters(self, params):
        """New model with the same layers and the given ``[W0, b0, ...]``."""
        if len(params) != 2 * len(self.layers):
            raise DimensionError(f"expected {2 * len(self.layers)} arrays, got {len(params)}")
        return EncoderModel(self.layers, list(params[0::2]), list(params[1::2]))

    def copy(self):
        return self.with_parameters([p.copy() for p in self.parameters()])


@dataclass
class ForwardCache:
    inputs: list       # activation entering each layer; inputs[0] is the batch
    preacts: list      # z per layer
    outputs: list      # activation leaving each layer
    params: list = field(repr=False, default_factory=list)


@dataclass
class EncoderGrads:
    weights: list
    biases: list

    def as_list(self):
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out


def init_encoder(specs, rng):
    """Fan-in uniform initialisation.

    Each weight is drawn from ``U(-1/sqrt(in_dim), 1/sqrt(in_dim))`` and
    biases start at zero. ``rng`` may be a :class:`SeededRng` or an integer
    seed; an integer seed draws from its ``STREAM_INIT`` stream.
    """
    specs = list(specs)
    _check_chain(specs)
    if not isinstance(rng, SeededRng):
        rng = SeededRng(rng).stream(STREAM_INIT)
    weights, biases = [], []
    for spec in specs:
        bound = 1.0 / np.sqrt(spec.in_dim)
        weights.append(rng.uniform(-bound, bound, size=(spec.out_dim, spec.in_dim)))
        biases.append(np.zeros(spec.out_dim))
    return EncoderModel(specs, weights, biases)


def _activate(name, z):
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "leaky_relu":
        return np.where(z > 0, z, LEAKY_SLOPE * z)
    if name == "tanh":
        return np.tanh(z)
    return z


def _activation_grad(name, z, a):
    if name == "relu":
        return (z > 0).astype(np.float64)
    if name == "leaky_relu":
        return np.where(z > 0, 1.0, LEAKY_SLOPE)
    if name == "tanh":
        return 1.0 - a * a
    return np.ones_like(z)


def forward(model, batch):
    """Encode a ``B x d`` batch.

    Returns ``(representations, cache)`` where representations is ``B x D``.
    """
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != model.input_dim:
        raise DimensionError(f"batch shape {x.shape} does not match input dim {model.input_dim}")
    if not np.all(np.isfinite(x)):
        raise InputError("batch contains non-finite values")
    inputs, preacts, outputs = [], [], []
    a = x
    for spec, w, b in zip(model.layers, model.weights, model.biases):
        inputs.append(a)
        z = a @ w.T + b
        a = _activate(spec.activation, z)
        preacts.append(z)
        outputs.append(a)
    cache = ForwardCache(inputs, preacts, outputs, params=model.parameters())
    return a, cache


def backward(model, cache, grad_r):
    """Parameter gradients of ``sum_i <grad_r[i], r[i]>``.

    The batch is summed, not averaged; callers fold any ``1/B`` into
    ``grad_r``.
    """
    params = model.parameters()
    if len(cache.params) != len(params) or any(p is not q for p, q in zip(params, cache.params)):
        raise CacheError("cache was produced by a different model or stale parameters")
    g = np.asarray(grad_r, dtype=np.float64)
    if g.ndim == 1:
        g = g[None, :]
    if g.shape != cache.outputs[-1].shape:
        raise CacheError(f"grad_r shape {g.shape} does not match cached output {cache.outputs[-1].shape}")
    n = len(model.layers)
    gw, gb = [None] * n, [None] * n
    for k in range(n - 1, -1, -1):
        spec = model.layers[k]
        delta = g * _activation_grad(spec.activation, cache.preacts[k], cache.outputs[k])
        gw[k] = delta.T @ cache.inputs[k]
        gb[k] = delta.sum(axis=0)
        if k > 0:
            g = delta @ model.weights[k]
    return EncoderGrads(gw, gb)
