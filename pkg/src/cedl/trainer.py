"""Mini-batch training loop shared by CEDL and the baseline objectives.

Every objective is a *head*: an object holding its own trainable
parameters (possibly none) and mapping a batch of representations and
labels to ``(batch_mean_loss, grad_R, head_grads)``. The loop itself does
not know which objective it is running.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .encoder import backward, forward
from .exceptions import DegenerateSplitError, DimensionError, DivergenceError
from .numerics import STREAM_HEAD, STREAM_SHUFFLE, SeededRng
from .objective import (
    OBJECTIVES,
    ObjectiveConfig,
    bce_batch_grad,
    cedl_batch_grad,
    sad_batch_grad,
    svdd_batch_grad,
)
from .optimizer import AdamState, adam_step


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 64
    learning_rate: float = 1e-4
    seed: int = 42
    objective: str = "cedl"
    objective_config: ObjectiveConfig = None
    shuffle: bool = True

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        if self.objective not in OBJECTIVES:
            raise ValueError(f"objective must be one of {OBJECTIVES}")


@dataclass
class TrainReport:
    model: object                 # encoder at the best epoch
    objective: str
    objective_config: ObjectiveConfig
    head_params: dict
    epoch_losses: list
    best_loss: float
    best_epoch: int
    steps: int
    seed: int
    optimizer: dict = field(default_factory=dict)


class CEDLHead:
    def __init__(self, cfg):
        self.cfg = cfg

    @property
    def params(self):
        return [self.cfg.centre] if self.cfg.centre_mode == "learnable" else []

    def set_params(self, params):
        if params:
            self.cfg = ObjectiveConfig(self.cfg.alpha, self.cfg.w0, self.cfg.w1,
                                       params[0], self.cfg.centre_mode)

    def loss_grad(self, R, y):
        loss, gR, gc = cedl_batch_grad(R, y, self.cfg)
        return loss, gR, [gc] if self.cfg.centre_mode == "learnable" else []

    def state(self):
        return {}


class BCEHead:
    """Linear logit ``<u, r> + b`` with plain binary cross-entropy."""

    def __init__(self, cfg, seed):
        D = cfg.latent_dim
        bound = 1.0 / math.sqrt(D)
        self.cfg = cfg
        self.u = SeededRng(seed).stream(STREAM_HEAD).uniform(-bound, bound, size=D)
        self.b = np.zeros(())

    @property
    def params(self):
        return [self.u, self.b]

    def set_params(self, params):
        self.u, self.b = params

    def loss_grad(self, R, y):
        loss, gR, gu, gb = bce_batch_grad(R, y, self.u, float(self.b))
        return loss, gR, [gu, np.asarray(gb)]

    def state(self):
        return {"u": self.u.copy(), "b": np.asarray(self.b, dtype=np.float64).reshape(1).copy()}


class SVDDHead:
    """Squared distance to a fixed centre; labels are ignored."""

    params = []

    def __init__(self, cfg):
        self.cfg = cfg

    def set_params(self, params):
        pass

    def loss_grad(self, R, y):
        loss, gR = svdd_batch_grad(R, self.cfg.centre)
        return loss, gR, []

    def state(self):
        return {}


class SADHead(SVDDHead):
    """Squared distance for normals, inverse squared distance for anomalies."""

    def loss_grad(self, R, y):
        loss, gR = sad_batch_grad(R, y, self.cfg.centre)
        return loss, gR, []


def make_head(kind, cfg, seed=0):
    if kind == "cedl":
        return CEDLHead(cfg)
    if kind == "bce":
        return BCEHead(cfg, seed)
    if kind == "svdd":
        return SVDDHead(cfg)
    if kind == "sad":
        return SADHead(cfg)
    raise ValueError(f"unknown objective {kind!r}")


def batch_iterator(n, batch_size, seed=0, shuffle=True, epoch=0):
    """Index batches covering ``range(n)`` exactly once.

    The order for a given ``(seed, epoch)`` is fixed; the last batch may be
    short.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if shuffle:
        order = SeededRng(seed).stream(STREAM_SHUFFLE).stream(epoch).permutation(n)
    else:
        order = np.arange(n)
    return [order[i:i + batch_size] for i in range(0, n, batch_size)]


def train(ds, model, cfg):
    """Train ``model`` on ``ds`` and keep the epoch with the lowest average loss.

    The epoch loss is the per-sample mean over the whole epoch, i.e. each
    batch mean weighted by its batch size. Parameters are those held at the
    end of the best epoch.
    """
    if ds.n_features != model.input_dim:
        raise DimensionError(f"dataset width {ds.n_features} != encoder input {model.input_dim}")
    if cfg.objective in ("cedl", "bce", "sad") and (ds.n_normal == 0 or ds.n_anomalous == 0):
        raise DegenerateSplitError(f"objective {cfg.objective!r} needs both classes in the training set")
    obj_cfg = cfg.objective_config or ObjectiveConfig.at_origin(model.latent_dim)
    if obj_cfg.latent_dim != model.latent_dim:
        raise DimensionError(f"centre dim {obj_cfg.latent_dim} != latent dim {model.latent_dim}")
    head = make_head(cfg.objective, obj_cfg, cfg.seed)
    n_enc = 2 * len(model.layers)
    state = AdamState.for_params(model.parameters() + head.params, lr=cfg.learning_rate)
    X, y = ds.X, ds.y
    N = len(ds)

    epoch_losses = []
    best_loss, best_epoch = math.inf, -1
    best_model, best_cfg, best_head = model.copy(), head.cfg, head.state()
    steps = 0
    for epoch in range(cfg.epochs):
        total = 0.0
        for bi, idx in enumerate(batch_iterator(N, cfg.batch_size, cfg.seed, cfg.shuffle, epoch)):
            R, cache = forward(model, X[idx])
            loss, grad_R, head_grads = head.loss_grad(R, y[idx])
            if not math.isfinite(loss):
                raise DivergenceError(f"non-finite loss at epoch {epoch}, batch {bi}")
            grads = backward(model, cache, grad_R).as_list() + head_grads
            params, state = adam_step(state, model.parameters() + head.params, grads)
            model = model.with_parameters(params[:n_enc])
            head.set_params(params[n_enc:])
            total += loss * len(idx)
            steps += 1
        avg = total / N
        epoch_losses.append(avg)
        if avg < best_loss:
            best_loss, best_epoch = avg, epoch
            best_model, best_cfg, best_head = model.copy(), head.cfg, head.state()
    return TrainReport(
        model=best_model,
        objective=cfg.objective,
        objective_config=best_cfg,
        head_params=best_head,
        epoch_losses=epoch_losses,
        best_loss=best_loss,
        best_epoch=best_epoch,
        steps=steps,
        seed=cfg.seed,
        optimizer=state.constants(),
    )
