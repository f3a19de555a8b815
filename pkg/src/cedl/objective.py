"""Radial-logit cross-entropy and the baseline objectives it is compared with.

The CEDL objective replaces the linear logit of binary cross-entropy by
the scaled distance of a representation from a centre,

    a = alpha / sqrt(D) * ||r - c||,

and applies weighted BCE-with-logits to it:

    loss = w1 * y * softplus(-a) + w0 * (1 - y) * softplus(a).

Minimising it pulls normals (y = 0) toward ``c`` and pushes anomalies
(y = 1) outward, always along ``r - c``.

Per-sample functions take 1-D vectors; the ``batch_*`` variants take
``B x D`` matrices and return gradients of the batch *mean*.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateSplitError, DimensionError, EmptyBatchError, LabelError
from .numerics import stable_sigmoid, stable_softplus

SAD_EPS = 1e-6
CENTRE_MODES = ("fixed", "learnable")
OBJECTIVES = ("cedl", "bce", "svdd", "sad")


@dataclass
class ObjectiveConfig:
    """Radial scale, class weights and centre of the CEDL objective."""

    alpha: float = 1.0
    w0: float = 1.0
    w1: float = 1.0
    centre: np.ndarray = None
    centre_mode: str = "fixed"

    def __post_init__(self):
        for name in ("alpha", "w0", "w1"):
            v = float(getattr(self, name))
            if not (v > 0 and np.isfinite(v)):
                raise ValueError(f"{name} must be a positive finite number, got {v}")
            setattr(self, name, v)
        if self.centre is None:
            raise ValueError("centre is required; use ObjectiveConfig.at_origin(D)")
        self.centre = np.array(self.centre, dtype=np.float64).reshape(-1)
        if self.centre.size < 1:
            raise ValueError("centre must have at least one coordinate")
        if self.centre_mode not in CENTRE_MODES:
            raise ValueError(f"centre_mode must be one of {CENTRE_MODES}")

    @classmethod
    def at_origin(cls, latent_dim, **kwargs):
        return cls(centre=np.zeros(int(latent_dim)), **kwargs)

    @property
    def latent_dim(self):
        return self.centre.size

    @property
    def scale(self):
        """``alpha / sqrt(D)``."""
        return self.alpha / np.sqrt(self.latent_dim)

    def class_weight(self, y):
        return np.where(np.asarray(y) == 1, self.w1, self.w0)

    def with_weights(self, w0, w1):
        return ObjectiveConfig(self.alpha, w0, w1, self.centre.copy(), self.centre_mode)

    def to_dict(self):
        return {
            "alpha": self.alpha,
            "w0": self.w0,
            "w1": self.w1,
            "centre": [float(v) for v in self.centre],
            "centre_mode": self.centre_mode,
        }


@dataclass
class PerSampleGrad:
    grad_r: np.ndarray
    grad_c: np.ndarray


def _check_label(y):
    if y not in (0, 1):
        raise LabelError(f"label must be 0 or 1, got {y!r}")
    return int(y)


def _check_labels(y):
    y = np.asarray(y)
    if y.size and not np.all((y == 0) | (y == 1)):
        raise LabelError("labels must be 0 or 1")
    return y.astype(np.float64)


def _vec(r, dim, name="r"):
    r = np.asarray(r, dtype=np.float64).reshape(-1)
    if r.size != dim:
        raise DimensionError(f"{name} has length {r.size}, expected {dim}")
    return r


def _mat(R, dim):
    R = np.asarray(R, dtype=np.float64)
    if R.ndim == 1:
        R = R[None, :]
    if R.ndim != 2 or R.shape[1] != dim:
        raise DimensionError(f"representations shape {R.shape}, expected (B, {dim})")
    return R


def radial_logit(r, cfg):
    r = _vec(r, cfg.latent_dim)
    return float(cfg.scale * np.linalg.norm(r - cfg.centre))


def batch_radial_logits(R, cfg):
    R = _mat(R, cfg.latent_dim)
    return cfg.scale * np.linalg.norm(R - cfg.centre, axis=1)


def cedl_loss(a, y, cfg):
    """Per-sample loss from a radial logit ``a >= 0``."""
    y = _check_label(y)
    if y == 1:
        return float(cfg.w1 * stable_softplus(-a))
    return float(cfg.w0 * stable_softplus(a))


def cedl_batch_loss(R, labels, cfg):
    """Mean per-sample CEDL loss over a batch of representations."""
    R = _mat(R, cfg.latent_dim)
    y = _check_labels(labels).reshape(-1)
    if R.shape[0] == 0:
        raise EmptyBatchError("empty batch")
    if y.size != R.shape[0]:
        raise DimensionError(f"{y.size} labels for {R.shape[0]} representations")
    a = cfg.scale * np.linalg.norm(R - cfg.centre, axis=1)
    per = cfg.w1 * y * stable_softplus(-a) + cfg.w0 * (1.0 - y) * stable_softplus(a)
    return float(per.mean())


def cedl_grad(r, y, cfg):
    """Gradient of the per-sample loss with respect to ``r`` (and ``c``).

    ``grad_r = w_y (sigmoid(a) - y) * alpha/sqrt(D) * (r - c)/||r - c||``.
    At ``r == c`` the norm is not differentiable and the zero subgradient
    is returned.
    """
    y = _check_label(y)
    r = _vec(r, cfg.latent_dim)
    diff = r - cfg.centre
    dist = np.linalg.norm(diff)
    if dist == 0.0:
        g = np.zeros_like(r)
    else:
        a = cfg.scale * dist
        w = cfg.w1 if y == 1 else cfg.w0
        g = w * (stable_sigmoid(a) - y) * cfg.scale * diff / dist
    gc = -g if cfg.centre_mode == "learnable" else np.zeros_like(g)
    return PerSampleGrad(g, gc)


def cedl_batch_grad(R, labels, cfg):
    """``(loss, grad_R, grad_c)`` of the batch-mean CEDL loss.

    ``grad_c`` is zero under a fixed centre.
    """
    R = _mat(R, cfg.latent_dim)
    y = _check_labels(labels).reshape(-1)
    B = R.shape[0]
    if B == 0:
        raise EmptyBatchError("empty batch")
    diff = R - cfg.centre
    dist = np.linalg.norm(diff, axis=1)
    a = cfg.scale * dist
    w = np.where(y == 1, cfg.w1, cfg.w0)
    per = cfg.w1 * y * stable_softplus(-a) + cfg.w0 * (1.0 - y) * stable_softplus(a)
    coef = w * (stable_sigmoid(a) - y) * cfg.scale
    safe = np.where(dist > 0, dist, 1.0)
    unit = np.where(dist[:, None] > 0, diff / safe[:, None], 0.0)
    grad_R = coef[:, None] * unit / B
    if cfg.centre_mode == "learnable":
        grad_c = -grad_R.sum(axis=0)
    else:
        grad_c = np.zeros(cfg.latent_dim)
    return float(per.mean()), grad_R, grad_c


def weight_ratio(n_normal, n_anomalous):
    """``n_normal / n_anomalous``, the weight given to the anomaly class."""
    n_normal, n_anomalous = int(n_normal), int(n_anomalous)
    if n_normal <= 0 or n_anomalous <= 0:
        raise DegenerateSplitError(
            f"supervised training needs both classes (normal={n_normal}, anomalous={n_anomalous})"
        )
    return n_normal / n_anomalous


def bce_head_loss(r, y, u, b):
    """Plain BCE on a linear logit ``z = <u, r> + b``.

    Returns ``(loss, grad_r, (grad_u, grad_b))``.
    """
    y = _check_label(y)
    u = np.asarray(u, dtype=np.float64).reshape(-1)
    r = _vec(r, u.size)
    z = float(u @ r + b)
    loss = float(y * stable_softplus(-z) + (1 - y) * stable_softplus(z))
    dz = float(stable_sigmoid(z)) - y
    return loss, dz * u, (dz * r, dz)


def bce_batch_grad(R, labels, u, b):
    """``(loss, grad_R, grad_u, grad_b)`` for the batch-mean BCE loss."""
    u = np.asarray(u, dtype=np.float64).reshape(-1)
    R = _mat(R, u.size)
    y = _check_labels(labels).reshape(-1)
    B = R.shape[0]
    if B == 0:
        raise EmptyBatchError("empty batch")
    z = R @ u + b
    per = y * stable_softplus(-z) + (1.0 - y) * stable_softplus(z)
    dz = (stable_sigmoid(z) - y) / B
    return float(per.mean()), dz[:, None] * u[None, :], R.T @ dz, float(dz.sum())


def svdd_loss(r, c):
    """Squared distance to the centre and its gradient."""
    c = np.asarray(c, dtype=np.float64).reshape(-1)
    r = _vec(r, c.size)
    d = r - c
    return float(d @ d), 2.0 * d


def svdd_batch_grad(R, c):
    c = np.asarray(c, dtype=np.float64).reshape(-1)
    R = _mat(R, c.size)
    B = R.shape[0]
    if B == 0:
        raise EmptyBatchError("empty batch")
    d = R - c
    return float(np.sum(d * d, axis=1).mean()), 2.0 * d / B


def sad_loss(r, y, c, eps=SAD_EPS):
    """Labelled hypersphere loss: squared distance for normals, its
    (guarded) inverse for anomalies."""
    y = _check_label(y)
    c = np.asarray(c, dtype=np.float64).reshape(-1)
    r = _vec(r, c.size)
    d = r - c
    sq = float(d @ d)
    if y == 0:
        return sq, 2.0 * d
    inv = 1.0 / (sq + eps)
    return inv, -2.0 * d * inv * inv


def sad_batch_grad(R, labels, c, eps=SAD_EPS):
    c = np.asarray(c, dtype=np.float64).reshape(-1)
    R = _mat(R, c.size)
    y = _check_labels(labels).reshape(-1)
    B = R.shape[0]
    if B == 0:
        raise EmptyBatchError("empty batch")
    d = R - c
    sq = np.sum(d * d, axis=1)
    inv = 1.0 / (sq + eps)
    per = np.where(y == 1, inv, sq)
    coef = np.where(y == 1, -2.0 * inv * inv, 2.0)
    return float(per.mean()), coef[:, None] * d / B
