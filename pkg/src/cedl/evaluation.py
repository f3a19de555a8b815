"""Anomaly scores and ranking metrics (AUROC, average precision, best F1).

Scores follow the convention "higher means more anomalous". Tie handling:

* AUROC counts tied positive/negative pairs as one half (Mann-Whitney).
* AUPR walks samples in order of descending score, breaking ties by
  original index, and averages precision at every positive.
* best F1 only considers thresholds between distinct scores, where F1 can
  change.
"""

from dataclasses import asdict, dataclass

import numpy as np

from .encoder import forward
from .exceptions import DimensionError, UndefinedMetricError
from .numerics import stable_sigmoid


@dataclass
class MetricReport:
    auroc: float
    aupr: float
    best_f1: float
    best_threshold: float
    n_positive: int
    n_negative: int

    def to_dict(self):
        return asdict(self)


def score(model, cfg, batch):
    """Raw distance to the centre and its probabilistic form.

    Returns ``(distance, probability)`` with
    ``probability = sigmoid(alpha / sqrt(D) * distance)``; both are
    monotone in each other, so they rank samples identically.
    """
    R, _ = forward(model, batch)
    if R.shape[1] != cfg.latent_dim:
        raise DimensionError(f"encoder latent dim {R.shape[1]} != centre dim {cfg.latent_dim}")
    dist = np.linalg.norm(R - cfg.centre, axis=1)
    return dist, stable_sigmoid(cfg.scale * dist)


def _scored(scores, labels):
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    y = np.asarray(labels).reshape(-1)
    if s.size != y.size:
        raise DimensionError(f"{s.size} scores for {y.size} labels")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0 or 1")
    return s, y.astype(np.int64)


def _midranks(s):
    # each run of equal scores gets the mean of its 1-based positions
    _, inverse, counts = np.unique(s, return_inverse=True, return_counts=True)
    starts = np.cumsum(counts) - counts
    return (starts + 0.5 * (counts + 1))[inverse]


def auroc(scores, labels):
    s, y = _scored(scores, labels)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUROC needs at least one positive and one negative")
    ranks = _midranks(s)
    u = ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def aupr(scores, labels):
    """Average precision with a stable (score desc, index asc) ordering."""
    s, y = _scored(scores, labels)
    n_pos = int(y.sum())
    if n_pos == 0:
        raise UndefinedMetricError("average precision needs at least one positive")
    order = np.lexsort((np.arange(s.size), -s))
    hits = y[order]
    tp = np.cumsum(hits)
    ranks = np.arange(1, s.size + 1)
    return float(np.sum((tp / ranks)[hits == 1]) / n_pos)


def best_f1(scores, labels):
    """Maximum F1 of the rule ``score > threshold`` over all thresholds.

    Candidate thresholds are ``-inf``, the midpoints between consecutive
    distinct scores, and ``+inf``. Returns ``(f1, threshold)``; among equal
    F1 values the lowest threshold wins.
    """
    s, y = _scored(scores, labels)
    n_pos = int(y.sum())
    if n_pos == 0:
        raise UndefinedMetricError("F1 needs at least one positive")
    uniq = np.unique(s)  # ascending
    # predicted positive for threshold below uniq[k]: all scores >= uniq[k]
    pos_at = np.searchsorted(uniq, s[y == 1])
    neg_at = np.searchsorted(uniq, s[y == 0])
    m = uniq.size
    tp = np.cumsum(np.bincount(pos_at, minlength=m)[::-1])[::-1]
    fp = np.cumsum(np.bincount(neg_at, minlength=m)[::-1])[::-1]
    f1 = 2.0 * tp / (2.0 * tp + fp + (n_pos - tp))
    k = int(np.argmax(f1))  # first max is the lowest threshold
    if k == 0:
        thr = -np.inf
    else:
        lo, hi = uniq[k - 1], uniq[k]
        thr = float(lo + 0.5 * (hi - lo))
        if not lo <= thr < hi:
            # adjacent floats: the midpoint can round up onto hi
            thr = float(lo)
    return float(f1[k]), thr


def evaluate(scores, labels):
    """All three metrics for one scored set."""
    s, y = _scored(scores, labels)
    f1, thr = best_f1(s, y)
    return MetricReport(
        auroc=auroc(s, y),
        aupr=aupr(s, y),
        best_f1=f1,
        best_threshold=thr,
        n_positive=int(y.sum()),
        n_negative=int(y.size - y.sum()),
    )


def mean_report(reports):
    """Unweighted mean over entities (e.g. the series of a benchmark)."""
    reports = list(reports)
    if not reports:
        raise ValueError("no reports to average")
    return MetricReport(
        auroc=float(np.mean([r.auroc for r in reports])),
        aupr=float(np.mean([r.aupr for r in reports])),
        best_f1=float(np.mean([r.best_f1 for r in reports])),
        best_threshold=float("nan"),
        n_positive=sum(r.n_positive for r in reports),
        n_negative=sum(r.n_negative for r in reports),
    )
