"""Experiment orchestration: configs, protocols, persistence, embedding export.

Three protocols are supported:

``single``
    load -> split -> fit -> score the test split.
``rotation``
    class 0 is normal; for every other class ``k`` a cell trains on
    classes {0, k} and tests on all classes, reporting metrics on the full
    test set plus the *seen* (classes 0 and k) and *unseen* (class 0 and
    every class except k) subsets. Cell ``k`` uses seed ``seed + k``.
``proportion_sweep``
    the training split is subsampled to each anomaly proportion and one
    model per objective is trained on it. Every point uses the master seed,
    so a proportion equal to the natural one reproduces ``single``.

Result records are appended to ``<output_dir>/results.jsonl``, one JSON
object per line with sorted keys. Checkpoints go to
``<output_dir>/checkpoints/<experiment_id>__<cell>.ckpt``.
"""

import copy
import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .checkpoint import Checkpoint, check_width, save_checkpoint
from .data import (
    SeriesWindowSpec,
    chronological_split,
    channel_stats,
    gen_gaussian_clusters,
    gen_spike_series,
    load_csv,
    load_series_csv,
    load_svmlight,
    stratified_split,
    subsample_anomaly_proportion,
    window_series,
)
from .estimator import CEDLDetector
from .evaluation import MetricReport, evaluate
from .exceptions import CapacityError, CEDLError, ExperimentError, ProtocolError
from .numerics import STREAM_SAMPLING, SeededRng

OUTPUT_DIR_ENV = "CEDL_OUTPUT_DIR"
PROTOCOLS = ("single", "rotation", "proportion_sweep")
MODALITIES = ("tabular", "series", "labelled-classes")

DEFAULTS = {
    "experiment_id": "experiment",
    "protocol": "single",
    "modality": "tabular",
    "data": {},
    "encoder": {"hidden": [1000, 256, 64], "latent_dim": 32,
                "hidden_activation": "relu", "output_activation": "tanh"},
    "train": {"epochs": 100, "batch_size": 64, "learning_rate": 1e-4, "seed": 42, "shuffle": True},
    "objective": {"kind": "cedl", "alpha": 1.0, "class_weight": "balanced", "centre_mode": "fixed"},
    "split": {"train_fraction": 0.6, "series_fraction": 0.5, "window_length": 100, "stride": 1,
              "standardization": "train", "label_rule": "any"},
    "rotation": {"train_normal_fraction": 1.0, "train_anomaly_fraction": 1.0},
    "proportions": [0.01, 0.05, 0.1, 0.15, 0.2],
    "sweep_objectives": ["cedl", "bce"],
    "output_dir": "results",
}


@dataclass
class ExperimentConfig:
    experiment_id: str
    protocol: str
    modality: str
    data: dict
    encoder: dict
    train: dict
    objective: dict
    split: dict
    rotation: dict
    proportions: list
    sweep_objectives: list
    output_dir: str
    base_dir: str = field(default=".", compare=False)

    @classmethod
    def from_dict(cls, raw, base_dir="."):
        """Merge ``raw`` over :data:`DEFAULTS`; unknown keys are rejected."""
        cfg = copy.deepcopy(DEFAULTS)
        for key, value in (raw or {}).items():
            if key not in DEFAULTS:
                raise ValueError(f"unknown config key {key!r}")
            if isinstance(DEFAULTS[key], dict) and key != "data":
                unknown = set(value) - set(DEFAULTS[key])
                if unknown:
                    raise ValueError(f"unknown keys in {key!r}: {sorted(unknown)}")
                cfg[key].update(value)
            else:
                cfg[key] = copy.deepcopy(value)
        if cfg["protocol"] not in PROTOCOLS:
            raise ValueError(f"protocol must be one of {PROTOCOLS}")
        if cfg["modality"] not in MODALITIES:
            raise ValueError(f"modality must be one of {MODALITIES}")
        if "source" not in cfg["data"]:
            raise ValueError("data.source is required")
        env_dir = os.environ.get(OUTPUT_DIR_ENV)
        if env_dir:
            cfg["output_dir"] = env_dir
        return cls(**cfg, base_dir=str(base_dir))

    @classmethod
    def from_file(cls, path, overrides=None):
        import yaml

        path = Path(path)
        with open(path) as fh:
            raw = yaml.safe_load(fh) or {}
        for key, value in (overrides or {}).items():
            if isinstance(value, dict):
                raw.setdefault(key, {}).update(value)
            else:
                raw[key] = value
        return cls.from_dict(raw, base_dir=path.parent)

    def to_dict(self):
        return {k: copy.deepcopy(getattr(self, k)) for k in DEFAULTS}

    def digest(self):
        """SHA-256 of the canonical JSON form, ignoring where results are written."""
        d = self.to_dict()
        d.pop("output_dir")
        text = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode("utf-8")).hexdigest()

    def resolve(self, path):
        p = Path(path)
        return p if p.is_absolute() else Path(self.base_dir) / p

    @property
    def objective_kinds(self):
        kind = self.objective["kind"]
        return [kind] if isinstance(kind, str) else list(kind)


@dataclass
class ResultRecord:
    experiment_id: str
    cell: str
    protocol: str
    objective: str
    seed: int
    config_digest: str
    metrics: MetricReport
    breakdown: dict = field(default_factory=dict)
    train: dict = field(default_factory=dict)
    wall_time_s: float = None

    def to_dict(self, include_timing=False):
        out = {
            "experiment_id": self.experiment_id,
            "cell": self.cell,
            "protocol": self.protocol,
            "objective": self.objective,
            "seed": self.seed,
            "config_digest": self.config_digest,
            "metrics": self.metrics.to_dict(),
            "breakdown": {k: v.to_dict() for k, v in self.breakdown.items()},
            "train": self.train,
        }
        if include_timing:
            out["wall_time_s"] = self.wall_time_s
        return out

    def to_json(self, include_timing=False):
        return json.dumps(self.to_dict(include_timing), sort_keys=True)


class ResultWriter:
    """Serialises appends to one JSON-lines file."""

    def __init__(self, path, include_timing=False):
        self.path = Path(path)
        self.include_timing = include_timing
        self._lock = threading.Lock()

    def append(self, record):
        line = record.to_json(self.include_timing) + "\n"
        with self._lock:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a") as fh:
                fh.write(line)


# ---------------------------------------------------------------- data


def load_source(cfg):
    """Load the configured source.

    Returns a :class:`~cedl.data.Dataset` for tabular and labelled-classes
    modalities and a :class:`~cedl.data.Series` for the series modality.
    """
    d = cfg.data
    src = d["source"]
    multiclass = cfg.modality == "labelled-classes"
    if src == "csv":
        return load_csv(cfg.resolve(d["path"]), d.get("label_column", -1), d.get("header", False),
                        multiclass=multiclass)
    if src == "svmlight":
        return load_svmlight(cfg.resolve(d["path"]), d.get("n_features"))
    if src == "series_csv":
        return load_series_csv(cfg.resolve(d["path"]), d.get("label_column", -1), d.get("header", False))
    if src == "synthetic":
        kind = d.get("kind", "gaussian")
        if kind == "gaussian":
            clusters = [(c["mean"], c["stdev"], c["count"], c.get("label", 0)) for c in d["clusters"]]
            return gen_gaussian_clusters(clusters, seed=d.get("seed", 0))
        if kind == "spikes":
            return gen_spike_series(d["length"], d.get("channels", 1),
                                    [tuple(s) for s in d.get("spikes", [])],
                                    d.get("noise", 0.1), seed=d.get("seed", 0))
        raise ValueError(f"unknown synthetic kind {kind!r}")
    raise ValueError(f"unknown data source {src!r}")


def _window_spec(cfg):
    s = cfg.split
    return SeriesWindowSpec(s["window_length"], s["stride"], s["label_rule"], s["standardization"])


def prepare_split(cfg):
    """``(train, test)`` datasets for the configured modality.

    Tabular data is split 60/40 (by default) with the stratified split;
    labelled-classes data is stratified per original class; series are split
    chronologically and windowed with training-segment statistics.
    """
    src = load_source(cfg)
    seed = cfg.train["seed"]
    if cfg.modality == "series":
        train_s, test_s = chronological_split(src, cfg.split["series_fraction"])
        stats = channel_stats(train_s)
        spec = _window_spec(cfg)
        return window_series(train_s, spec, stats), window_series(test_s, spec, stats)
    if cfg.modality == "labelled-classes":
        return stratified_split(src, cfg.split["train_fraction"], seed, by_class=True)
    return stratified_split(src, cfg.split["train_fraction"], seed)


# ---------------------------------------------------------------- runs


def make_estimator(cfg, objective, seed):
    e, t, o = cfg.encoder, cfg.train, cfg.objective
    return CEDLDetector(
        objective=objective,
        hidden_layer_sizes=tuple(e["hidden"]),
        latent_dim=e["latent_dim"],
        hidden_activation=e["hidden_activation"],
        output_activation=e["output_activation"],
        alpha=o["alpha"],
        class_weight=o["class_weight"],
        centre_mode=o["centre_mode"],
        learning_rate=t["learning_rate"],
        batch_size=t["batch_size"],
        epochs=t["epochs"],
        shuffle=t["shuffle"],
        random_state=seed,
    )


def _fit_and_record(cfg, cell, objective, seed, train, test, subsets=None):
    start = time.perf_counter()
    est = make_estimator(cfg, objective, seed).fit(train.X, train.y)
    scores = est.decision_function(test.X)
    metrics = evaluate(scores, test.y)
    breakdown = {name: evaluate(scores[mask], test.y[mask]) for name, mask in (subsets or {}).items()}
    rep = est.train_report_
    info = {
        "n_train": len(train),
        "n_train_anomalous": train.n_anomalous,
        "anomaly_fraction": train.anomaly_fraction,
        "n_test": len(test),
        "w0": est.objective_config_.w0,
        "w1": est.objective_config_.w1,
        "best_loss": rep.best_loss,
        "best_epoch": rep.best_epoch,
    }
    record = ResultRecord(cfg.experiment_id, cell, cfg.protocol, objective, seed, cfg.digest(),
                          metrics, breakdown, info, time.perf_counter() - start)
    ckpt = Checkpoint.from_estimator(est, experiment_id=cfg.experiment_id, cell=cell)
    return record, ckpt


def _persist(cfg, records_ckpts, include_timing=False):
    out = Path(cfg.output_dir)
    if not out.is_absolute():
        out = Path.cwd() / out
    (out / "checkpoints").mkdir(parents=True, exist_ok=True)
    writer = ResultWriter(out / "results.jsonl", include_timing)
    for record, ckpt in records_ckpts:
        writer.append(record)
        save_checkpoint(ckpt, out / "checkpoints" / f"{cfg.experiment_id}__{record.cell}.ckpt")


def _guard(cfg, fn):
    try:
        return fn()
    except (CEDLError, OSError) as exc:
        if isinstance(exc, ExperimentError):
            raise
        raise ExperimentError(cfg.experiment_id, exc) from exc


def run_single(cfg, persist=True, include_timing=False):
    """Train and evaluate each configured objective once; returns the records."""
    def go():
        train, test = prepare_split(cfg)
        seed = cfg.train["seed"]
        return [_fit_and_record(cfg, f"single-{kind}", kind, seed, train, test)
                for kind in cfg.objective_kinds]

    pairs = _guard(cfg, go)
    if persist:
        _persist(cfg, pairs, include_timing)
    return [r for r, _ in pairs]


def rotation_cells(ds):
    """Non-normal classes, each of which becomes the known anomaly once."""
    classes = np.unique(ds.classes)
    if 0 not in classes or classes.size < 3:
        raise ProtocolError(f"rotation needs class 0 and at least two anomaly classes, got {classes.tolist()}")
    return [int(k) for k in classes if k != 0]


def _fraction_subset(idx, fraction, rng):
    if fraction >= 1.0:
        return idx
    n = int(np.floor(fraction * idx.size + 0.5))
    return np.sort(idx[rng.choice(idx.size, max(n, 1))])


def run_rotation(cfg, persist=True, include_timing=False):
    """One cell per anomaly class ``k``; returns the records in class order."""
    def go():
        train, test = prepare_split(cfg)
        pairs = []
        for k in rotation_cells(train):
            seed = cfg.train["seed"] + k
            rng = SeededRng(seed).stream(STREAM_SAMPLING)
            normals = _fraction_subset(np.flatnonzero(train.classes == 0),
                                       cfg.rotation["train_normal_fraction"], rng.stream(0))
            known = _fraction_subset(np.flatnonzero(train.classes == k),
                                     cfg.rotation["train_anomaly_fraction"], rng.stream(1))
            cell_train = train.subset(np.sort(np.concatenate([normals, known])))
            unseen_ids = train.ids[(train.classes != 0) & (train.classes != k)]
            unseen_ids = np.concatenate([unseen_ids, test.ids[(test.classes != 0) & (test.classes != k)]])
            if np.intersect1d(cell_train.ids, unseen_ids).size:
                raise ProtocolError(f"cell {k}: unseen-class samples leaked into training")
            subsets = {
                "seen": (test.classes == 0) | (test.classes == k),
                "unseen": test.classes != k,
            }
            for kind in cfg.objective_kinds:
                pairs.append(_fit_and_record(cfg, f"rot-k{k}-{kind}", kind, seed, cell_train, test, subsets))
        return pairs

    pairs = _guard(cfg, go)
    if persist:
        _persist(cfg, pairs, include_timing)
    return [r for r, _ in pairs]


def run_proportion_sweep(cfg, proportions=None, persist=True, include_timing=False):
    """One record per (proportion, objective), proportions in the given order."""
    proportions = list(cfg.proportions if proportions is None else proportions)

    def go():
        train, test = prepare_split(cfg)
        seed = cfg.train["seed"]
        subsets = {}
        for p in proportions:
            try:
                subsets[p] = subsample_anomaly_proportion(train, p, seed)
            except CapacityError as exc:
                raise CapacityError(f"first infeasible proportion {p}: {exc}",
                                    max_proportion=exc.max_proportion) from exc
        return [_fit_and_record(cfg, f"sweep-p{p:g}-{kind}", kind, seed, subsets[p], test)
                for p in proportions for kind in cfg.sweep_objectives]

    pairs = _guard(cfg, go)
    if persist:
        _persist(cfg, pairs, include_timing)
    return [r for r, _ in pairs]


def run(cfg, **kwargs):
    if cfg.protocol == "rotation":
        return run_rotation(cfg, **kwargs)
    if cfg.protocol == "proportion_sweep":
        return run_proportion_sweep(cfg, **kwargs)
    return run_single(cfg, **kwargs)


# ---------------------------------------------------------------- export


def embedding_rows(ckpt, dataset):
    """Header and rows: label, r_0..r_{D-1}, distance, score."""
    check_width(ckpt, dataset.X)
    R, dist, prob = ckpt.score(dataset.X)
    header = ["label"] + [f"r{j}" for j in range(R.shape[1])] + ["distance", "score"]
    rows = [[int(c)] + list(r) + [d, p] for c, r, d, p in zip(dataset.classes, R, dist, prob)]
    return header, rows


def export_embeddings(ckpt, dataset, out_path):
    """Write one CSV row per sample in dataset order.

    Columns: ``label`` (original class id, 0 = normal), the ``D``
    representation coordinates, ``distance`` to the centre and the
    probabilistic ``score``. Floats use ``repr`` so they round-trip exactly.
    """
    header, rows = embedding_rows(ckpt, dataset)
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join([str(row[0])] + [repr(float(v)) for v in row[1:]]))
    Path(out_path).parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
    return out_path


def evaluate_checkpoint(ckpt, dataset):
    check_width(ckpt, dataset.X)
    return evaluate(ckpt.decision_function(dataset.X), dataset.y)
