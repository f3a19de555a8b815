"""Dataset ingestion, splitting, windowing and synthetic generators."""

import csv
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import (
    CapacityError,
    DegenerateSplitError,
    FormatError,
    InputError,
    InsufficientDataError,
    SpecError,
)
from .numerics import STREAM_DATA, STREAM_SAMPLING, SeededRng


def _round_half_up(x):
    return int(math.floor(x + 0.5))


@dataclass
class Dataset:
    """Feature matrix with binary labels.

    ``classes`` keeps original (possibly multi-class) labels when the source
    has them; ``y`` is always ``classes != 0``. ``ids`` are stable sample
    identifiers that survive splitting and subsampling.
    """

    X: np.ndarray
    y: np.ndarray
    provenance: str = ""
    classes: np.ndarray = None
    ids: np.ndarray = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        if self.X.ndim != 2 or self.X.shape[0] < 1:
            raise InputError(f"expected a non-empty 2-D feature matrix, got shape {self.X.shape}")
        if not np.all(np.isfinite(self.X)):
            raise InputError("features contain non-finite values")
        self.y = np.asarray(self.y).astype(np.int64).reshape(-1)
        if self.y.size != self.X.shape[0]:
            raise InputError(f"{self.y.size} labels for {self.X.shape[0]} samples")
        if not np.all((self.y == 0) | (self.y == 1)):
            raise InputError("labels must be 0 (normal) or 1 (anomaly)")
        self.classes = self.y.copy() if self.classes is None else np.asarray(self.classes).astype(np.int64)
        self.ids = np.arange(len(self.y)) if self.ids is None else np.asarray(self.ids, dtype=np.int64)

    def __len__(self):
        return self.X.shape[0]

    @property
    def n_features(self):
        return self.X.shape[1]

    @property
    def n_normal(self):
        return int(np.sum(self.y == 0))

    @property
    def n_anomalous(self):
        return int(np.sum(self.y == 1))

    @property
    def anomaly_fraction(self):
        return self.n_anomalous / len(self)

    def subset(self, idx, provenance=None):
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.X[idx], self.y[idx], provenance or self.provenance,
                       self.classes[idx], self.ids[idx])

    @classmethod
    def from_classes(cls, X, classes, provenance=""):
        classes = np.asarray(classes).astype(np.int64)
        return cls(X, (classes != 0).astype(np.int64), provenance, classes)


@dataclass
class Series:
    """Multichannel series ``T x C`` with one binary label per timestep."""

    values: np.ndarray
    labels: np.ndarray
    provenance: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim == 1:
            self.values = self.values[:, None]
        self.labels = np.asarray(self.labels).astype(np.int64).reshape(-1)
        if self.labels.size != self.values.shape[0]:
            raise InputError("one label per timestep is required")

    def __len__(self):
        return self.values.shape[0]


@dataclass(frozen=True)
class SeriesWindowSpec:
    window_length: int = 100
    stride: int = 1
    label_rule: str = "any"
    standardization: str = "train"  # "train", "window" or "none"

    def __post_init__(self):
        if self.window_length < 1 or self.stride < 1:
            raise SpecError("window_length and stride must be >= 1")
        if self.label_rule not in ("any", "last"):
            raise SpecError(f"unknown label rule {self.label_rule!r}")
        if self.standardization not in ("train", "window", "none"):
            raise SpecError(f"unknown standardization {self.standardization!r}")


# ---------------------------------------------------------------- loaders


def _parse_label(text, where, multiclass):
    try:
        v = float(text)
    except ValueError:
        raise FormatError(f"{where}: label {text!r} is not numeric") from None
    if multiclass:
        if v != int(v) or v < 0:
            raise FormatError(f"{where}: class label {text!r} must be a non-negative integer")
        return int(v)
    if v not in (0.0, 1.0):
        raise FormatError(f"{where}: label {text!r} must be 0 or 1")
    return int(v)


def load_csv(path, label_column=-1, header=False, multiclass=False):
    """Read a comma-separated file of real features plus one label column.

    Parameters
    ----------
    path : str or Path
    label_column : int
        Position of the label, negative values count from the end.
    header : bool
        Skip the first line.
    multiclass : bool
        Accept any non-negative integer class; class 0 is normal and every
        other class is an anomaly.
    """
    rows, labels = [], []
    width = None
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if lineno == 1 and header:
                continue
            if not row or all(not cell.strip() for cell in row):
                continue
            if width is None:
                width = len(row)
                if width < 2:
                    raise FormatError(f"row {lineno}: need at least one feature and a label")
                lab = label_column % width
            elif len(row) != width:
                raise FormatError(f"row {lineno}: {len(row)} columns, expected {width}")
            feats = []
            for col, cell in enumerate(row):
                if col == lab:
                    continue
                try:
                    feats.append(float(cell))
                except ValueError:
                    raise FormatError(f"row {lineno}, column {col + 1}: cannot parse {cell!r}") from None
            labels.append(_parse_label(row[lab].strip(), f"row {lineno}, column {lab + 1}", multiclass))
            rows.append(feats)
    if not rows:
        raise FormatError(f"{path}: no data rows")
    return Dataset.from_classes(np.array(rows), labels, provenance=f"csv:{path}")


def save_csv(ds, path, label_column=-1):
    """Write features and labels so that :func:`load_csv` reads them back exactly."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for x, c in zip(ds.X, ds.classes):
            cells = [repr(float(v)) for v in x]
            pos = label_column % (len(cells) + 1)
            cells.insert(pos, str(int(c)))
            writer.writerow(cells)


_SVM_LABELS = {-1.0: 0, 0.0: 0, 1.0: 1}


def load_svmlight(path, n_features=None):
    """Densify an SVMLight/LIBSVM file.

    Indices are 1-based and must increase within a line. The width is the
    largest index seen in the file unless ``n_features`` is given. Labels
    -1/0 map to normal, +1/1 to anomaly. ``qid:`` tokens and ``#`` comments
    are ignored.
    """
    entries, labels = [], []
    max_idx = 0
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            try:
                lab = float(tokens[0])
            except ValueError:
                raise FormatError(f"line {lineno}: bad label {tokens[0]!r}") from None
            if lab not in _SVM_LABELS:
                raise FormatError(f"line {lineno}: label {tokens[0]!r} not in {{-1, 0, 1}}")
            pairs, last = [], 0
            for tok in tokens[1:]:
                if tok.startswith("qid:"):
                    continue
                idx_s, sep, val_s = tok.partition(":")
                try:
                    idx, val = int(idx_s), float(val_s)
                except ValueError:
                    raise FormatError(f"line {lineno}: malformed pair {tok!r}") from None
                if not sep or idx < 1:
                    raise FormatError(f"line {lineno}: malformed pair {tok!r}")
                if idx <= last:
                    raise FormatError(f"line {lineno}: index {idx} is not ascending")
                last = idx
                pairs.append((idx, val))
            max_idx = max(max_idx, last)
            entries.append(pairs)
            labels.append(_SVM_LABELS[lab])
    if not entries:
        raise FormatError(f"{path}: no data lines")
    width = max_idx if n_features is None else int(n_features)
    if width < max_idx:
        raise FormatError(f"index {max_idx} exceeds n_features={width}")
    X = np.zeros((len(entries), max(width, 1)))
    for i, pairs in enumerate(entries):
        for idx, val in pairs:
            X[i, idx - 1] = val
    return Dataset(X, labels, provenance=f"svmlight:{path}")


def load_series_csv(path, label_column=-1, header=False):
    """Series stored as one CSV row per timestep: channels plus a 0/1 label."""
    ds = load_csv(path, label_column=label_column, header=header)
    return Series(ds.X, ds.y, provenance=f"series:{path}")


# ---------------------------------------------------------------- splits


def stratified_split(ds, train_fraction=0.6, seed=42, by_class=False):
    """Per-class seeded split.

    Each class contributes ``round(train_fraction * count)`` samples
    (half rounds up) to the training set; the rest go to the test set.
    Both outputs keep the original sample order. With ``by_class`` the
    strata are the original class ids instead of the binary labels.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie in (0, 1)")
    if ds.n_normal == 0 or ds.n_anomalous == 0:
        raise DegenerateSplitError("stratified split needs both normal and anomalous samples")
    strata = ds.classes if by_class else ds.y
    root = SeededRng(seed).stream(STREAM_SAMPLING)
    train_idx = []
    for label in np.unique(strata):
        idx = np.flatnonzero(strata == label)
        perm = root.stream(int(label)).permutation(idx.size)
        n_train = _round_half_up(train_fraction * idx.size)
        train_idx.append(idx[perm[:n_train]])
    train_idx = np.sort(np.concatenate(train_idx))
    mask = np.zeros(len(ds), dtype=bool)
    mask[train_idx] = True
    return (ds.subset(train_idx, f"{ds.provenance}|train"),
            ds.subset(np.flatnonzero(~mask), f"{ds.provenance}|test"))


def chronological_split(series, fraction=0.5):
    """First ``floor(fraction * T)`` timesteps for training, the rest for testing."""
    T = len(series)
    if T < 2:
        raise InsufficientDataError("series needs at least 2 timesteps to split")
    cut = int(math.floor(fraction * T))
    return (Series(series.values[:cut], series.labels[:cut], f"{series.provenance}|train"),
            Series(series.values[cut:], series.labels[cut:], f"{series.provenance}|test"))


def channel_stats(series):
    """Per-channel mean and standard deviation; zero deviation becomes 1."""
    mean = series.values.mean(axis=0)
    std = series.values.std(axis=0)
    return mean, np.where(std > 0, std, 1.0)


def window_series(series, spec=SeriesWindowSpec(), train_stats=None):
    """Slide a window over a series and flatten each window to one sample.

    A window covering timesteps ``[s, s + L)`` becomes the row
    ``values[s:s+L].reshape(-1)`` (time-major). With
    ``standardization="train"`` each channel is standardised with
    ``train_stats = (mean, std)`` (computed from ``series`` itself when not
    given); ``"window"`` z-scores each channel within each window.
    """
    L, S = spec.window_length, spec.stride
    T = len(series)
    if T < L:
        raise InsufficientDataError(f"series of length {T} is shorter than window {L}")
    values = series.values
    if spec.standardization == "train":
        mean, std = channel_stats(series) if train_stats is None else train_stats
        std = np.where(np.asarray(std) > 0, std, 1.0)
        values = (values - mean) / std
    starts = np.arange(0, T - L + 1, S)
    windows = np.stack([values[s:s + L] for s in starts])
    if spec.standardization == "window":
        mu = windows.mean(axis=1, keepdims=True)
        sd = windows.std(axis=1, keepdims=True)
        windows = (windows - mu) / np.where(sd > 0, sd, 1.0)
    if spec.label_rule == "any":
        labels = np.array([series.labels[s:s + L].max() for s in starts])
    else:
        labels = series.labels[starts + L - 1]
    return Dataset(windows.reshape(len(starts), -1), labels,
                   provenance=f"{series.provenance}|windows(L={L},S={S})")


def subsample_anomaly_proportion(train, p, seed=42):
    """Keep every normal and just enough seeded-random anomalies for fraction ``p``.

    The number kept is ``round(p * n_normal / (1 - p))`` (at least one).
    Original sample order is preserved, so a proportion equal to the natural
    one returns the dataset unchanged.
    """
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    normal = np.flatnonzero(train.y == 0)
    anomal = np.flatnonzero(train.y == 1)
    need = max(1, _round_half_up(p * normal.size / (1.0 - p)))
    if need > anomal.size:
        p_max = anomal.size / (anomal.size + normal.size)
        raise CapacityError(
            f"proportion {p} needs {need} anomalies but only {anomal.size} are available "
            f"(maximum achievable proportion {p_max:.4f})",
            max_proportion=p_max,
        )
    keep = anomal[np.sort(SeededRng(seed).stream(STREAM_SAMPLING).choice(anomal.size, need))]
    idx = np.sort(np.concatenate([normal, keep]))
    return train.subset(idx, f"{train.provenance}|p={p}")


# ---------------------------------------------------------------- synthetic


@dataclass
class Cluster:
    mean: tuple
    stdev: float
    count: int
    label: int = 0

    def __post_init__(self):
        if not self.stdev > 0:
            raise SpecError("cluster stdev must be positive")
        if self.count < 0:
            raise SpecError("cluster count must be non-negative")


def gen_gaussian_clusters(clusters, seed=0):
    """Isotropic Gaussian blobs.

    ``clusters`` is a sequence of :class:`Cluster` or ``(mean, stdev, count,
    label)`` tuples; ``label`` is a class id (0 normal). Each cluster draws
    from its own derived stream, so changing one count leaves the other
    clusters' samples untouched.
    """
    clusters = [c if isinstance(c, Cluster) else Cluster(*c) for c in clusters]
    if not clusters:
        raise SpecError("at least one cluster is required")
    dim = len(clusters[0].mean)
    if any(len(c.mean) != dim for c in clusters):
        raise SpecError("all cluster means must have the same dimension")
    root = SeededRng(seed).stream(STREAM_DATA)
    xs, cs = [np.zeros((0, dim))], [np.zeros(0, dtype=np.int64)]
    for k, c in enumerate(clusters):
        if c.count == 0:
            continue
        xs.append(root.stream(k).normal(0.0, 1.0, size=(c.count, dim)) * c.stdev
                  + np.asarray(c.mean, dtype=np.float64))
        cs.append(np.full(c.count, int(c.label)))
    return Dataset.from_classes(np.concatenate(xs), np.concatenate(cs), provenance=f"gaussian:{seed}")


def gen_spike_series(length, channels=1, spikes=(), noise=0.1, seed=0):
    """Gaussian noise plus additive spikes on every channel.

    ``spikes`` is a sequence of ``(position, magnitude)``; spiked timesteps
    are labelled 1.
    """
    T, C = int(length), int(channels)
    values = SeededRng(seed).stream(STREAM_DATA).normal(0.0, noise, size=(T, C))
    labels = np.zeros(T, dtype=np.int64)
    for pos, mag in spikes:
        if not 0 <= pos < T:
            raise SpecError(f"spike position {pos} outside [0, {T})")
        values[pos] += mag
        labels[pos] = 1
    return Series(values, labels, provenance=f"spikes:{seed}")
