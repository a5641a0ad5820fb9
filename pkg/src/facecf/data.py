"""Datasets, CSV interchange and the three-cloud toy generator."""
from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class DataError(ValueError):
    """Raised for malformed or unusable input data."""


@dataclass(frozen=True, eq=False)
class Dataset:
    """N instances of d continuous features with integer class labels.

    ``label_mapping`` maps original label values (as read from a file) to the
    dense codes stored in ``labels``; it is empty for generated data.
    """

    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple = ()
    n_classes: int = 0
    label_mapping: dict = field(default_factory=dict)

    def __post_init__(self):
        X = np.array(self.features, dtype=np.float64, copy=True)
        y = np.array(self.labels, copy=True)
        if X.ndim != 2:
            raise DataError(f"features must be a 2-d matrix, got shape {X.shape}")
        n, d = X.shape
        if n < 2 or d < 1:
            raise DataError(f"need at least 2 rows and 1 feature, got {n}x{d}")
        if not np.all(np.isfinite(X)):
            raise DataError("features contain NaN or infinite values")
        if y.shape != (n,):
            raise DataError(f"expected {n} labels, got shape {y.shape}")
        if not np.issubdtype(y.dtype, np.integer):
            if not np.all(np.equal(np.mod(y, 1), 0)):
                raise DataError("labels must be integers")
        y = y.astype(np.int64)
        if y.min() < 0:
            raise DataError("labels must be nonnegative")
        n_classes = int(self.n_classes) or int(y.max()) + 1
        if n_classes < 2:
            raise DataError("need at least 2 classes")
        if y.max() >= n_classes:
            raise DataError(f"label {y.max()} out of range for {n_classes} classes")
        names = tuple(self.feature_names) or tuple(f"f{k}" for k in range(d))
        if len(names) != d:
            raise DataError(f"{len(names)} feature names for {d} features")
        X.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "n_classes", n_classes)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def __len__(self):
        return self.n

    def feature_index(self, feature) -> int:
        """Resolve a feature given by name or integer position."""
        if isinstance(feature, (int, np.integer)) and not isinstance(feature, bool):
            if 0 <= feature < self.d:
                return int(feature)
        elif isinstance(feature, str):
            if feature in self.feature_names:
                return self.feature_names.index(feature)
            if feature.lstrip("-").isdigit():
                return self.feature_index(int(feature))
        raise DataError(f"unknown feature {feature!r}")

    def fingerprint(self) -> dict:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.features).tobytes())
        h.update(np.ascontiguousarray(self.labels).tobytes())
        return {"n_rows": self.n, "n_features": self.d, "sha256": h.hexdigest()}

    def take(self, rows) -> Dataset:
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(self.features[rows], self.labels[rows], self.feature_names,
                       self.n_classes, dict(self.label_mapping))


def _parse_label(text):
    value = float(text)
    if not np.isfinite(value) or value != int(value):
        raise ValueError(text)
    return int(value)


def load_csv(path, label_column="label") -> Dataset:
    """Read a comma-separated file with a header row.

    ``label_column`` is a column name or a zero-based column index. Labels are
    remapped to the dense range ``[0, C)`` in ascending order of the original
    values; the mapping is kept on ``Dataset.label_mapping``.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        rows = [r for r in reader if r and any(c.strip() for c in r)]

    if isinstance(label_column, (int, np.integer)):
        lab = int(label_column)
        if not 0 <= lab < len(header):
            raise DataError(f"label column index {lab} out of range")
    elif label_column in header:
        lab = header.index(label_column)
    else:
        raise DataError(f"{path}: no label column {label_column!r} in header {header}")
    feat_cols = [k for k in range(len(header)) if k != lab]
    if not feat_cols:
        raise DataError(f"{path}: no feature columns")
    if len(rows) < 2:
        raise DataError(f"{path}: need at least 2 data rows, found {len(rows)}")

    X = np.empty((len(rows), len(feat_cols)))
    raw_labels = []
    # row numbers are 1-based over data rows (header excluded)
    for r, row in enumerate(rows, start=1):
        if len(row) != len(header):
            raise DataError(f"{path}: row {r} has {len(row)} fields, expected {len(header)}")
        for c, k in enumerate(feat_cols):
            try:
                X[r - 1, c] = float(row[k])
            except ValueError:
                raise DataError(f"{path}: non-numeric value {row[k]!r} at row {r}, column {header[k]!r}") from None
            if not np.isfinite(X[r - 1, c]):
                raise DataError(f"{path}: non-finite value at row {r}, column {header[k]!r}")
        try:
            raw_labels.append(_parse_label(row[lab]))
        except ValueError:
            raise DataError(f"{path}: non-integer label {row[lab]!r} at row {r}") from None

    distinct = sorted(set(raw_labels))
    if len(distinct) < 2:
        raise DataError(f"{path}: only one distinct label ({distinct[0]})")
    mapping = {orig: code for code, orig in enumerate(distinct)}
    y = np.array([mapping[v] for v in raw_labels], dtype=np.int64)
    return Dataset(X, y, tuple(header[k] for k in feat_cols), len(distinct), mapping)


def save_csv(data: Dataset, path, label_column="label"):
    """Write ``data`` with full float precision; labels are the dense codes."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([*data.feature_names, label_column])
        for x, y in zip(data.features, data.labels):
            writer.writerow([repr(float(v)) for v in x] + [int(y)])


@dataclass(frozen=True)
class ToySpec:
    n_blue: int = 200
    n_red_bottom: int = 200
    n_red_cluster: int = 100
    seed: int = 0

    def __post_init__(self):
        for name in ("n_blue", "n_red_bottom", "n_red_cluster"):
            if int(getattr(self, name)) < 1:
                raise DataError(f"{name} must be >= 1")


# extent of the uniform axis of the two elongated clouds
TOY_UNIFORM_RANGE = (0.0, 10.0)
TOY_CLUSTER_MEAN = (3.5, 8.0)


def generate_toy(spec: ToySpec = ToySpec()) -> Dataset:
    """Three-cloud 2-d toy problem.

    Class 0: a vertical band at x ~ N(0, 0.4), y uniform. Class 1: a
    horizontal band at y ~ N(0, 0.5), x uniform, plus a round cluster
    N((3.5, 8.0), 0.5). Rows come in that order.
    """
    rng = np.random.default_rng(spec.seed)
    lo, hi = TOY_UNIFORM_RANGE
    blue = np.column_stack([rng.normal(0.0, 0.4, spec.n_blue),
                            rng.uniform(lo, hi, spec.n_blue)])
    red_bottom = np.column_stack([rng.uniform(lo, hi, spec.n_red_bottom),
                                  rng.normal(0.0, 0.5, spec.n_red_bottom)])
    red_cluster = rng.normal(TOY_CLUSTER_MEAN, 0.5, size=(spec.n_red_cluster, 2))
    X = np.vstack([blue, red_bottom, red_cluster])
    y = np.concatenate([np.zeros(spec.n_blue, np.int64),
                        np.ones(spec.n_red_bottom + spec.n_red_cluster, np.int64)])
    return Dataset(X, y, ("x0", "x1"), 2)


def subsample(data: Dataset, m: int, seed: int = 0):
    """Uniform random subset of ``m`` rows, without replacement.

    Returns ``(subset, index_map)`` where ``index_map[i]`` is the original row
    of subset row ``i``. Rows keep their original relative order.
    """
    if not 2 <= m <= data.n:
        raise DataError(f"subsample size {m} outside [2, {data.n}]")
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(data.n, size=m, replace=False)).astype(np.int64)
    return data.take(idx), idx
