"""Dataset ingestion, normalization, splitting, and synthetic benchmarks."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

ZSCORE = "zscore"
MINMAX = "minmax"


class ParseError(ValueError):
    """CSV parsing failure; the message names the offending line."""


@dataclass
class Dataset:
    """Immutable-by-convention feature matrix plus dense 0-based labels."""

    features: np.ndarray
    labels: np.ndarray
    names: list[str] | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.intp)
        if self.features.ndim != 2:
            raise ValueError(f"features must be 2-D, got shape {self.features.shape}")
        if self.labels.shape != (self.features.shape[0],):
            raise ValueError("label count does not match sample count")

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return int(self.labels.max()) + 1 if self.labels.size else 0


def load_csv(path: str, label_column=-1, has_header: bool = True,
             delimiter: str = ",") -> Dataset:
    """Parse a delimited file into features plus integer-mapped labels.

    ``label_column`` may be a column name (requires a header) or an index;
    negative indices count from the right.  Label strings map to dense ids
    by sorted order, so the mapping is stable across runs and row orders.
    """
    rows = []
    header = None
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        for lineno, row in enumerate(reader, start=1):
            if not row:
                continue
            if has_header and header is None:
                header = row
                continue
            rows.append((lineno, row))
    if not rows:
        raise ParseError(f"{path}: no data rows")

    width = len(rows[0][1])
    if isinstance(label_column, str):
        if header is None:
            raise ParseError(f"{path}: label column {label_column!r} needs a header")
        try:
            label_idx = header.index(label_column)
        except ValueError:
            raise ParseError(f"{path}: unknown label column {label_column!r}") from None
    else:
        label_idx = int(label_column)
        if label_idx < 0:
            label_idx += width
        if not 0 <= label_idx < width:
            raise ParseError(f"{path}: label column index {label_column} out of range")

    features = np.empty((len(rows), width - 1))
    raw_labels = []
    for r, (lineno, row) in enumerate(rows):
        if len(row) != width:
            raise ParseError(
                f"{path}: line {lineno}: expected {width} columns, found {len(row)}")
        raw_labels.append(row[label_idx].strip())
        cells = row[:label_idx] + row[label_idx + 1:]
        for c, cell in enumerate(cells):
            try:
                features[r, c] = float(cell)
            except ValueError:
                raise ParseError(
                    f"{path}: line {lineno}: non-numeric feature value {cell!r}") from None

    names = sorted(set(raw_labels), key=_label_sort_key)
    mapping = {name: i for i, name in enumerate(names)}
    labels = np.array([mapping[l] for l in raw_labels], dtype=np.intp)
    meta = {"source": path, "n_features": width - 1, "n_classes": len(names)}
    return Dataset(features, labels, names, meta)


def _label_sort_key(label: str):
    try:
        return (0, float(label), label)
    except ValueError:
        return (1, 0.0, label)


def save_csv(path: str, ds: Dataset, delimiter: str = ",") -> None:
    """Write a Dataset back out with a header; inverse of ``load_csv``."""
    names = ds.names or [str(i) for i in range(ds.n_classes)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter=delimiter)
        writer.writerow([f"feat_{i}" for i in range(ds.n_features)] + ["label"])
        for j in range(ds.n_samples):
            writer.writerow([repr(float(v)) for v in ds.features[j]]
                            + [names[int(ds.labels[j])]])


@dataclass
class NormalizationSpec:
    """Per-feature affine transform fitted on the training split only."""

    mode: str
    shift: np.ndarray   # mean (zscore) or min (minmax)
    scale: np.ndarray   # std (zscore) or max-min (minmax); 0 marks constants

    def to_dict(self) -> dict:
        return {"mode": self.mode, "shift": self.shift.tolist(),
                "scale": self.scale.tolist()}

    @classmethod
    def from_dict(cls, doc: dict) -> "NormalizationSpec":
        return cls(doc["mode"], np.asarray(doc["shift"], dtype=np.float64),
                   np.asarray(doc["scale"], dtype=np.float64))


def fit_normalizer(train: Dataset, mode: str = ZSCORE) -> NormalizationSpec:
    if train.n_samples == 0:
        raise ValueError("cannot fit a normalizer on an empty dataset")
    X = train.features
    if mode == ZSCORE:
        shift = X.mean(axis=0)
        scale = X.std(axis=0)
    elif mode == MINMAX:
        shift = X.min(axis=0)
        scale = X.max(axis=0) - shift
    else:
        raise ValueError(f"unknown normalization mode {mode!r}")
    if np.any(scale == 0.0):
        log.warning("constant feature columns detected: %s",
                    np.flatnonzero(scale == 0.0).tolist())
    return NormalizationSpec(mode, shift, scale)


def apply_normalizer(spec: NormalizationSpec, ds: Dataset) -> Dataset:
    """Apply a fitted spec; constant columns map to 0 (zscore) or 0.5 (minmax)."""
    X = ds.features
    if X.shape[1] != spec.shift.shape[0]:
        raise ValueError(
            f"dataset has {X.shape[1]} features, spec expects {spec.shift.shape[0]}")
    out = np.empty_like(X)
    const = spec.scale == 0.0
    live = ~const
    out[:, live] = (X[:, live] - spec.shift[live]) / spec.scale[live]
    out[:, const] = 0.0 if spec.mode == ZSCORE else 0.5
    return Dataset(out, ds.labels.copy(), ds.names, dict(ds.meta))


def split(ds: Dataset, fractions, stratified: bool = False,
          seed: int = 0) -> tuple[Dataset, Dataset, Dataset]:
    """Disjoint, exhaustive (train, valid, test) partition."""
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3 or any(f < 0 for f in fractions) or fractions[0] <= 0:
        raise ValueError(f"need 3 nonnegative fractions with train > 0, got {fractions}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions must sum to 1, got {sum(fractions)}")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    m = ds.n_samples
    parts: list[list[int]] = [[], [], []]
    if stratified:
        n_active = sum(1 for f in fractions if f > 0)
        for cls in range(ds.n_classes):
            idx = np.flatnonzero(ds.labels == cls)
            if idx.size < n_active:
                raise ValueError(
                    f"class {cls} has {idx.size} samples, fewer than the "
                    f"{n_active} requested splits")
            rng.shuffle(idx)
            _assign(idx, fractions, parts)
    else:
        idx = rng.permutation(m)
        _assign(idx, fractions, parts)
    out = []
    for p in parts:
        sel = np.array(sorted(p), dtype=np.intp)
        out.append(Dataset(ds.features[sel], ds.labels[sel], ds.names, dict(ds.meta)))
    return tuple(out)


def _assign(idx: np.ndarray, fractions, parts) -> None:
    m = idx.size
    n_train = int(round(fractions[0] * m))
    n_valid = int(round(fractions[1] * m))
    n_train = min(n_train, m)
    n_valid = min(n_valid, m - n_train)
    parts[0].extend(idx[:n_train].tolist())
    parts[1].extend(idx[n_train:n_train + n_valid].tolist())
    parts[2].extend(idx[n_train + n_valid:].tolist())


def synth_blobs(n_features: int, k_classes: int, per_class: int,
                separation: float, seed: int) -> Dataset:
    """Gaussian clusters with unit within-class sd.

    Class means are random Gaussian points rescaled so the closest pair
    sits exactly ``separation`` apart (all pairs at least that far).  A
    separation of 0 collapses every mean onto the origin.
    """
    if min(n_features, k_classes, per_class) < 1:
        raise ValueError("counts must all be >= 1")
    if separation < 0:
        raise ValueError(f"separation must be >= 0, got {separation}")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    means = rng.standard_normal((k_classes, n_features))
    if k_classes > 1:
        dists = np.linalg.norm(means[:, None, :] - means[None, :, :], axis=2)
        min_dist = dists[np.triu_indices(k_classes, 1)].min()
        means = means * (separation / min_dist) if min_dist > 0 else means * 0.0
    else:
        means *= 0.0
    labels = np.repeat(np.arange(k_classes), per_class)
    noise = rng.standard_normal((labels.size, n_features))
    features = means[labels] + noise
    return Dataset(features, labels,
                   [str(c) for c in range(k_classes)],
                   {"source": "synthetic", "separation": separation, "seed": seed})
