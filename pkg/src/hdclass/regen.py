"""Selection of encoding dimensions that mislead classification.

Misclassified samples contribute per-dimension distance rows: one matrix
for samples whose true class ranked second (partial), one for samples
whose true class missed the top two entirely (incorrect).  Rows are
L2-normalized, summed column-wise, and the two top-R% index sets are
intersected; only dimensions that look bad from both viewpoints get
regenerated.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .core import DimensionError

#: Row formulas for the incorrect-sample matrix.  "prose" rewards
#: dimensions far from the true class and near both wrong classes with a
#: sign structure matching the partial-sample matrix; "listing" is the
#: alternative weighting kept for experimentation.
N_FORMULAS = ("prose", "listing")


@dataclass
class UndesiredSet:
    """Dimensions chosen for regeneration plus the per-side candidate cap."""

    dims: set[int]
    nominal_count: int

    def __post_init__(self):
        if len(self.dims) > self.nominal_count:
            raise ValueError("selected more dimensions than the nominal cap")


def _check_rows(*vectors) -> int:
    length = None
    for v in vectors:
        v = np.asarray(v)
        if length is None:
            length = v.shape[-1]
        elif v.shape[-1] != length:
            raise DimensionError(
                f"length mismatch: {v.shape[-1]} vs {length}")
    return length


def partial_row(h, c_true, c_top1, alpha: float, beta: float) -> np.ndarray:
    """Distance row for a sample whose true class ranked second.

    Large entries mark dimensions where the sample sits far from its true
    class but close to the class that beat it.
    """
    _check_rows(h, c_true, c_top1)
    if alpha <= 0 or beta <= 0:
        raise ValueError("alpha and beta must be positive")
    h = np.asarray(h, dtype=np.float64)
    return alpha * np.abs(h - c_true) - beta * np.abs(h - c_top1)


def incorrect_row(h, c_true, c_top1, c_top2, alpha: float, beta: float,
                  theta: float, formula: str = "prose") -> np.ndarray:
    """Distance row for a sample whose true class missed the top two."""
    _check_rows(h, c_true, c_top1, c_top2)
    if alpha <= 0 or beta <= 0 or theta <= 0:
        raise ValueError("alpha, beta and theta must be positive")
    if theta >= beta:
        raise ValueError(f"theta must be < beta, got theta={theta}, beta={beta}")
    h = np.asarray(h, dtype=np.float64)
    d_true = np.abs(h - np.asarray(c_true, dtype=np.float64))
    d_top1 = np.abs(h - np.asarray(c_top1, dtype=np.float64))
    d_top2 = np.abs(h - np.asarray(c_top2, dtype=np.float64))
    if formula == "prose":
        return alpha * d_true - beta * d_top1 - theta * d_top2
    if formula == "listing":
        return alpha * d_top1 + beta * d_top2 - theta * d_true
    raise ValueError(f"unknown incorrect-row formula: {formula!r}")


def _normalize_rows(rows: np.ndarray) -> np.ndarray:
    """Per-row L2 normalization; all-zero rows pass through unchanged."""
    norms = np.linalg.norm(rows, axis=1, keepdims=True)
    safe = np.where(norms == 0.0, 1.0, norms)
    return rows / safe


def aggregate(rows: list[np.ndarray] | np.ndarray, dim: int) -> np.ndarray:
    """Column-wise sum of L2-normalized rows; zeros when no rows exist."""
    if len(rows) == 0:
        return np.zeros(dim)
    mat = np.asarray(rows, dtype=np.float64)
    if mat.ndim != 2 or mat.shape[1] != dim:
        raise DimensionError(f"rows must be m x {dim}, got shape {mat.shape}")
    return _normalize_rows(mat).sum(axis=0)


def top_indices(scores: np.ndarray, count: int) -> np.ndarray:
    """Indices of the ``count`` largest entries, ties broken by low index."""
    order = np.lexsort((np.arange(scores.shape[0]), -scores))
    return order[:count]


def select_undesired(partial_rows, incorrect_rows, regen_rate: float,
                     dim: int) -> UndesiredSet:
    """Intersect the per-side top-R% dimension sets.

    Either side being empty (no samples of that category this iteration)
    yields an empty selection, so that iteration regenerates nothing.
    """
    if not 0 < regen_rate <= 100:
        raise ValueError(f"regeneration rate must be in (0, 100], got {regen_rate}")
    nominal = int(np.floor(regen_rate / 100.0 * dim))
    if len(partial_rows) == 0 or len(incorrect_rows) == 0 or nominal == 0:
        return UndesiredSet(set(), nominal)
    m_agg = aggregate(partial_rows, dim)
    n_agg = aggregate(incorrect_rows, dim)
    m_top = set(int(i) for i in top_indices(m_agg, nominal))
    n_top = set(int(i) for i in top_indices(n_agg, nominal))
    return UndesiredSet(m_top & n_top, nominal)


@dataclass
class RegenDump:
    """Optional per-iteration debug record of the aggregates and selection."""

    iteration: int
    m_aggregate: np.ndarray
    n_aggregate: np.ndarray
    selected: list[int] = field(default_factory=list)


def write_dump_csv(path: str, dumps: list[RegenDump]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "dimension", "m_aggregate", "n_aggregate",
                         "selected"])
        for d in dumps:
            chosen = set(d.selected)
            for j in range(d.m_aggregate.shape[0]):
                writer.writerow([d.iteration, j, repr(float(d.m_aggregate[j])),
                                 repr(float(d.n_aggregate[j])),
                                 int(j in chosen)])
