"""Mean and anchored nearest-neighbour imputation of feature matrices.

Both methods can be fit on one matrix (the reference) and applied to
another, which is how cross-validation keeps held-out rows from leaking
into the fill statistics.  With no reference the matrix imputes itself.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .domain import FeatureMatrix

METHODS = ("MI", "KNNI")
DEFAULT_ANCHORS = ("Age", "Gender", "Ethnicity", "BMI")


@dataclass(frozen=True)
class ImputeConfig:
    method: str = "KNNI"
    k: int = 200
    anchor_attributes: tuple[str, ...] = DEFAULT_ANCHORS

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown imputation method {self.method!r}; expected one of {METHODS}")
        if int(self.k) < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        object.__setattr__(self, "anchor_attributes", tuple(self.anchor_attributes))


def _mode(codes: np.ndarray, n_categories: int) -> float:
    # argmax returns the first maximum, i.e. the earliest category in schema order
    counts = np.bincount(codes.astype(np.int64), minlength=n_categories)
    return float(np.argmax(counts))


def _fill_value(reference: FeatureMatrix, j: int) -> float:
    col = reference.columns[j]
    obs = reference.values[~reference.missing[:, j], j]
    if obs.size == 0:
        raise ValueError(f"column {col.name!r} has no observed values to impute from")
    return _mode(obs, len(col.categories)) if col.is_categorical else float(np.mean(obs))


def column_fill_values(reference: FeatureMatrix) -> np.ndarray:
    """Per-column mean (numeric) or mode (categorical) over observed cells."""
    return np.array([_fill_value(reference, j) for j in range(reference.shape[1])])


def mean_impute(matrix: FeatureMatrix, reference: FeatureMatrix | None = None) -> FeatureMatrix:
    """Fill each missing cell with its column's mean or mode over ``reference``."""
    ref = matrix if reference is None else reference
    _check_schema(matrix, ref)
    if not matrix.missing.any():
        return matrix
    fill = column_fill_values(ref)
    values = np.where(matrix.missing, fill[None, :], matrix.values)
    return matrix.replace(values, np.zeros_like(matrix.missing))


def _check_schema(matrix: FeatureMatrix, ref: FeatureMatrix) -> None:
    if matrix.columns != ref.columns:
        raise ValueError("reference matrix has a different column schema")


def anchor_scales(reference: FeatureMatrix, anchors: Sequence[str]) -> np.ndarray:
    """Population standard deviation of each numeric anchor (unused for categoricals)."""
    out = np.zeros(len(anchors))
    for a, name in enumerate(anchors):
        j = reference.column_index(name)
        if not reference.columns[j].is_categorical:
            out[a] = float(np.std(reference.values[:, j]))
    return out


def knn_distance(row_a: Sequence[float], row_b: Sequence[float], categorical: Sequence[bool],
                 scales: Sequence[float]) -> float:
    """Standardized Euclidean distance over anchor values with 0/1 categorical mismatch.

    ``row_a`` and ``row_b`` hold the anchor values only.  Numeric anchors with
    zero spread contribute nothing.
    """
    d2 = 0.0
    for a, b, cat, s in zip(row_a, row_b, categorical, scales):
        if cat:
            d2 += 0.0 if a == b else 1.0
        elif s > 0:
            t = (a - b) / s
            d2 += t * t
    return math.sqrt(d2)


def _anchor_block(matrix: FeatureMatrix, anchors: Sequence[str]) -> tuple[np.ndarray, list[bool]]:
    idx = []
    for name in anchors:
        try:
            idx.append(matrix.column_index(name))
        except KeyError:
            raise ValueError(f"anchor attribute {name!r} is not a column") from None
    bad = [matrix.columns[j].name for j in idx if matrix.missing[:, j].any()]
    if bad:
        raise ValueError(f"anchor attribute {bad[0]!r} has missing values")
    return matrix.values[:, idx], [matrix.columns[j].is_categorical for j in idx]


def pairwise_distances(A: np.ndarray, B: np.ndarray, categorical: Sequence[bool],
                       scales: np.ndarray) -> np.ndarray:
    """Distances between every row of ``A`` and every row of ``B`` (same arithmetic as knn_distance)."""
    d2 = np.zeros((A.shape[0], B.shape[0]))
    for a, cat in enumerate(categorical):
        diff = A[:, a][:, None] - B[:, a][None, :]
        if cat:
            d2 += (diff != 0).astype(float)
        elif scales[a] > 0:
            t = diff / scales[a]
            d2 += t * t
    return np.sqrt(d2)


def nearest_neighbors(matrix: FeatureMatrix, reference: FeatureMatrix, config: ImputeConfig,
                      rows: np.ndarray, exclude_self: bool) -> np.ndarray:
    """Indices into ``reference`` of the k nearest rows for each of ``rows``.

    Distance ties go to the lower reference row position.
    """
    anchors = config.anchor_attributes
    A, categorical = _anchor_block(matrix, anchors)
    B, _ = _anchor_block(reference, anchors)
    scales = anchor_scales(reference, anchors)
    n_ref = B.shape[0]
    k = min(int(config.k), n_ref - 1 if exclude_self else n_ref)
    if k < 1:
        raise ValueError("not enough reference rows for nearest-neighbour imputation")
    out = np.empty((len(rows), k), dtype=np.int64)
    for lo in range(0, len(rows), 512):
        chunk = rows[lo:lo + 512]
        d = pairwise_distances(A[chunk], B, categorical, scales)
        if exclude_self:
            d[np.arange(len(chunk)), chunk] = np.inf
        out[lo:lo + 512] = np.argsort(d, axis=1, kind="stable")[:, :k]
    return out


def knn_impute(matrix: FeatureMatrix, config: ImputeConfig | None = None,
               reference: FeatureMatrix | None = None) -> FeatureMatrix:
    """Fill missing cells from the k nearest reference rows by anchor distance.

    Numeric cells take the neighbours' mean over those that observe the
    column, categorical cells their majority class.  When no neighbour
    observes the column the reference column mean or mode is used.  Without a
    reference the matrix is its own reference and a row is never its own
    neighbour.  Neighbours are always read from the unimputed reference.
    """
    config = config or ImputeConfig()
    exclude_self = reference is None
    ref = matrix if reference is None else reference
    _check_schema(matrix, ref)
    rows = np.flatnonzero(matrix.missing.any(axis=1))
    if rows.size == 0:
        return matrix
    neighbors = nearest_neighbors(matrix, ref, config, rows, exclude_self)
    values = matrix.values.copy()
    for j, col in enumerate(matrix.columns):
        target = np.flatnonzero(matrix.missing[rows, j])
        if target.size == 0:
            continue
        nb = neighbors[target]
        observed = ~ref.missing[nb, j]
        nb_values = ref.values[nb, j]
        for t, r in enumerate(rows[target]):
            vals = nb_values[t][observed[t]]
            if vals.size == 0:
                values[r, j] = _fill_value(ref, j)
            elif col.is_categorical:
                values[r, j] = _mode(vals, len(col.categories))
            else:
                values[r, j] = float(np.mean(vals))
    return matrix.replace(values, np.zeros_like(matrix.missing))


def impute(matrix: FeatureMatrix, config: ImputeConfig, reference: FeatureMatrix | None = None) -> FeatureMatrix:
    if config.method == "MI":
        return mean_impute(matrix, reference)
    return knn_impute(matrix, config, reference)
