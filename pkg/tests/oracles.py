"""Slow, straight-line reference implementations used as test oracles."""
from __future__ import annotations

import itertools
import math

import numpy as np

from chronicdx.domain import Column, FeatureMatrix
from chronicdx.features import FEATURE_COLUMNS

_BY_NAME = {c.name: c for c in FEATURE_COLUMNS}
ANCHORS = ("Age", "Gender", "Ethnicity", "BMI")


def random_matrix(rng: np.random.Generator, n: int, miss_rate: float) -> FeatureMatrix:
    """Anchors complete, other columns missing at ``miss_rate``; coarse values so ties occur."""
    cols = [_BY_NAME["Gender"], _BY_NAME["Age"], _BY_NAME["Ethnicity"], _BY_NAME["BMI"], _BY_NAME["Smoking"],
            Column("X1", "numeric"), Column("X2", "numeric"), Column("X3", "numeric")]
    values = np.column_stack([
        rng.integers(0, 2, n), rng.integers(30, 40, n), rng.integers(0, 6, n), rng.choice([22.0, 25.5, 31.0], n),
        rng.integers(0, 3, n), rng.normal(0, 1, n).round(2), rng.integers(0, 5, n), rng.normal(100, 20, n),
    ]).astype(float)
    missing = np.zeros((n, len(cols)), dtype=bool)
    missing[:, 4:] = rng.random((n, 4)) < miss_rate
    for j in range(4, len(cols)):
        if missing[:, j].all():
            missing[rng.integers(n), j] = False
    return FeatureMatrix(cols, values, missing, tuple(f"r{i}" for i in range(n)))


def brute_force_neighbor_order(m: FeatureMatrix, anchors=ANCHORS) -> dict[int, list[int]]:
    """For every row with a missing cell, all other rows sorted by (distance, position)."""
    n = m.shape[0]
    names = m.names
    a_idx = [names.index(a) for a in anchors]
    cat = [m.columns[j].is_categorical for j in a_idx]
    scale = [float(np.std(m.values[:, j])) for j in a_idx]
    order = {}
    for r in range(n):
        if not m.missing[r].any():
            continue
        dist = []
        for q in range(n):
            if q == r:
                continue
            d2 = 0.0
            for j, c, s in zip(a_idx, cat, scale):
                a, b = m.values[r, j], m.values[q, j]
                if c:
                    d2 += 0.0 if a == b else 1.0
                elif s > 0:
                    t = (a - b) / s
                    d2 += t * t
            dist.append((math.sqrt(d2), q))
        dist.sort()
        order[r] = [q for _, q in dist]
    return order


def brute_force_knn_impute(m: FeatureMatrix, k: int, anchors=ANCHORS, order=None) -> np.ndarray:
    """O(n^2) neighbor search with the declared metric; returns the imputed value array."""
    order = order if order is not None else brute_force_neighbor_order(m, anchors)
    n = m.shape[0]
    out = m.values.copy()
    for r, ranked in order.items():
        nbrs = ranked[: min(k, n - 1)]
        for j in np.flatnonzero(m.missing[r]):
            col = m.columns[j]
            vals = [m.values[q, j] for q in nbrs if not m.missing[q, j]]
            if not vals:
                vals = [m.values[q, j] for q in range(n) if not m.missing[q, j]]
                if not col.is_categorical:
                    out[r, j] = float(np.mean(vals))
                    continue
            if col.is_categorical:
                counts = [vals.count(float(c)) for c in range(len(col.categories))]
                out[r, j] = float(counts.index(max(counts)))
            else:
                out[r, j] = float(np.mean(vals))
    return out


def confusion_metrics(y_true, y_pred, positive, labels):
    """Accuracy, F1, recall, precision, TPR, TNR from explicit confusion counts.

    Two-class tasks use the positive class; multi-class tasks use
    support-weighted averages over ``labels``.  TPR/TNR always treat
    ``positive`` against the rest.  Undefined ratios are 0.
    """
    def ratio(a, b):
        return a / b if b else 0.0

    n = len(y_true)
    acc = ratio(sum(t == p for t, p in zip(y_true, y_pred)), n)

    def per_class(c):
        tp = sum(t == c and p == c for t, p in zip(y_true, y_pred))
        fp = sum(t != c and p == c for t, p in zip(y_true, y_pred))
        fn = sum(t == c and p != c for t, p in zip(y_true, y_pred))
        tn = n - tp - fp - fn
        prec, rec = ratio(tp, tp + fp), ratio(tp, tp + fn)
        return prec, rec, ratio(2 * prec * rec, prec + rec), ratio(tn, tn + fp), tp + fn

    if len(labels) <= 2:
        prec, rec, f1, _, _ = per_class(positive)
    else:
        prec = rec = f1 = 0.0
        for c in labels:
            p_, r_, f_, _, support = per_class(c)
            prec, rec, f1 = prec + support * p_, rec + support * r_, f1 + support * f_
        prec, rec, f1 = prec / n, rec / n, f1 / n
    _, tpr, _, tnr, _ = per_class(positive)
    return acc, f1, rec, prec, tpr, tnr


def brute_force_rule(readings, sbp=140.0, dbp=90.0) -> bool:
    """Some pair of readings on different days both exceed 140 systolic, or some pair both exceed 90 diastolic."""
    pairs = list(itertools.combinations(readings, 2))
    sys_pair = any(a[0] != b[0] and a[1] > sbp and b[1] > sbp for a, b in pairs)
    dia_pair = any(a[0] != b[0] and a[2] > dbp and b[2] > dbp for a, b in pairs)
    return sys_pair or dia_pair


def shapley_enumerate(f, x, background):
    """Per-feature Shapley values by iterating over all orderings (M! terms)."""
    M = len(x)

    def value(S):
        Z = background.copy()
        Z[:, list(S)] = x[list(S)]
        return f(Z).mean(axis=0)

    phi = np.zeros((M, np.atleast_1d(value(())).shape[0]))
    perms = list(itertools.permutations(range(M)))
    for order in perms:
        S = []
        prev = value(())
        for j in order:
            S.append(j)
            cur = value(tuple(S))
            phi[j] += cur - prev
            prev = cur
    return phi / len(perms)
