"""Shapley attributions of per-class model scores against a background set.

Players are feature groups: by default one per column, or the one-hot
columns of a categorical attribute moving together.  The coalition value of
a set S is the model score averaged over the background with the columns in
S taken from the explained instance and the rest from each background row.
"""
from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

ScoreFn = Callable[[np.ndarray], np.ndarray]

# rows per model call when building coalition matrices
_CHUNK_ROWS = 200_000


@dataclass(frozen=True)
class ShapleyValues:
    features: tuple[str, ...]
    classes: tuple
    values: np.ndarray  # (instances, features, classes)
    base: np.ndarray  # (classes,)
    scores: np.ndarray  # (instances, classes): model output for each instance

    def efficiency_gap(self) -> float:
        """Largest |base + Σ attributions − score| over instances and classes."""
        recon = self.base[None, :] + self.values.sum(axis=1)
        return float(np.max(np.abs(recon - self.scores))) if self.scores.size else 0.0


def _groups(n_columns: int, groups: Sequence[Sequence[int]] | None) -> list[np.ndarray]:
    if groups is None:
        return [np.array([j]) for j in range(n_columns)]
    out = [np.asarray(g, dtype=np.int64) for g in groups]
    flat = np.sort(np.concatenate(out)) if out else np.zeros(0, dtype=np.int64)
    if not np.array_equal(flat, np.arange(n_columns)):
        raise ValueError("feature groups must partition the columns")
    return out


def _column_owner(n_columns: int, groups: list[np.ndarray]) -> np.ndarray:
    owner = np.empty(n_columns, dtype=np.int64)
    for g, cols in enumerate(groups):
        owner[cols] = g
    return owner


def _score_chunks(score_fn: ScoreFn, X: np.ndarray) -> np.ndarray:
    parts = [score_fn(X[lo:lo + _CHUNK_ROWS]) for lo in range(0, X.shape[0], _CHUNK_ROWS)]
    return np.concatenate(parts, axis=0)


def _names(n: int, names: Sequence[str] | None) -> tuple[str, ...]:
    if names is None:
        return tuple(f"f{j}" for j in range(n))
    if len(names) != n:
        raise ValueError(f"{len(names)} feature names for {n} players")
    return tuple(names)


def _check_background(background: np.ndarray) -> np.ndarray:
    background = np.atleast_2d(np.asarray(background, dtype=float))
    if background.shape[0] == 0:
        raise ValueError("background set is empty")
    return background


def shapley_exact(score_fn: ScoreFn, instances: np.ndarray, background: np.ndarray,
                  groups: Sequence[Sequence[int]] | None = None, feature_names: Sequence[str] | None = None,
                  classes: Sequence | None = None, max_features: int = 15) -> ShapleyValues:
    """Exact Shapley values by enumerating all coalitions of the players."""
    instances = np.atleast_2d(np.asarray(instances, dtype=float))
    background = _check_background(background)
    d = background.shape[1]
    players = _groups(d, groups)
    M = len(players)
    if M > max_features:
        raise ValueError(f"{M} features exceed the exact limit of {max_features}; use shapley_sampling")
    owner = _column_owner(d, players)
    masks = np.arange(1 << M, dtype=np.int64)
    # in_coalition[s, j]: column j comes from the instance under coalition s
    in_coalition = ((masks[:, None] >> owner[None, :]) & 1).astype(bool)
    sizes = np.array([bin(int(s)).count("1") for s in masks])
    weight = np.array([math.factorial(k) * math.factorial(M - k - 1) / math.factorial(M) for k in range(M)])
    B = background.shape[0]
    base = _score_chunks(score_fn, background).mean(axis=0)
    C = base.shape[0]
    values = np.zeros((instances.shape[0], M, C))
    scores = np.zeros((instances.shape[0], C))
    for i, x in enumerate(instances):
        v = np.empty((1 << M, C))
        per_chunk = max(1, _CHUNK_ROWS // B)
        for lo in range(0, 1 << M, per_chunk):
            m = in_coalition[lo:lo + per_chunk]
            X = np.where(m[:, None, :], x[None, None, :], background[None, :, :]).reshape(-1, d)
            v[lo:lo + per_chunk] = score_fn(X).reshape(m.shape[0], B, C).mean(axis=1)
        for j in range(M):
            without = masks[(masks >> j) & 1 == 0]
            values[i, j] = (weight[sizes[without]][:, None] * (v[without | (1 << j)] - v[without])).sum(axis=0)
        scores[i] = v[-1]
    return ShapleyValues(_names(M, feature_names), tuple(classes) if classes is not None else tuple(range(C)),
                         values, base, scores)


def sample_plan(n_players: int, n_background: int, n_permutations: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Permutations and background picks; draw p comes from its own (seed, p) stream."""
    perms = np.empty((n_permutations, n_players), dtype=np.int64)
    picks = np.empty(n_permutations, dtype=np.int64)
    for p in range(n_permutations):
        rng = np.random.default_rng(np.random.SeedSequence([seed, p]))
        perms[p] = rng.permutation(n_players)
        picks[p] = rng.integers(n_background)
    return perms, picks


def shapley_sampling(score_fn: ScoreFn, instances: np.ndarray, background: np.ndarray, n_permutations: int,
                     seed: int, groups: Sequence[Sequence[int]] | None = None,
                     feature_names: Sequence[str] | None = None, classes: Sequence | None = None) -> ShapleyValues:
    """Monte-Carlo Shapley values from random player orderings.

    Each draw pairs one ordering with one background row and walks the
    ordering, switching players from the background row to the instance.
    The averaged marginal contributions are shifted equally so that base plus
    attributions reproduces the model score.
    """
    if n_permutations < 1:
        raise ValueError("n_permutations must be >= 1")
    instances = np.atleast_2d(np.asarray(instances, dtype=float))
    background = _check_background(background)
    d = background.shape[1]
    players = _groups(d, groups)
    M = len(players)
    owner = _column_owner(d, players)
    perms, picks = sample_plan(M, background.shape[0], n_permutations, seed)
    position = np.argsort(perms, axis=1)  # position[p, g]: step at which player g switches
    # column j is taken from the instance from step position[p, owner[j]] + 1 onwards
    switch = position[:, owner]  # (P, d)
    steps = np.arange(M + 1)
    from_instance = steps[None, :, None] > switch[:, None, :]  # (P, M+1, d)
    bg_rows = background[picks]  # (P, d)
    base = _score_chunks(score_fn, background).mean(axis=0)
    C = base.shape[0]
    values = np.zeros((instances.shape[0], M, C))
    scores = _score_chunks(score_fn, instances) if instances.shape[0] else np.zeros((0, C))
    rows_per_instance = n_permutations * (M + 1)
    batch = max(1, _CHUNK_ROWS // rows_per_instance)
    p_idx = np.arange(n_permutations)[:, None]
    for lo in range(0, instances.shape[0], batch):
        xs = instances[lo:lo + batch]
        X = np.where(from_instance[None], xs[:, None, None, :], bg_rows[None, :, None, :])
        out = score_fn(X.reshape(-1, d)).reshape(len(xs), n_permutations, M + 1, C)
        delta = np.diff(out, axis=2)  # contribution of perms[p, t]
        for b in range(len(xs)):
            # contribution of player g in draw p sits at step position[p, g]
            values[lo + b] = delta[b][p_idx, position].mean(axis=0)
    gap = scores - base[None, :] - values.sum(axis=1)
    values += gap[:, None, :] / M
    return ShapleyValues(_names(M, feature_names), tuple(classes) if classes is not None else tuple(range(C)),
                         values, base, scores)


def background_sample(X: np.ndarray, size: int, seed: int) -> np.ndarray:
    """Rows for the background set, drawn without replacement; clamped to the available rows."""
    n = X.shape[0]
    if size > n:
        warnings.warn(f"background size {size} exceeds {n} available rows; using all rows", stacklevel=2)
        size = n
    rng = np.random.default_rng(np.random.SeedSequence([seed, 7]))
    return np.sort(rng.choice(n, size=size, replace=False))


@dataclass(frozen=True)
class ShapleyReport:
    features: tuple[str, ...]
    classes: tuple
    mean_abs: np.ndarray  # (features, classes)
    rankings: dict  # class -> tuple of features, most important first
    values: np.ndarray  # (instances, features, classes), for distribution plots
    feature_values: np.ndarray | None = None  # (instances, features), optional colouring data

    def top(self, cls, n: int = 10) -> tuple[str, ...]:
        return self.rankings[cls][:n]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("feature", "class", "mean_abs_value", "rank"))
        for c_idx, cls in enumerate(self.classes):
            order = self.rankings[cls]
            for rank, name in enumerate(order, start=1):
                j = self.features.index(name)
                w.writerow((name, cls, repr(float(self.mean_abs[j, c_idx])), rank))
        return buf.getvalue()


def summarize(sv: ShapleyValues, feature_values: np.ndarray | None = None) -> ShapleyReport:
    """Rank features per class by mean |attribution|; ties keep schema order."""
    if sv.values.shape[0] == 0:
        raise ValueError("no attributions to summarize")
    mean_abs = np.abs(sv.values).mean(axis=0)
    rankings = {}
    for c_idx, cls in enumerate(sv.classes):
        order = np.argsort(-mean_abs[:, c_idx], kind="stable")
        rankings[cls] = tuple(sv.features[j] for j in order)
    return ShapleyReport(sv.features, sv.classes, mean_abs, rankings, sv.values, feature_values)


def overall_ranking(report: ShapleyReport) -> tuple[str, ...]:
    """Features by mean |attribution| summed over classes (ties keep schema order)."""
    total = report.mean_abs.sum(axis=1)
    return tuple(report.features[j] for j in np.argsort(-total, kind="stable"))
