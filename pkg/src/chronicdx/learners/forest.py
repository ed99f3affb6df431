from __future__ import annotations

import math

import numpy as np

from ._kernels import apply_forest, bin_codes, grow_gini_tree, make_thresholds


def _max_features(setting, n_features: int) -> int:
    if setting in (None, "all"):
        return n_features
    if setting == "sqrt":
        return max(1, int(math.sqrt(n_features)))
    if setting == "log2":
        return max(1, int(math.log2(n_features)))
    if isinstance(setting, float) and 0 < setting <= 1:
        return max(1, int(setting * n_features))
    return max(1, min(int(setting), n_features))


def tree_seeds(seed: int, n_trees: int) -> list[np.random.Generator]:
    """One independent generator per tree, derived from (seed, tree index)."""
    return [np.random.default_rng(np.random.SeedSequence([seed, t])) for t in range(n_trees)]


class RandomForest:
    """Bagged Gini trees with random feature subsets; predicts by majority vote."""

    def __init__(self, n_trees=100, max_depth=None, min_leaf=1, features_per_split="sqrt",
                 bootstrap=True, max_bins=256, seed=0):
        self.n_trees = int(n_trees)
        self.max_depth = max_depth
        self.min_leaf = int(min_leaf)
        self.features_per_split = features_per_split
        self.bootstrap = bool(bootstrap)
        self.max_bins = int(max_bins)
        self.seed = int(seed)

    def fit(self, X: np.ndarray, y: np.ndarray, n_classes: int) -> "RandomForest":
        X = np.ascontiguousarray(X, dtype=float)
        n, F = X.shape
        table, n_thr = make_thresholds(X, self.max_bins)
        codes = bin_codes(X, table, n_thr)
        m = _max_features(self.features_per_split, F)
        depth = -1 if self.max_depth is None else int(self.max_depth)
        y = np.asarray(y, dtype=np.int64)

        feats, thrs, lefts, rights, values, roots = [], [], [], [], [], []
        offset = 0
        for rng in tree_seeds(self.seed, self.n_trees):
            if self.bootstrap:
                w = np.bincount(rng.integers(0, n, n), minlength=n).astype(float)
            else:
                w = np.ones(n)
            kseed = int(rng.integers(0, 2**31 - 1))
            f, s, l, r, v = grow_gini_tree(codes, n_thr, y, w, n_classes, depth, self.min_leaf, m, kseed)
            thr = np.where(f >= 0, table[np.maximum(f, 0), s], 0.0)
            feats.append(f)
            thrs.append(thr)
            lefts.append(np.where(l >= 0, l + offset, -1))
            rights.append(np.where(r >= 0, r + offset, -1))
            values.append(v)
            roots.append(offset)
            offset += len(f)
        self.feature_ = np.concatenate(feats)
        self.threshold_ = np.concatenate(thrs)
        self.left_ = np.concatenate(lefts)
        self.right_ = np.concatenate(rights)
        self.value_ = np.vstack(values)
        self.roots_ = np.asarray(roots, dtype=np.int64)
        self.n_classes_ = n_classes
        return self

    def votes(self, X: np.ndarray) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=float)
        leaves = apply_forest(X, self.feature_, self.threshold_, self.left_, self.right_, self.roots_)
        # ties inside a leaf resolve to the lowest class index
        leaf_class = np.argmax(self.value_, axis=1)
        picks = leaf_class[leaves]
        counts = np.zeros((X.shape[0], self.n_classes_))
        for c in range(self.n_classes_):
            counts[:, c] = (picks == c).sum(axis=1)
        return counts

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return self.votes(X) / len(self.roots_)

    def get_state(self) -> dict:
        return {
            "feature": self.feature_.tolist(),
            "threshold": self.threshold_.tolist(),
            "left": self.left_.tolist(),
            "right": self.right_.tolist(),
            "value": self.value_.tolist(),
            "roots": self.roots_.tolist(),
            "n_classes": self.n_classes_,
        }

    def set_state(self, state: dict) -> "RandomForest":
        self.feature_ = np.asarray(state["feature"], dtype=np.int64)
        self.threshold_ = np.asarray(state["threshold"], dtype=float)
        self.left_ = np.asarray(state["left"], dtype=np.int64)
        self.right_ = np.asarray(state["right"], dtype=np.int64)
        self.value_ = np.asarray(state["value"], dtype=float).reshape(len(self.feature_), -1)
        self.roots_ = np.asarray(state["roots"], dtype=np.int64)
        self.n_classes_ = int(state["n_classes"])
        return self

    def used_features(self) -> set[int]:
        return {int(f) for f in self.feature_ if f >= 0}
