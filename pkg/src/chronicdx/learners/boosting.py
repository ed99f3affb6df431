from __future__ import annotations

import numpy as np
from scipy.special import expit

from ._kernels import bin_codes, grow_newton_tree, make_thresholds, sum_tree_values


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_cross_entropy(logits: np.ndarray, onehot: np.ndarray) -> float:
    """Summed multinomial log-loss of logits against one-hot targets."""
    z = logits - logits.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=1))
    return float(np.sum(logsum - (z * onehot).sum(axis=1)))


def softmax_grad_hess(logits: np.ndarray, onehot: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Gradient and diagonal Hessian of the summed cross-entropy w.r.t. each logit."""
    p = softmax(logits)
    return p - onehot, p * (1.0 - p)


_sigmoid = expit


def logistic_loss(margin: np.ndarray, y: np.ndarray) -> float:
    return float(np.sum(np.logaddexp(0.0, margin) - y * margin))


def logistic_grad_hess(margin: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    p = _sigmoid(margin)
    return p - y, p * (1.0 - p)


class GradientBoosting:
    """Additive second-order regression trees on the cross-entropy loss.

    Two classes use a single logit (logistic loss); more classes grow one
    tree per class per round on the softmax loss.
    """

    def __init__(self, n_rounds=100, learning_rate=0.3, max_depth=6, l2_leaf_penalty=1.0,
                 min_split_gain=0.0, min_child_weight=1.0, max_bins=256, seed=0):
        self.n_rounds = int(n_rounds)
        self.learning_rate = float(learning_rate)
        self.max_depth = max_depth
        self.l2_leaf_penalty = float(l2_leaf_penalty)
        self.min_split_gain = float(min_split_gain)
        self.min_child_weight = float(min_child_weight)
        self.max_bins = int(max_bins)
        self.seed = int(seed)

    def fit(self, X: np.ndarray, y: np.ndarray, n_classes: int) -> "GradientBoosting":
        X = np.ascontiguousarray(X, dtype=float)
        n = X.shape[0]
        y = np.asarray(y, dtype=np.int64)
        table, n_thr = make_thresholds(X, self.max_bins)
        codes = bin_codes(X, table, n_thr)
        depth = -1 if self.max_depth is None else int(self.max_depth)
        K = 1 if n_classes == 2 else n_classes
        onehot = np.eye(n_classes)[y]
        prior = np.clip(onehot.mean(axis=0), 1e-6, 1.0)
        if K == 1:
            base = np.array([np.log(prior[1] / prior[0])])
            target = onehot[:, 1]
        else:
            base = np.log(prior)
            target = onehot
        F = np.tile(base, (n, 1))

        feats, thrs, lefts, rights, values, roots, outs = [], [], [], [], [], [], []
        offset = 0
        losses = [self._loss(F, target)]
        for _ in range(self.n_rounds):
            if K == 1:
                g, h = logistic_grad_hess(F[:, 0], target)
                g, h = g[:, None], h[:, None]
            else:
                g, h = softmax_grad_hess(F, target)
            step = np.zeros_like(F)
            for k in range(K):
                f, s, l, r, v = grow_newton_tree(
                    codes, n_thr, np.ascontiguousarray(g[:, k]), np.ascontiguousarray(h[:, k]),
                    depth, self.l2_leaf_penalty, self.min_split_gain, self.min_child_weight,
                )
                v = v * self.learning_rate
                step[:, k] = self._training_leaf_values(codes, f, s, l, r, v)
                feats.append(f)
                thrs.append(np.where(f >= 0, table[np.maximum(f, 0), s], 0.0))
                lefts.append(np.where(l >= 0, l + offset, -1))
                rights.append(np.where(r >= 0, r + offset, -1))
                values.append(v)
                roots.append(offset)
                outs.append(k)
                offset += len(f)
            F = F + step
            losses.append(self._loss(F, target))

        self.base_score_ = base
        self.feature_ = np.concatenate(feats) if feats else np.zeros(0, dtype=np.int64)
        self.threshold_ = np.concatenate(thrs) if thrs else np.zeros(0)
        self.left_ = np.concatenate(lefts) if lefts else np.zeros(0, dtype=np.int64)
        self.right_ = np.concatenate(rights) if rights else np.zeros(0, dtype=np.int64)
        self.value_ = np.concatenate(values) if values else np.zeros(0)
        self.roots_ = np.asarray(roots, dtype=np.int64)
        self.tree_output_ = np.asarray(outs, dtype=np.int64)
        self.n_classes_ = n_classes
        self.loss_curve_ = np.asarray(losses)
        return self

    @staticmethod
    def _loss(F, target):
        if F.shape[1] == 1:
            return logistic_loss(F[:, 0], target)
        return softmax_cross_entropy(F, target)

    @staticmethod
    def _training_leaf_values(codes, feature, split_bin, left, right, value):
        node = np.zeros(codes.shape[0], dtype=np.int64)
        active = feature[node] >= 0
        while active.any():
            rows = np.flatnonzero(active)
            nd = node[rows]
            go_left = codes[rows, feature[nd]] <= split_bin[nd]
            node[rows] = np.where(go_left, left[nd], right[nd])
            active = feature[node] >= 0
        return value[node]

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=float)
        K = len(self.base_score_)
        raw = sum_tree_values(X, self.feature_, self.threshold_, self.left_, self.right_,
                              self.roots_, self.tree_output_, self.value_, K)
        return raw + self.base_score_

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        F = self.decision_function(X)
        if F.shape[1] == 1:
            p = _sigmoid(F[:, 0])
            return np.column_stack([1.0 - p, p])
        return softmax(F)

    def get_state(self) -> dict:
        return {
            "base_score": self.base_score_.tolist(),
            "feature": self.feature_.tolist(),
            "threshold": self.threshold_.tolist(),
            "left": self.left_.tolist(),
            "right": self.right_.tolist(),
            "value": self.value_.tolist(),
            "roots": self.roots_.tolist(),
            "tree_output": self.tree_output_.tolist(),
            "n_classes": self.n_classes_,
        }

    def set_state(self, state: dict) -> "GradientBoosting":
        self.base_score_ = np.asarray(state["base_score"], dtype=float)
        self.feature_ = np.asarray(state["feature"], dtype=np.int64)
        self.threshold_ = np.asarray(state["threshold"], dtype=float)
        self.left_ = np.asarray(state["left"], dtype=np.int64)
        self.right_ = np.asarray(state["right"], dtype=np.int64)
        self.value_ = np.asarray(state["value"], dtype=float)
        self.roots_ = np.asarray(state["roots"], dtype=np.int64)
        self.tree_output_ = np.asarray(state["tree_output"], dtype=np.int64)
        self.n_classes_ = int(state["n_classes"])
        return self

    def used_features(self) -> set[int]:
        return {int(f) for f in self.feature_ if f >= 0}
