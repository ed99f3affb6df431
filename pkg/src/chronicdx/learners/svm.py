from __future__ import annotations

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit

from ._kernels import pegasos_epochs
from .neighbors import standardize_fit


def platt_fit(margin: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Fit P(y=1 | m) = sigmoid(a*m + b) with Platt's smoothed targets."""
    spread = float(np.std(margin)) or 1.0
    margin = margin / spread
    n_pos = float((y == 1).sum())
    n_neg = float(len(y) - n_pos)
    t = np.where(y == 1, (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0))

    def nll(params):
        a, b = params
        z = a * margin + b
        loss = np.sum(np.logaddexp(0.0, z) - t * z)
        p = expit(z)
        r = p - t
        return loss, np.array([np.sum(r * margin), np.sum(r)])

    prior = np.log((n_neg + 1.0) / (n_pos + 1.0))
    res = minimize(nll, x0=np.array([1.0, -prior]), jac=True, method="L-BFGS-B")
    a, b = res.x
    return float(a) / spread, float(b)


class LinearSVM:
    """Soft-margin linear SVM trained by stochastic hinge-loss subgradients.

    Features are standardized.  More than two classes train one-vs-rest
    machines; scores are Platt-calibrated sigmoids of the margins.
    """

    def __init__(self, C=1.0, max_epochs=200, tolerance=1e-4, seed=0):
        self.C = float(C)
        self.max_epochs = int(max_epochs)
        self.tolerance = float(tolerance)
        self.seed = int(seed)

    def _train_binary(self, Z: np.ndarray, s: np.ndarray, k: int) -> np.ndarray:
        n = Z.shape[0]
        lam = 1.0 / (self.C * n)
        ss = np.random.SeedSequence([self.seed, k])
        order_seed = int(ss.generate_state(1)[0] % (2**31 - 1))
        w, epochs = pegasos_epochs(Z, s, lam, self.max_epochs, self.tolerance, order_seed, np.zeros(Z.shape[1]))
        return w

    def fit(self, X: np.ndarray, y: np.ndarray, n_classes: int) -> "LinearSVM":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=np.int64)
        self.mean_, self.scale_ = standardize_fit(X)
        Z = self._augment(X)
        targets = [1] if n_classes == 2 else list(range(n_classes))
        W, A, B = [], [], []
        for k in targets:
            s = np.where(y == k, 1.0, -1.0)
            w = self._train_binary(Z, s, k)
            a, b = platt_fit(Z @ w, (y == k).astype(int))
            W.append(w)
            A.append(a)
            B.append(b)
        self.coef_ = np.asarray(W)
        self.platt_ = np.column_stack([A, B])
        self.n_classes_ = n_classes
        return self

    def _augment(self, X: np.ndarray) -> np.ndarray:
        Z = (X - self.mean_) / self.scale_
        return np.ascontiguousarray(np.hstack([Z, np.ones((Z.shape[0], 1))]))

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        return self._augment(np.asarray(X, dtype=float)) @ self.coef_.T

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        m = self.decision_function(X)
        p = expit(self.platt_[:, 0] * m + self.platt_[:, 1])
        if self.n_classes_ == 2:
            return np.column_stack([1.0 - p[:, 0], p[:, 0]])
        total = p.sum(axis=1, keepdims=True)
        total[total == 0] = 1.0
        return p / total

    def get_state(self) -> dict:
        return {
            "mean": self.mean_.tolist(),
            "scale": self.scale_.tolist(),
            "coef": self.coef_.tolist(),
            "platt": self.platt_.tolist(),
            "n_classes": self.n_classes_,
        }

    def set_state(self, state: dict) -> "LinearSVM":
        self.mean_ = np.asarray(state["mean"], dtype=float)
        self.scale_ = np.asarray(state["scale"], dtype=float)
        self.coef_ = np.asarray(state["coef"], dtype=float).reshape(-1, len(self.mean_) + 1)
        self.platt_ = np.asarray(state["platt"], dtype=float).reshape(-1, 2)
        self.n_classes_ = int(state["n_classes"])
        return self
