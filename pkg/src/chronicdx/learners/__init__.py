"""Uniform fit/predict interface over the four classifiers."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from ..domain import LabelVector, schema_fingerprint
from ..features import EncodedMatrix
from .boosting import GradientBoosting
from .forest import RandomForest
from .neighbors import KNeighbors
from .svm import LinearSVM

MODEL_FORMAT_VERSION = 1

ESTIMATORS = {
    "RF": RandomForest,
    "GBT": GradientBoosting,
    "KNN": KNeighbors,
    "SVM": LinearSVM,
}

DEFAULT_HYPERPARAMETERS = {
    "RF": {"n_trees": 100, "max_depth": None, "min_leaf": 1, "features_per_split": "sqrt"},
    "GBT": {"n_rounds": 100, "learning_rate": 0.3, "max_depth": 6, "l2_leaf_penalty": 1.0, "min_split_gain": 0.0},
    "KNN": {"k": 5, "standardize": True},
    "SVM": {"C": 1.0, "max_epochs": 200, "tolerance": 1e-4},
}

DEFAULT_GRIDS = {
    "RF": {"n_trees": [100, 300], "max_depth": [4, 8, None]},
    "GBT": {"n_rounds": [100, 300], "learning_rate": [0.1, 0.3], "max_depth": [3, 6]},
    "KNN": {"k": [5, 11, 21]},
    "SVM": {"C": [0.1, 1.0, 10.0]},
}

_COUNT_PARAMS = {"n_trees", "min_leaf", "n_rounds", "k", "max_epochs"}


class SchemaMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class ClassifierSpec:
    kind: str
    hyperparameters: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ESTIMATORS:
            raise ValueError(f"unknown classifier kind {self.kind!r}; expected one of {sorted(ESTIMATORS)}")
        params = {**DEFAULT_HYPERPARAMETERS[self.kind], **self.hyperparameters}
        for name, v in params.items():
            if name in _COUNT_PARAMS and (v is None or int(v) < 1):
                raise ValueError(f"{self.kind} {name} must be >= 1, got {v!r}")
        for name in ("learning_rate", "C"):
            if name in params and not float(params[name]) > 0:
                raise ValueError(f"{self.kind} {name} must be > 0, got {params[name]!r}")
        object.__setattr__(self, "hyperparameters", params)

    def build(self):
        return ESTIMATORS[self.kind](**self.hyperparameters, seed=self.seed)

    def with_params(self, **params) -> "ClassifierSpec":
        return ClassifierSpec(self.kind, {**self.hyperparameters, **params}, self.seed)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "hyperparameters": dict(self.hyperparameters), "seed": self.seed}


@dataclass(eq=False)
class TrainedModel:
    spec: ClassifierSpec
    classes: tuple
    columns: tuple[str, ...]
    estimator: Any

    @property
    def fingerprint(self) -> str:
        return schema_fingerprint(self.columns)

    def to_dict(self) -> dict:
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "spec": self.spec.to_dict(),
            "classes": list(self.classes),
            "columns": list(self.columns),
            "fingerprint": self.fingerprint,
            "state": self.estimator.get_state(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "TrainedModel":
        version = doc.get("format_version")
        if version != MODEL_FORMAT_VERSION:
            raise ValueError(f"unsupported model format version {version!r}")
        spec = ClassifierSpec(doc["spec"]["kind"], doc["spec"]["hyperparameters"], doc["spec"]["seed"])
        model = cls(spec, tuple(doc["classes"]), tuple(doc["columns"]), spec.build().set_state(doc["state"]))
        if model.fingerprint != doc["fingerprint"]:
            raise SchemaMismatchError("stored fingerprint does not match stored columns")
        return model

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> "TrainedModel":
        return cls.from_dict(json.loads(text))


def _design(X, columns=None) -> tuple[np.ndarray, tuple[str, ...]]:
    if isinstance(X, EncodedMatrix):
        if X.missing.any():
            raise ValueError("learners need a fully imputed matrix; found missing cells")
        return np.asarray(X.values, dtype=float), X.columns
    arr = np.asarray(X, dtype=float)
    if arr.ndim != 2:
        raise ValueError("X must be two-dimensional")
    if columns is None:
        columns = tuple(f"x{j}" for j in range(arr.shape[1]))
    return arr, tuple(columns)


def _labels(y) -> np.ndarray:
    if isinstance(y, LabelVector):
        return y.as_array()
    return np.asarray([v.item() if isinstance(v, np.generic) else v for v in y], dtype=object)


def fit(spec: ClassifierSpec, X, y, columns: Sequence[str] | None = None) -> TrainedModel:
    """Fit ``spec`` on a fully imputed design matrix and its labels."""
    arr, cols = _design(X, columns)
    labels = _labels(y)
    if len(labels) != arr.shape[0]:
        raise ValueError(f"{len(labels)} labels for {arr.shape[0]} rows")
    classes = tuple(sorted(set(labels.tolist()), key=str))
    if len(classes) < 2:
        raise ValueError("single class in training labels; need at least two")
    index = {c: i for i, c in enumerate(classes)}
    codes = np.array([index[v] for v in labels], dtype=np.int64)
    est = spec.build().fit(arr, codes, len(classes))
    return TrainedModel(spec, classes, cols, est)


def _check(model: TrainedModel, X, columns) -> np.ndarray:
    arr, cols = _design(X, columns if columns is not None else (None if isinstance(X, EncodedMatrix) else model.columns))
    if arr.shape[1] != len(cols):
        raise SchemaMismatchError(f"{arr.shape[1]} feature columns, training schema has {len(model.columns)}")
    if schema_fingerprint(cols) != model.fingerprint:
        raise SchemaMismatchError(
            f"feature schema {schema_fingerprint(cols)} does not match training schema {model.fingerprint}"
        )
    return arr


def predict_proba(model: TrainedModel, X, columns: Sequence[str] | None = None) -> np.ndarray:
    arr = _check(model, X, columns)
    if arr.shape[0] == 0:
        return np.zeros((0, len(model.classes)))
    return model.estimator.predict_proba(arr)


def predict(model: TrainedModel, X, columns: Sequence[str] | None = None) -> list:
    proba = predict_proba(model, X, columns)
    return [model.classes[i] for i in np.argmax(proba, axis=1)]


__all__ = [
    "ClassifierSpec",
    "TrainedModel",
    "SchemaMismatchError",
    "DEFAULT_GRIDS",
    "DEFAULT_HYPERPARAMETERS",
    "fit",
    "predict",
    "predict_proba",
]
