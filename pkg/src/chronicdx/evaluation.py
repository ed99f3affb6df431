"""Nested stratified cross-validation, diagnosis metrics and the hypertension expert rule."""
from __future__ import annotations

import csv
import io
import itertools
import json
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .domain import DISEASE_LABELS, POSITIVE_CLASS, FeatureMatrix, LabelVector
from .features import one_hot_encode
from .impute import ImputeConfig, impute
from . import learners

SBP_THRESHOLD = 140.0
DBP_THRESHOLD = 90.0

METRIC_NAMES = ("accuracy", "f1", "recall", "precision", "tpr", "tnr")
REPORT_HEADER = ("Disease", "Model", "Imputation", "Accuracy", "F1", "Recall", "Precision", "TPR", "TNR")
EXPERT_RAW = "Expert Rule (w/o MV)"
EXPERT_IMPUTED = "Expert Rule"


# ---------------------------------------------------------------------------
# Folds


@dataclass(frozen=True)
class FoldPlan:
    k: int
    seed: int
    test_folds: tuple[tuple[int, ...], ...]

    @property
    def n_rows(self) -> int:
        return sum(len(f) for f in self.test_folds)

    def test_indices(self, fold: int) -> np.ndarray:
        return np.asarray(self.test_folds[fold], dtype=np.int64)

    def train_indices(self, fold: int) -> np.ndarray:
        held = np.zeros(self.n_rows, dtype=bool)
        held[list(self.test_folds[fold])] = True
        return np.flatnonzero(~held)


def stratified_kfold(y: Sequence, k: int, seed: int) -> FoldPlan:
    """Shuffle each class, then deal its members round-robin across the folds.

    The dealing position carries over from one class to the next (classes in
    sorted order), so fold sizes also differ by at most one.
    """
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    y = np.asarray(list(y), dtype=object)
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    folds: list[list[int]] = [[] for _ in range(k)]
    pos = 0
    for cls in sorted(set(y.tolist()), key=str):
        members = np.flatnonzero(y == cls)
        if len(members) < k:
            raise ValueError(f"class {cls!r} has {len(members)} members, fewer than k={k} folds")
        for i in rng.permutation(members):
            folds[pos % k].append(int(i))
            pos += 1
    return FoldPlan(k, seed, tuple(tuple(sorted(f)) for f in folds))


def _sub_seed(seed: int, *path: int) -> int:
    return int(np.random.SeedSequence([seed, *path]).generate_state(1)[0])


# ---------------------------------------------------------------------------
# Metrics


@dataclass(frozen=True)
class MetricSet:
    accuracy: float
    f1: float
    recall: float
    precision: float
    tpr: float
    tnr: float

    def as_tuple(self) -> tuple[float, ...]:
        return tuple(getattr(self, m) for m in METRIC_NAMES)

    @staticmethod
    def mean(sets: Sequence["MetricSet"]) -> "MetricSet":
        if not sets:
            raise ValueError("no metric sets to average")
        arr = np.array([s.as_tuple() for s in sets])
        return MetricSet(*(float(v) for v in arr.mean(axis=0)))


def _ratio(num: float, den: float) -> float:
    return num / den if den > 0 else 0.0


def _f1(p: float, r: float) -> float:
    return _ratio(2 * p * r, p + r)


def compute_metrics(y_true: Sequence, y_pred: Sequence, positive_class, labels: Sequence | None = None) -> MetricSet:
    """Six diagnosis metrics.

    With at most two classes, precision, recall and F1 are those of the
    positive class; with more, they are support-weighted averages of the
    per-class one-vs-rest values.  TPR and TNR always binarize the task as
    ``positive_class`` versus the rest.  Zero denominators yield 0.
    """
    t = list(y_true)
    p = list(y_pred)
    if len(t) != len(p):
        raise ValueError(f"length mismatch: {len(t)} true labels, {len(p)} predictions")
    if not t:
        raise ValueError("cannot score an empty prediction set")
    classes = list(labels) if labels is not None else []
    for v in itertools.chain(t, p, [positive_class]):
        if v not in classes:
            classes.append(v)
    n = len(t)
    accuracy = sum(a == b for a, b in zip(t, p)) / n

    def counts(c):
        tp = sum(a == c and b == c for a, b in zip(t, p))
        fp = sum(a != c and b == c for a, b in zip(t, p))
        fn = sum(a == c and b != c for a, b in zip(t, p))
        return tp, fp, fn, n - tp - fp - fn

    tp, fp, fn, tn = counts(positive_class)
    tpr = _ratio(tp, tp + fn)
    tnr = _ratio(tn, tn + fp)
    if len(classes) <= 2:
        precision = _ratio(tp, tp + fp)
        recall = tpr
        f1 = _f1(precision, recall)
    else:
        precision = recall = f1 = 0.0
        for c in classes:
            ctp, cfp, cfn, _ = counts(c)
            support = ctp + cfn
            if support == 0:
                continue
            cp, cr = _ratio(ctp, ctp + cfp), _ratio(ctp, ctp + cfn)
            precision += support * cp
            recall += support * cr
            f1 += support * _f1(cp, cr)
        precision, recall, f1 = precision / n, recall / n, f1 / n
    return MetricSet(accuracy, f1, recall, precision, tpr, tnr)


# ---------------------------------------------------------------------------
# Expert rule

BPObservation = tuple  # (day_index, systolic, diastolic)


def expert_rule_hypertension(bp_history: Iterable[BPObservation], mode: str = "raw",
                             systolic_threshold: float = SBP_THRESHOLD,
                             diastolic_threshold: float = DBP_THRESHOLD) -> bool:
    """Clinical hypertension rule: two or more readings on two or more distinct
    days above 140 systolic, or likewise above 90 diastolic.

    ``raw`` takes ``(day_index, systolic, diastolic)`` readings.  ``imputed``
    takes the four feature values ``(SBP_F, SBP_L, DBP_F, DBP_L)`` and treats
    the former and latter half means as two separate occasions.
    """
    if mode == "imputed":
        sbp_f, sbp_l, dbp_f, dbp_l = bp_history
        readings = [(0, sbp_f, dbp_f), (1, sbp_l, dbp_l)]
    elif mode == "raw":
        readings = list(bp_history)
    else:
        raise ValueError(f"unknown expert-rule mode {mode!r}")
    for column, limit in ((1, systolic_threshold), (2, diastolic_threshold)):
        high = [r for r in readings if r[column] > limit]
        if len(high) >= 2 and len({r[0] for r in high}) >= 2:
            return True
    return False


def expert_rule_features(matrix: FeatureMatrix, thresholds: tuple[float, float] = (SBP_THRESHOLD, DBP_THRESHOLD)) -> np.ndarray:
    """Imputed-mode expert rule for every row of an imputed feature matrix."""
    cols = [matrix.column_index(n) for n in ("SBP_F", "SBP_L", "DBP_F", "DBP_L")]
    if matrix.missing[:, cols].any():
        raise ValueError("expert rule in imputed mode needs imputed SBP/DBP half means")
    return np.array([expert_rule_hypertension(tuple(row), "imputed", *thresholds) for row in matrix.values[:, cols]],
                    dtype=bool)


# ---------------------------------------------------------------------------
# Nested cross-validation


def grid_points(grid: Mapping[str, Sequence]) -> list[dict]:
    """Cartesian product of a hyperparameter grid, in key-insertion order."""
    if not grid:
        return [{}]
    keys = list(grid)
    return [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]


class FoldData:
    """Imputes and encodes (train, target) row selections, caching each result."""

    def __init__(self, matrix: FeatureMatrix, config: ImputeConfig):
        self.matrix = matrix
        self.config = config
        self._cache: dict = {}

    def encoded(self, train: np.ndarray, target: np.ndarray | None = None):
        key = (train.tobytes(), None if target is None else target.tobytes())
        hit = self._cache.get(key)
        if hit is None:
            raw_train = self.matrix.take(train)
            if target is None:
                imputed = impute(raw_train, self.config)
            else:
                imputed = impute(self.matrix.take(target), self.config, reference=raw_train)
            hit = (imputed, one_hot_encode(imputed))
            self._cache[key] = hit
        return hit


def select_hyperparameters(spec: learners.ClassifierSpec, grid: Mapping[str, Sequence], data: FoldData,
                           rows: np.ndarray, y: np.ndarray, k_inner: int, seed: int) -> tuple[dict, list[float]]:
    """Grid point with the best mean inner-fold accuracy (first one on ties)."""
    points = grid_points(grid)
    if len(points) == 1:
        return points[0], [float("nan")]
    plan = stratified_kfold(y[rows], k_inner, seed)
    scores = []
    for params in points:
        cand = spec.with_params(**params)
        accs = []
        for f in range(plan.k):
            tr, te = rows[plan.train_indices(f)], rows[plan.test_indices(f)]
            _, Xtr = data.encoded(tr)
            _, Xte = data.encoded(tr, te)
            model = learners.fit(cand, Xtr, y[tr])
            pred = learners.predict(model, Xte)
            accs.append(float(np.mean(np.asarray(pred, dtype=object) == y[te])))
        scores.append(float(np.mean(accs)))
    best = int(np.argmax(scores))
    return points[best], scores


@dataclass
class FoldOutcome:
    fold: int
    metrics: MetricSet
    params: dict
    predictions: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ModelRun:
    """One model family to evaluate: base spec plus its search grid."""

    spec: learners.ClassifierSpec
    grid: Mapping[str, Sequence]

    @property
    def kind(self) -> str:
        return self.spec.kind


def _outer_fold(task) -> list[tuple]:
    matrix, y, labels, positive, config, runs, plan, fold, k_inner, seed, thresholds = task
    data = FoldData(matrix, config)
    tr, te = plan.train_indices(fold), plan.test_indices(fold)
    _, Xtr = data.encoded(tr)
    imputed_te, Xte = data.encoded(tr, te)
    out = []
    for run in runs:
        params, _ = select_hyperparameters(run.spec, run.grid, data, tr, y, k_inner, _sub_seed(seed, fold + 1))
        model = learners.fit(run.spec.with_params(**params), Xtr, y[tr])
        pred = learners.predict(model, Xte)
        metrics = compute_metrics(y[te], pred, positive, labels)
        out.append((run.kind, FoldOutcome(fold, metrics, params, dict(zip(te.tolist(), pred)))))
    if thresholds is not None:
        rule = expert_rule_features(imputed_te, thresholds)
        pred = [positive if r else _negative(labels, positive) for r in rule]
        out.append((EXPERT_IMPUTED, FoldOutcome(fold, compute_metrics(y[te], pred, positive, labels), {})))
    return out


def _negative(labels: Sequence, positive) -> str:
    rest = [c for c in labels if c != positive]
    return rest[0]


def _map(fn, tasks: list, workers: int) -> list:
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
        return list(pool.map(fn, tasks))


@dataclass
class ReportRow:
    disease: str
    model: str
    imputation: str
    metrics: MetricSet
    folds: list[FoldOutcome] = field(default_factory=list)

    def cells(self) -> list[str]:
        return [self.disease, self.model, self.imputation] + [repr(float(v)) for v in self.metrics.as_tuple()]


@dataclass
class EvalReport:
    rows: list[ReportRow]

    def find(self, disease: str, model: str, imputation: str) -> ReportRow:
        for r in self.rows:
            if (r.disease, r.model, r.imputation) == (disease, model, imputation):
                return r
        raise KeyError((disease, model, imputation))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_HEADER)
        for r in self.rows:
            w.writerow(r.cells())
        return buf.getvalue()

    def folds_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("Disease", "Model", "Imputation", "Fold", "Hyperparameters", "Accuracy"))
        for r in self.rows:
            for f in r.folds:
                w.writerow((r.disease, r.model, r.imputation, f.fold,
                            json.dumps(f.params, sort_keys=True), repr(f.metrics.accuracy)))
        return buf.getvalue()

    def table(self) -> str:
        """Fixed-width rendering with three decimals."""
        lines = ["{:<15}{:<22}{:<11}".format(*REPORT_HEADER[:3]) + "".join(f"{h:>10}" for h in REPORT_HEADER[3:])]
        for r in self.rows:
            lines.append(f"{r.disease:<15}{r.model:<22}{r.imputation:<11}"
                         + "".join(f"{v:>10.3f}" for v in r.metrics.as_tuple()))
        return "\n".join(lines)


@dataclass(frozen=True)
class EvalSettings:
    k_outer: int = 5
    k_inner: int = 5
    seed: int = 0
    workers: int = 1
    rule_thresholds: tuple[float, float] = (SBP_THRESHOLD, DBP_THRESHOLD)


def nested_cv(runs: Sequence[ModelRun], matrix: FeatureMatrix, y: LabelVector, config: ImputeConfig,
              settings: EvalSettings, with_rule: bool = False) -> dict[str, list[FoldOutcome]]:
    """Outer-fold outcomes for every model run (plus the imputed expert rule if asked).

    Inside each outer fold the grid is searched by mean accuracy over inner
    folds of the training rows only; imputation statistics and learner
    scaling see training rows only.
    """
    if tuple(matrix.row_ids) != tuple(y.row_ids):
        raise ValueError("feature rows and labels are not aligned")
    yv = y.as_array()
    plan = stratified_kfold(yv, settings.k_outer, settings.seed)
    tasks = [
        (matrix, yv, y.classes, y.positive_class, config, tuple(runs), plan, f,
         settings.k_inner, settings.seed, settings.rule_thresholds if with_rule else None)
        for f in range(plan.k)
    ]
    outcomes: dict[str, list[FoldOutcome]] = {}
    for fold_result in _map(_outer_fold, tasks, settings.workers):
        for name, outcome in fold_result:
            outcomes.setdefault(name, []).append(outcome)
    return outcomes


def raw_expert_rule(histories: Mapping[str, Sequence[BPObservation]], y: LabelVector,
                    settings: EvalSettings) -> list[FoldOutcome]:
    """Raw-mode rule scored per outer fold over participants that have readings."""
    yv = y.as_array()
    plan = stratified_kfold(yv, settings.k_outer, settings.seed)
    negative = _negative(y.classes, y.positive_class)
    out = []
    for f in range(plan.k):
        te = [i for i in plan.test_indices(f) if histories.get(y.row_ids[i])]
        if not te:
            continue
        pred = [y.positive_class if expert_rule_hypertension(histories[y.row_ids[i]], "raw", *settings.rule_thresholds)
                else negative for i in te]
        out.append(FoldOutcome(f, compute_metrics(yv[te], pred, y.positive_class, y.classes), {}))
    return out


def evaluate(matrix: FeatureMatrix, labels: Mapping[str, LabelVector], runs: Sequence[ModelRun],
             methods: Sequence[ImputeConfig], settings: EvalSettings,
             bp_histories: Mapping[str, Sequence[BPObservation]] | None = None) -> EvalReport:
    """Table-shaped comparison over diseases × models × imputation methods.

    Hypertension additionally gets expert-rule rows: raw readings when
    ``bp_histories`` is given, and the imputed variant per method.
    """
    rows = []
    for disease, y in labels.items():
        is_ht = disease == "hypertension"
        by_method = {cfg.method: nested_cv(runs, matrix, y, cfg, settings, with_rule=is_ht) for cfg in methods}
        for run in runs:
            for cfg in methods:
                folds = by_method[cfg.method][run.kind]
                rows.append(ReportRow(disease, run.kind, cfg.method, MetricSet.mean([f.metrics for f in folds]), folds))
        if is_ht:
            if bp_histories is not None:
                folds = raw_expert_rule(bp_histories, y, settings)
                rows.append(ReportRow(disease, EXPERT_RAW, "-", MetricSet.mean([f.metrics for f in folds]), folds))
            for cfg in methods:
                folds = by_method[cfg.method][EXPERT_IMPUTED]
                rows.append(ReportRow(disease, EXPERT_IMPUTED, cfg.method,
                                      MetricSet.mean([f.metrics for f in folds]), folds))
    return EvalReport(rows)


def majority_rate(y: LabelVector) -> float:
    values, counts = np.unique(y.as_array().astype(str), return_counts=True)
    return float(counts.max() / counts.sum())


def check_ordering(report: EvalReport) -> list[str]:
    """Warnings when ensembles fail to beat KNN/SVM or KNNI fails to help GBT."""
    notes = []
    diseases = sorted({r.disease for r in report.rows}, key=list(DISEASE_LABELS).index)

    acc: dict[str, list[float]] = {}
    for r in report.rows:
        acc.setdefault(r.model, []).append(r.metrics.accuracy)
    for strong in ("GBT", "RF"):
        for weak in ("KNN", "SVM"):
            if strong in acc and weak in acc and np.mean(acc[strong]) <= np.mean(acc[weak]):
                notes.append(f"{strong} mean accuracy does not exceed {weak}")
    try:
        wins = sum(report.find(d, "GBT", "KNNI").metrics.accuracy >= report.find(d, "GBT", "MI").metrics.accuracy
                   for d in diseases)
        if wins < 2:
            notes.append(f"GBT with KNNI matches or beats MI on only {wins} of {len(diseases)} diseases")
    except KeyError:
        pass
    for n in notes:
        warnings.warn(n, stacklevel=2)
    return notes


__all__ = [
    "FoldPlan",
    "MetricSet",
    "EvalReport",
    "EvalSettings",
    "ModelRun",
    "ReportRow",
    "stratified_kfold",
    "compute_metrics",
    "expert_rule_hypertension",
    "nested_cv",
    "evaluate",
    "majority_rate",
    "check_ordering",
    "grid_points",
    "raw_expert_rule",
]
