"""Pipeline stages over an output directory, with a manifest for reproducibility and resume.

Each stage reads the files of earlier stages, writes its own files and
records in ``manifest.json`` the config digest plus SHA-256 hashes of its
inputs and outputs.  A stage whose recorded hashes still match is skipped
on resume.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import platform
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from . import io as fmt
from . import learners
from .cleaning import clean
from .config import ConfigError, PipelineConfig, dump_config, generator_settings, grid_for
from .domain import DISEASES, LabelVector
from .evaluation import (
    EvalReport,
    EvalSettings,
    ModelRun,
    check_ordering,
    evaluate,
    select_hyperparameters,
    FoldData,
)
from .explain import ShapleyReport, background_sample, overall_ranking, shapley_sampling, summarize
from .features import FEATURE_COLUMNS, build_feature_matrix, one_hot_encode
from .impute import ImputeConfig, impute
from .synthgen import generate_study_cohort

log = logging.getLogger("chronicdx")

STAGES = ("generate", "clean", "featurize", "impute", "train", "eval", "explain")
MANIFEST = "manifest.json"
SUMMARY = "summary.txt"


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


# ---------------------------------------------------------------------------
# Stage inputs and outputs (paths relative to the output directory)


def _model_name(disease: str, kind: str, method: str) -> str:
    return f"models/{disease}_{kind}_{method}.json"


def stage_inputs(stage: str, cfg: PipelineConfig) -> list[str]:
    if stage == "generate":
        return []
    if stage == "clean":
        return ["generate/profiles.csv", "generate/daily_records.csv"]
    if stage == "featurize":
        return ["clean/profiles.csv", "clean/daily_records.csv"]
    if stage == "impute":
        return ["features/features.csv"]
    if stage == "train":
        return ["features/features.csv", "features/labels.csv"]
    if stage == "eval":
        return ["features/features.csv", "features/labels.csv", "clean/daily_records.csv"] + [
            _model_name(d, k, m) for d in cfg.diseases for k in cfg.models.kinds for m in cfg.imputation.methods
        ]
    if stage == "explain":
        return ["features/features.csv", f"impute/features_{cfg.explain.imputation}.csv"] + [
            _model_name(d, cfg.explain.model, cfg.explain.imputation) for d in cfg.diseases
        ]
    raise KeyError(stage)


def stage_outputs(stage: str, cfg: PipelineConfig) -> list[str]:
    ext = cfg.explain.figure_format
    if stage == "generate":
        return ["generate/profiles.csv", "generate/daily_records.csv", "generate/injected_ids.csv"]
    if stage == "clean":
        return ["clean/profiles.csv", "clean/daily_records.csv", "clean/cleaning_report.txt"]
    if stage == "featurize":
        return ["features/features.csv", "features/labels.csv"]
    if stage == "impute":
        return [f"impute/features_{m}.csv" for m in cfg.imputation.methods]
    if stage == "train":
        return [_model_name(d, k, m) for d in cfg.diseases for k in cfg.models.kinds
                for m in cfg.imputation.methods] + ["models/selection.csv"]
    if stage == "eval":
        return ["eval/report.csv", "eval/folds.csv", f"eval/accuracy.{ext}"]
    if stage == "explain":
        out = []
        for d in cfg.diseases:
            out += [f"explain/{d}_ranking.csv", f"explain/{d}_values.csv", f"explain/{d}_summary.{ext}"]
        return out
    raise KeyError(stage)


def stage_requires(cfg: PipelineConfig) -> None:
    """Cross-section checks that only matter once the explain stage is reached."""
    if cfg.explain.imputation not in cfg.imputation.methods:
        raise ConfigError(f"explain.imputation {cfg.explain.imputation!r} is not among imputation.methods")
    if cfg.explain.model not in cfg.models.kinds:
        raise ConfigError(f"explain.model {cfg.explain.model!r} is not among models.kinds")


# ---------------------------------------------------------------------------
# Manifest


@dataclass
class Manifest:
    path: Path
    doc: dict

    @classmethod
    def load(cls, out_dir: Path) -> "Manifest":
        path = out_dir / MANIFEST
        if path.exists():
            try:
                doc = json.loads(path.read_text(encoding="utf-8"))
            except json.JSONDecodeError:
                doc = {}
        else:
            doc = {}
        doc.setdefault("stages", {})
        return cls(path, doc)

    def save(self, cfg: PipelineConfig) -> None:
        self.doc["config_digest"] = cfg.digest()
        self.doc["versions"] = versions()
        self.path.write_text(json.dumps(self.doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")

    def record(self, stage: str, cfg: PipelineConfig, out_dir: Path) -> None:
        self.doc["stages"][stage] = {
            "config_digest": cfg.digest(),
            "inputs": {p: sha256_file(out_dir / p) for p in stage_inputs(stage, cfg) if (out_dir / p).exists()},
            "outputs": {p: sha256_file(out_dir / p) for p in stage_outputs(stage, cfg)},
        }

    def up_to_date(self, stage: str, cfg: PipelineConfig, out_dir: Path) -> bool:
        entry = self.doc["stages"].get(stage)
        if not entry or entry.get("config_digest") != cfg.digest():
            return False
        for group, paths in (("inputs", stage_inputs(stage, cfg)), ("outputs", stage_outputs(stage, cfg))):
            recorded = entry.get(group, {})
            for p in paths:
                f = out_dir / p
                if not f.exists():
                    if group == "inputs" and p not in recorded:
                        continue
                    return False
                if recorded.get(p) != sha256_file(f):
                    return False
        return True


def versions() -> dict:
    import matplotlib
    import numba
    import scipy

    return {
        "chronicdx": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
        "matplotlib": matplotlib.__version__,
    }


# ---------------------------------------------------------------------------
# Shared loaders


def _labels(out_dir: Path, cfg: PipelineConfig, row_ids) -> dict[str, LabelVector]:
    path = out_dir / "features/labels.csv"
    table = fmt.read_labels(path)
    out = {}
    for d in cfg.diseases:
        missing = [i for i in row_ids if i not in table[d]]
        if missing:
            raise fmt.DataFormatError(path, 0, f"no {d} label for participant {missing[0]!r}")
        try:
            out[d] = LabelVector(d, tuple(table[d][i] for i in row_ids), row_ids=tuple(row_ids))
        except ValueError as exc:
            raise fmt.DataFormatError(path, 0, str(exc)) from None
    return out


def _impute_config(cfg: PipelineConfig, method: str) -> ImputeConfig:
    return ImputeConfig(method, cfg.imputation.k, tuple(cfg.imputation.anchor_attributes))


def _base_spec(cfg: PipelineConfig, kind: str) -> learners.ClassifierSpec:
    return learners.ClassifierSpec(kind, dict(cfg.models.hyperparameters.get(kind, {})), cfg.seed)


def _runs(cfg: PipelineConfig) -> list[ModelRun]:
    return [ModelRun(_base_spec(cfg, k), grid_for(cfg, k)) for k in cfg.models.kinds]


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Stages


def run_generate(cfg: PipelineConfig, out: Path) -> None:
    cohort, injected = generate_study_cohort(generator_settings(cfg), cfg.violations)
    (out / "generate").mkdir(parents=True, exist_ok=True)
    fmt.write_profiles(cohort.profiles, out / "generate/profiles.csv")
    fmt.write_records(cohort.records, out / "generate/daily_records.csv")
    rows = [(kind, pid) for kind, ids in (("short_upload", injected.short_upload),
                                          ("missing_profile", injected.missing_profile),
                                          ("constant_sleep", injected.constant_sleep)) for pid in sorted(ids)]
    _write_text(out / "generate/injected_ids.csv", _csv_text(("violation", "id"), rows))


def run_clean(cfg: PipelineConfig, out: Path) -> None:
    cohort = fmt.read_cohort(out / "generate")
    kept, report = clean(cohort, cfg.cleaning.min_upload_days, cfg.cleaning.constant_sleep_days)
    (out / "clean").mkdir(parents=True, exist_ok=True)
    fmt.write_profiles(kept.profiles, out / "clean/profiles.csv")
    fmt.write_records(kept.records, out / "clean/daily_records.csv")
    _write_text(out / "clean/cleaning_report.txt", report.to_text())


def run_featurize(cfg: PipelineConfig, out: Path) -> None:
    cohort = fmt.read_cohort(out / "clean")
    matrix = build_feature_matrix(cohort, True, cfg.features.min_activity_participants,
                                  dict(cfg.features.intensity_codes))
    (out / "features").mkdir(parents=True, exist_ok=True)
    fmt.write_features(matrix, out / "features/features.csv")
    fmt.write_labels(cohort.profiles, out / "features/labels.csv", matrix.row_ids)


def run_impute(cfg: PipelineConfig, out: Path) -> None:
    matrix = fmt.read_features(out / "features/features.csv")
    (out / "impute").mkdir(parents=True, exist_ok=True)
    for method in cfg.imputation.methods:
        fmt.write_features(impute(matrix, _impute_config(cfg, method)), out / f"impute/features_{method}.csv")


def run_train(cfg: PipelineConfig, out: Path) -> None:
    """Fit every (disease, model, imputation) on all retained rows.

    Hyperparameters come from an inner-fold grid search over all rows, with
    imputation refit inside each search fold.
    """
    matrix = fmt.read_features(out / "features/features.csv")
    labels = _labels(out, cfg, matrix.row_ids)
    (out / "models").mkdir(parents=True, exist_ok=True)
    selection = []
    rows = np.arange(matrix.shape[0])
    for method in cfg.imputation.methods:
        data = FoldData(matrix, _impute_config(cfg, method))
        _, X = data.encoded(rows)
        for disease in cfg.diseases:
            y = labels[disease].as_array()
            for run in _runs(cfg):
                params, _ = select_hyperparameters(run.spec, run.grid, data, rows, y, cfg.cv.k_inner, cfg.seed)
                model = learners.fit(run.spec.with_params(**params), X, y)
                _write_text(out / _model_name(disease, run.kind, method), model.dumps() + "\n")
                selection.append((disease, run.kind, method, json.dumps(params, sort_keys=True)))
    _write_text(out / "models/selection.csv", _csv_text(("Disease", "Model", "Imputation", "Hyperparameters"), selection))


def _load_model(path: Path) -> learners.TrainedModel:
    try:
        return learners.TrainedModel.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise fmt.DataFormatError(path, 0, "model file not found") from None
    except (KeyError, ValueError, TypeError) as exc:
        if isinstance(exc, learners.SchemaMismatchError):
            raise
        raise fmt.DataFormatError(path, 0, f"unreadable model file ({exc})") from None


def _check_models(cfg: PipelineConfig, out: Path, encoded_columns: tuple[str, ...]) -> None:
    """Trained models must share the schema of the feature file being evaluated."""
    from .domain import schema_fingerprint

    current = schema_fingerprint(encoded_columns)
    for d in cfg.diseases:
        for k in cfg.models.kinds:
            for m in cfg.imputation.methods:
                path = out / _model_name(d, k, m)
                if not path.exists():
                    continue
                model = _load_model(path)
                if model.fingerprint != current:
                    raise learners.SchemaMismatchError(
                        f"{path}: feature schema {current} does not match training schema {model.fingerprint}"
                    )


def _bp_histories(out: Path) -> dict:
    hist: dict[str, list] = {}
    for rec in fmt.read_records(out / "clean/daily_records.csv"):
        for b in rec.bp_readings:
            hist.setdefault(rec.participant_id, []).append((rec.day_index, b.systolic, b.diastolic))
    return hist


def run_eval(cfg: PipelineConfig, out: Path) -> EvalReport:
    from .plotting import accuracy_chart

    matrix = fmt.read_features(out / "features/features.csv", columns=None)
    _check_models(cfg, out, one_hot_encode(matrix).columns)
    labels = _labels(out, cfg, matrix.row_ids)
    settings = EvalSettings(cfg.cv.k_outer, cfg.cv.k_inner, cfg.seed, cfg.workers,
                            (cfg.expert_rule.systolic_threshold, cfg.expert_rule.diastolic_threshold))
    hist = _bp_histories(out) if "hypertension" in cfg.diseases else None
    methods = [_impute_config(cfg, m) for m in cfg.imputation.methods]
    report = evaluate(matrix, labels, _runs(cfg), methods, settings, hist)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for note in check_ordering(report):
            log.warning("eval: %s", note)
    _write_text(out / "eval/report.csv", report.to_csv())
    _write_text(out / "eval/folds.csv", report.folds_csv())
    accuracy_chart([(r.disease, r.model, r.imputation, r.metrics.accuracy) for r in report.rows],
                   out / f"eval/accuracy.{cfg.explain.figure_format}", "Cross-validated accuracy")
    return report


def _explain_one(task):
    model_text, X, names, groups, classes, bg_rows, n_perm, seed = task
    model = learners.TrainedModel.loads(model_text)
    score = lambda Z: learners.predict_proba(model, Z, model.columns)  # noqa: E731
    return shapley_sampling(score, X, X[bg_rows], n_perm, seed, groups=groups, feature_names=names, classes=classes)


def run_explain(cfg: PipelineConfig, out: Path) -> dict[str, ShapleyReport]:
    from .evaluation import _map
    from .plotting import shapley_bar_chart

    raw = fmt.read_features(out / "features/features.csv")
    imputed = fmt.read_features(out / f"impute/features_{cfg.explain.imputation}.csv")
    if imputed.row_ids != raw.row_ids:
        raise fmt.DataFormatError(out / f"impute/features_{cfg.explain.imputation}.csv", 0,
                                  "row ids differ from features/features.csv")
    enc = one_hot_encode(imputed)
    X = np.asarray(enc.values, dtype=float)
    groups = [cols for _, cols in enc.groups()]
    names = [name for name, _ in enc.groups()]
    ex = cfg.explain
    bg_rows = background_sample(X, ex.background_size, cfg.seed)
    rows = np.arange(X.shape[0])
    if ex.rows == "sample" and 0 < ex.max_instances < X.shape[0]:
        rows = np.sort(np.random.default_rng(np.random.SeedSequence([cfg.seed, 11])).choice(
            X.shape[0], ex.max_instances, replace=False))
    tasks = []
    for d in cfg.diseases:
        path = out / _model_name(d, ex.model, ex.imputation)
        model = _load_model(path)
        if model.fingerprint != enc.fingerprint:
            raise learners.SchemaMismatchError(f"{path}: model schema does not match imputed features")
        tasks.append((model.dumps(), X[rows], names, groups, model.classes, bg_rows, ex.n_permutations, cfg.seed))
    results = _map(_explain_one, tasks, cfg.workers)
    reports = {}
    (out / "explain").mkdir(parents=True, exist_ok=True)
    raw_values = np.asarray(imputed.values)[rows]
    for d, sv in zip(cfg.diseases, results):
        rep = summarize(sv)
        reports[d] = rep
        _write_text(out / f"explain/{d}_ranking.csv", rep.to_csv())
        vrows = []
        for i, r in enumerate(rows):
            for j, name in enumerate(sv.features):
                for c_idx, cls in enumerate(sv.classes):
                    vrows.append((imputed.row_ids[r], name, cls, repr(float(sv.values[i, j, c_idx])),
                                  repr(float(raw_values[i, j]))))
        _write_text(out / f"explain/{d}_values.csv",
                    _csv_text(("id", "feature", "class", "shapley_value", "feature_value"), vrows))
        shapley_bar_chart(rep, out / f"explain/{d}_summary.{ex.figure_format}",
                          f"{d}: mean |Shapley value| ({ex.model}, {ex.imputation})", ex.top_features)
    return reports


RUNNERS: dict[str, Callable[[PipelineConfig, Path], object]] = {
    "generate": run_generate,
    "clean": run_clean,
    "featurize": run_featurize,
    "impute": run_impute,
    "train": run_train,
    "eval": run_eval,
    "explain": run_explain,
}


# ---------------------------------------------------------------------------
# Orchestration


def plan(cfg: PipelineConfig, stages=STAGES) -> str:
    lines = [f"output directory: {cfg.output_dir}", f"config digest: {cfg.digest()}"]
    for i, s in enumerate(stages, 1):
        lines.append(f"{i}. {s}: reads {', '.join(stage_inputs(s, cfg)[:4]) or '-'}"
                     + (" ..." if len(stage_inputs(s, cfg)) > 4 else ""))
        lines.append(f"   writes {', '.join(stage_outputs(s, cfg)[:4])}"
                     + (" ..." if len(stage_outputs(s, cfg)) > 4 else ""))
    return "\n".join(lines)


def run_stage(stage: str, cfg: PipelineConfig, resume: bool = False) -> bool:
    """Run one stage; returns False when skipped because its manifest entry is current."""
    out = Path(cfg.output_dir)
    manifest = Manifest.load(out)
    if resume and manifest.up_to_date(stage, cfg, out):
        log.info("%s: up to date, skipped", stage)
        return False
    if stage == "explain":
        stage_requires(cfg)
    for p in stage_inputs(stage, cfg):
        if not (out / p).exists() and not p.startswith("models/"):
            raise fmt.DataFormatError(out / p, 0, f"input for stage {stage!r} not found; run the upstream stage first")
    out.mkdir(parents=True, exist_ok=True)
    log.info("%s: running", stage)
    RUNNERS[stage](cfg, out)
    manifest.record(stage, cfg, out)
    _write_text(out / "config.yaml", dump_config(cfg.replace(workers=1, output_dir=".")))
    manifest.save(cfg)
    return True


def run_all(cfg: PipelineConfig, resume: bool = True) -> Path:
    stage_requires(cfg)
    out = Path(cfg.output_dir)
    for stage in STAGES:
        try:
            run_stage(stage, cfg, resume=resume)
        except Exception as exc:  # noqa: BLE001 - re-raised with the stage attached
            raise StageError(stage, exc) from exc
    _write_text(out / SUMMARY, summary_text(cfg, out))
    return out


def summary_text(cfg: PipelineConfig, out: Path) -> str:
    lines = ["Diagnosis performance (nested cross-validation, mean over outer folds)", ""]
    rows = list(csv.reader(io.StringIO((out / "eval/report.csv").read_text(encoding="utf-8"))))
    header, body = rows[0], rows[1:]
    lines.append("{:<15}{:<22}{:<11}".format(*header[:3]) + "".join(f"{h:>10}" for h in header[3:]))
    for r in body:
        lines.append(f"{r[0]:<15}{r[1]:<22}{r[2]:<11}" + "".join(f"{float(v):>10.3f}" for v in r[3:]))
    lines += ["", f"Top {cfg.explain.top_features} attributes by mean |Shapley value| "
              f"({cfg.explain.model}, {cfg.explain.imputation})"]
    for d in cfg.diseases:
        ranking = list(csv.reader(io.StringIO((out / f"explain/{d}_ranking.csv").read_text(encoding="utf-8"))))[1:]
        totals: dict[str, float] = {}
        for feature, _cls, value, _rank in ranking:
            totals[feature] = totals.get(feature, 0.0) + float(value)
        order = sorted(totals, key=lambda f: -totals[f])  # stable: ties keep file order
        lines.append(f"  {d}: " + ", ".join(order[: cfg.explain.top_features]))
    return "\n".join(lines) + "\n"


def stage_names() -> tuple[str, ...]:
    return STAGES


__all__ = ["STAGES", "StageError", "run_stage", "run_all", "plan", "summary_text", "Manifest", "DISEASES",
           "FEATURE_COLUMNS", "overall_ranking"]
