"""Pipeline configuration: one YAML (or JSON) document, validated before any stage runs."""
from __future__ import annotations

import dataclasses
import hashlib
import json
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .domain import DISEASES
from .features import INTENSITY_CODES
from .impute import DEFAULT_ANCHORS, METHODS
from .learners import DEFAULT_GRIDS, DEFAULT_HYPERPARAMETERS, ESTIMATORS
from .synthgen import GeneratorConfig, ViolationSpec


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class CleaningSection:
    min_upload_days: int = 10
    constant_sleep_days: int = 10


@dataclass(frozen=True)
class FeatureSection:
    min_activity_participants: int = 50
    intensity_codes: dict = field(default_factory=lambda: dict(INTENSITY_CODES))


@dataclass(frozen=True)
class ImputationSection:
    methods: list = field(default_factory=lambda: ["KNNI", "MI"])
    k: int = 200
    anchor_attributes: list = field(default_factory=lambda: list(DEFAULT_ANCHORS))


@dataclass(frozen=True)
class ModelSection:
    kinds: list = field(default_factory=lambda: ["GBT", "RF", "SVM", "KNN"])
    hyperparameters: dict = field(default_factory=lambda: {k: dict(v) for k, v in DEFAULT_HYPERPARAMETERS.items()})
    grids: dict = field(default_factory=lambda: {k: {p: list(v) for p, v in g.items()} for k, g in DEFAULT_GRIDS.items()})


@dataclass(frozen=True)
class CVSection:
    k_outer: int = 5
    k_inner: int = 5


@dataclass(frozen=True)
class ExpertRuleSection:
    systolic_threshold: float = 140.0
    diastolic_threshold: float = 90.0


@dataclass(frozen=True)
class ExplainSection:
    model: str = "GBT"
    imputation: str = "KNNI"
    background_size: int = 100
    n_permutations: int = 100
    rows: str = "all"  # "all" retained rows, or "sample" of max_instances
    max_instances: int = 0  # 0 = no limit
    top_features: int = 10
    figure_format: str = "svg"


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 42
    output_dir: str = "run"
    workers: int = 1
    diseases: list = field(default_factory=lambda: list(DISEASES))
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    violations: ViolationSpec = field(default_factory=ViolationSpec)
    cleaning: CleaningSection = field(default_factory=CleaningSection)
    features: FeatureSection = field(default_factory=FeatureSection)
    imputation: ImputationSection = field(default_factory=ImputationSection)
    models: ModelSection = field(default_factory=ModelSection)
    cv: CVSection = field(default_factory=CVSection)
    expert_rule: ExpertRuleSection = field(default_factory=ExpertRuleSection)
    explain: ExplainSection = field(default_factory=ExplainSection)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        """Hash of every setting that can change an output (worker count excluded)."""
        doc = self.to_dict()
        doc.pop("workers")
        doc.pop("output_dir")
        return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()[:16]

    def replace(self, **changes) -> "PipelineConfig":
        return dataclasses.replace(self, **changes)


def _convert(tp, value, where: str):
    origin = typing.get_origin(tp)
    if dataclasses.is_dataclass(tp):
        if not isinstance(value, dict):
            raise ConfigError(f"{where}: expected a mapping, got {type(value).__name__}")
        return _build(tp, value, where)
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false, got {value!r}")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
        return value
    if tp is dict or origin is dict:
        if not isinstance(value, dict):
            raise ConfigError(f"{where}: expected a mapping, got {type(value).__name__}")
        return value
    if tp is list or origin is list:
        if not isinstance(value, list):
            raise ConfigError(f"{where}: expected a list, got {type(value).__name__}")
        return value
    return value


def _build(cls, data: dict, where: str):
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        prefix = f"{where}." if where else ""
        raise ConfigError(f"unknown key {prefix}{unknown[0]}")
    kwargs = {}
    for name, value in data.items():
        kwargs[name] = _convert(hints[name], value, f"{where}.{name}" if where else name)
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where or 'config'}: {exc}") from None


def _merge_defaults(doc: dict) -> dict:
    # partial model tables extend the defaults instead of replacing them
    models = doc.get("models")
    if isinstance(models, dict):
        for key, defaults in (("hyperparameters", DEFAULT_HYPERPARAMETERS), ("grids", DEFAULT_GRIDS)):
            if isinstance(models.get(key), dict):
                models[key] = {**{k: dict(v) for k, v in defaults.items()}, **models[key]}
    return doc


def validate(cfg: PipelineConfig) -> PipelineConfig:
    try:
        cfg.generator.validate()
    except ValueError as exc:
        raise ConfigError(f"generator: {exc}") from None
    for d in cfg.diseases:
        if d not in DISEASES:
            raise ConfigError(f"diseases: unknown disease {d!r}")
    if not cfg.diseases:
        raise ConfigError("diseases: at least one disease is required")
    for m in cfg.imputation.methods:
        if m not in METHODS:
            raise ConfigError(f"imputation.methods: unknown method {m!r}")
    if cfg.imputation.k < 1:
        raise ConfigError("imputation.k must be >= 1")
    for kind in cfg.models.kinds:
        if kind not in ESTIMATORS:
            raise ConfigError(f"models.kinds: unknown model {kind!r}")
    for table in ("hyperparameters", "grids"):
        for kind, params in getattr(cfg.models, table).items():
            if kind not in ESTIMATORS:
                raise ConfigError(f"models.{table}: unknown model {kind!r}")
            if not isinstance(params, dict):
                raise ConfigError(f"models.{table}.{kind}: expected a mapping")
            for pname, pv in params.items():
                if pname not in DEFAULT_HYPERPARAMETERS[kind] and pname not in ("min_child_weight", "max_bins", "bootstrap"):
                    raise ConfigError(f"models.{table}.{kind}: unknown hyperparameter {pname!r}")
                if table == "grids" and (not isinstance(pv, list) or not pv):
                    raise ConfigError(f"models.grids.{kind}.{pname}: expected a non-empty list")
    if cfg.cv.k_outer < 2 or cfg.cv.k_inner < 2:
        raise ConfigError("cv: k_outer and k_inner must be >= 2")
    if cfg.cleaning.min_upload_days < 1:
        raise ConfigError("cleaning.min_upload_days must be >= 1")
    if cfg.workers < 1:
        raise ConfigError("workers must be >= 1")
    ex = cfg.explain
    if ex.model not in ESTIMATORS:
        raise ConfigError(f"explain.model: unknown model {ex.model!r}")
    if ex.imputation not in METHODS:
        raise ConfigError(f"explain.imputation: unknown method {ex.imputation!r}")
    if ex.background_size < 1 or ex.n_permutations < 1:
        raise ConfigError("explain: background_size and n_permutations must be >= 1")
    if ex.rows not in ("all", "sample"):
        raise ConfigError(f"explain.rows: expected 'all' or 'sample', got {ex.rows!r}")
    if ex.figure_format not in ("svg", "png"):
        raise ConfigError(f"explain.figure_format: expected 'svg' or 'png', got {ex.figure_format!r}")
    return cfg


def from_dict(doc: dict | None) -> PipelineConfig:
    doc = _merge_defaults(dict(doc or {}))
    if isinstance(doc.get("generator"), dict) and "seed" in doc["generator"]:
        raise ConfigError("generator.seed: set the top-level seed instead")
    return validate(_build(PipelineConfig, doc, ""))


def load_config(path: str | Path | None) -> PipelineConfig:
    if path is None:
        return from_dict({})
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        doc = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (yaml.YAMLError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from None
    if doc is not None and not isinstance(doc, dict):
        raise ConfigError(f"config {path} must be a mapping at the top level")
    return from_dict(doc)


def dump_config(cfg: PipelineConfig) -> str:
    """YAML text that ``load_config`` reads back to ``cfg``."""
    doc = cfg.to_dict()
    doc["generator"].pop("seed")  # always taken from the top-level seed
    return yaml.safe_dump(doc, sort_keys=True, default_flow_style=False)


def generator_settings(cfg: PipelineConfig) -> GeneratorConfig:
    """Generator settings with the pipeline seed applied."""
    return dataclasses.replace(cfg.generator, seed=cfg.seed)


def grid_for(cfg: PipelineConfig, kind: str) -> dict[str, Any]:
    return dict(cfg.models.grids.get(kind, {}))
