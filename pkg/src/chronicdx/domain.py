"""Core data types shared across the pipeline.

Missing values are represented explicitly: ``None`` for scalar fields and
an explicit boolean mask for :class:`FeatureMatrix` cells.  No NaN
sentinels are used anywhere in the public types.
"""
from __future__ import annotations

import hashlib
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

GENDERS = ("female", "male")
ETHNICITIES = ("Chinese", "Malay", "Indian", "Eurasian", "Philippines", "Others")
SMOKING = ("non-smoker", "ex-smoker", "smoker")
DRINKING = ("non-drinker", "ex-drinker", "drinker")
DIABETES_LABELS = ("no_DM", "pre_DM", "DM")
BINARY_LABELS = ("no", "yes")
MEAL_TAGS = ("before_meal", "after_meal")

ACTIVITY_KINDS = ("Housework", "Walking", "Jogging", "AerobicWorkout", "Cycling", "Swimming", "Others")

DISEASES = ("diabetes", "hyperlipidemia", "hypertension")
DISEASE_LABELS = {
    "diabetes": DIABETES_LABELS,
    "hyperlipidemia": BINARY_LABELS,
    "hypertension": BINARY_LABELS,
}
POSITIVE_CLASS = {"diabetes": "DM", "hyperlipidemia": "yes", "hypertension": "yes"}


@dataclass(frozen=True)
class ParticipantProfile:
    id: str
    gender: str | None
    age: int | None
    ethnicity: str | None
    bmi: float | None
    smoking: str | None
    drinking: str | None
    diabetes_label: str
    hyperlipidemia_label: bool
    hypertension_label: bool

    def label(self, disease: str) -> str:
        if disease == "diabetes":
            return self.diabetes_label
        if disease == "hyperlipidemia":
            return "yes" if self.hyperlipidemia_label else "no"
        if disease == "hypertension":
            return "yes" if self.hypertension_label else "no"
        raise KeyError(disease)


@dataclass(frozen=True)
class BPReading:
    systolic: float
    diastolic: float
    time_of_day: int  # minutes after midnight


@dataclass(frozen=True)
class BGReading:
    value: float
    meal_tag: str
    time_of_day: int


@dataclass(frozen=True)
class ActivityEntry:
    # Raw ingested kinds (e.g. "Elliptical") are allowed until fold_rare_activities runs.
    kind: str
    duration_minutes: float


@dataclass(frozen=True)
class DailyRecord:
    participant_id: str
    day_index: int
    steps: int | None = None
    sleep_minutes: float | None = None
    bp_readings: tuple[BPReading, ...] = ()
    bg_readings: tuple[BGReading, ...] = ()
    activities: tuple[ActivityEntry, ...] = ()

    def is_upload(self) -> bool:
        """True when the day carries at least one non-missing field."""
        return (
            self.steps is not None
            or self.sleep_minutes is not None
            or bool(self.bp_readings)
            or bool(self.bg_readings)
            or bool(self.activities)
        )


@dataclass(frozen=True)
class Cohort:
    profiles: tuple[ParticipantProfile, ...]
    records: tuple[DailyRecord, ...]

    def __post_init__(self):
        object.__setattr__(self, "profiles", tuple(self.profiles))
        object.__setattr__(self, "records", tuple(self.records))

    @property
    def ids(self) -> list[str]:
        return [p.id for p in self.profiles]

    def records_by_participant(self) -> dict[str, list[DailyRecord]]:
        """Records grouped per participant, each list sorted by day_index."""
        grouped: dict[str, list[DailyRecord]] = defaultdict(list)
        for rec in self.records:
            grouped[rec.participant_id].append(rec)
        for recs in grouped.values():
            recs.sort(key=lambda r: r.day_index)
        return dict(grouped)

    def subset(self, keep_ids: Iterable[str]) -> "Cohort":
        keep = set(keep_ids)
        return Cohort(
            tuple(p for p in self.profiles if p.id in keep),
            tuple(r for r in self.records if r.participant_id in keep),
        )

    def __len__(self) -> int:
        return len(self.profiles)


@dataclass(frozen=True)
class Violation:
    kind: str
    participant_id: str
    detail: str = ""


def validate_cohort(
    profiles: Sequence[ParticipantProfile], records: Sequence[DailyRecord]
) -> list[Violation]:
    """List structural violations of a cohort; empty iff well-formed."""
    out: list[Violation] = []
    counts = Counter(p.id for p in profiles)
    for pid, n in counts.items():
        if n > 1:
            out.append(Violation("duplicate id", pid, f"{n} profiles"))

    for p in profiles:
        if p.bmi is not None and not p.bmi > 0:
            out.append(Violation("non-positive bmi", p.id))
        if p.age is not None and p.age < 18:
            out.append(Violation("age below 18", p.id))
        for value, allowed, name in (
            (p.gender, GENDERS, "gender"),
            (p.ethnicity, ETHNICITIES, "ethnicity"),
            (p.smoking, SMOKING, "smoking"),
            (p.drinking, DRINKING, "drinking"),
        ):
            if value is not None and value not in allowed:
                out.append(Violation(f"invalid {name}", p.id, str(value)))
        if p.diabetes_label not in DIABETES_LABELS:
            out.append(Violation("invalid diabetes label", p.id, str(p.diabetes_label)))

    seen_days: set[tuple[str, int]] = set()
    for r in records:
        key = (r.participant_id, r.day_index)
        if key in seen_days:
            out.append(Violation("duplicate day", r.participant_id, f"day {r.day_index}"))
        seen_days.add(key)
        if r.day_index < 0:
            out.append(Violation("negative day index", r.participant_id, f"day {r.day_index}"))
        if r.steps is not None and r.steps < 0:
            out.append(Violation("negative steps", r.participant_id, f"day {r.day_index}"))
        if r.sleep_minutes is not None and r.sleep_minutes < 0:
            out.append(Violation("negative sleep", r.participant_id, f"day {r.day_index}"))
        for bp in r.bp_readings:
            if bp.systolic <= bp.diastolic:
                out.append(Violation("systolic ≤ diastolic", r.participant_id, f"day {r.day_index}"))
            if bp.systolic <= 0 or bp.diastolic <= 0:
                out.append(Violation("non-positive measurement", r.participant_id, f"day {r.day_index}"))
        for bg in r.bg_readings:
            if bg.value <= 0:
                out.append(Violation("non-positive measurement", r.participant_id, f"day {r.day_index}"))
            if bg.meal_tag not in MEAL_TAGS:
                out.append(Violation("invalid meal tag", r.participant_id, bg.meal_tag))
        for act in r.activities:
            if not act.duration_minutes > 0:
                out.append(Violation("non-positive duration", r.participant_id, f"day {r.day_index}"))
    return out


# ---------------------------------------------------------------------------
# Feature matrices


@dataclass(frozen=True)
class Column:
    name: str
    kind: str  # "numeric" | "categorical"
    unit: str = ""
    categories: tuple[str, ...] = ()

    @property
    def is_categorical(self) -> bool:
        return self.kind == "categorical"


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """Participants × attributes with an explicit missing mask.

    Categorical cells hold the integer index of their category within
    ``Column.categories``.  Values under missing cells are 0.0 and carry no
    meaning.
    """

    columns: tuple[Column, ...]
    values: np.ndarray
    missing: np.ndarray
    row_ids: tuple[str, ...]

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        missing = np.asarray(self.missing, dtype=bool)
        if values.shape != missing.shape or values.shape != (len(self.row_ids), len(self.columns)):
            raise ValueError(
                f"shape mismatch: values {values.shape}, missing {missing.shape}, "
                f"{len(self.row_ids)} rows × {len(self.columns)} columns"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("non-finite value in feature matrix; use the missing mask instead")
        values = np.where(missing, 0.0, values)
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "row_ids", tuple(self.row_ids))
        object.__setattr__(self, "values", _readonly(values))
        object.__setattr__(self, "missing", _readonly(missing))

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    def column_index(self, name: str) -> int:
        for j, c in enumerate(self.columns):
            if c.name == name:
                return j
        raise KeyError(name)

    def cell(self, row: int, column: str | int):
        j = column if isinstance(column, int) else self.column_index(column)
        if self.missing[row, j]:
            return None
        col = self.columns[j]
        v = self.values[row, j]
        return col.categories[int(v)] if col.is_categorical else float(v)

    def take(self, rows: Sequence[int] | np.ndarray) -> "FeatureMatrix":
        rows = np.asarray(rows, dtype=int)
        return FeatureMatrix(
            self.columns,
            self.values[rows],
            self.missing[rows],
            tuple(self.row_ids[i] for i in rows),
        )

    def replace(self, values: np.ndarray, missing: np.ndarray) -> "FeatureMatrix":
        return FeatureMatrix(self.columns, values, missing, self.row_ids)

    def missing_fraction(self) -> dict[str, float]:
        n = max(len(self.row_ids), 1)
        return {c.name: float(self.missing[:, j].sum()) / n for j, c in enumerate(self.columns)}

    def equals(self, other: "FeatureMatrix") -> bool:
        return (
            self.columns == other.columns
            and self.row_ids == other.row_ids
            and np.array_equal(self.missing, other.missing)
            and np.array_equal(self.values, other.values)
        )


def schema_fingerprint(columns: Sequence[Column] | Sequence[str]) -> str:
    h = hashlib.sha256()
    for c in columns:
        if isinstance(c, Column):
            h.update(f"{c.name}|{c.kind}|{','.join(c.categories)}\n".encode())
        else:
            h.update(f"{c}\n".encode())
    return h.hexdigest()[:16]


@dataclass(frozen=True)
class LabelVector:
    disease: str
    values: tuple[str, ...]
    classes: tuple[str, ...] = field(default=())
    row_ids: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if self.disease not in DISEASE_LABELS:
            raise ValueError(f"unknown disease {self.disease!r}")
        allowed = DISEASE_LABELS[self.disease]
        object.__setattr__(self, "values", tuple(self.values))
        object.__setattr__(self, "row_ids", tuple(self.row_ids) or tuple(str(i) for i in range(len(self.values))))
        if len(self.row_ids) != len(self.values):
            raise ValueError(f"{len(self.values)} labels but {len(self.row_ids)} row ids")
        if not self.classes:
            object.__setattr__(self, "classes", allowed)
        bad = set(self.values) - set(allowed)
        if bad:
            raise ValueError(f"labels {sorted(bad)} not valid for {self.disease}")

    def __len__(self) -> int:
        return len(self.values)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=object)

    @property
    def positive_class(self) -> str:
        return POSITIVE_CLASS[self.disease]


def labels_for(profiles: Sequence[ParticipantProfile], disease: str, row_ids: Sequence[str] | None = None) -> LabelVector:
    by_id: Mapping[str, ParticipantProfile] = {p.id: p for p in profiles}
    ids = row_ids if row_ids is not None else [p.id for p in profiles]
    return LabelVector(disease, tuple(by_id[i].label(disease) for i in ids), row_ids=tuple(ids))
