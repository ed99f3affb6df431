"""Turn cleaned daily records into the 35-attribute participant matrix."""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .domain import (
    DRINKING,
    ETHNICITIES,
    GENDERS,
    SMOKING,
    ActivityEntry,
    Cohort,
    Column,
    DailyRecord,
    FeatureMatrix,
    ParticipantProfile,
    schema_fingerprint,
)

INTENSITY_CODES = {
    "Housework": 2.5,
    "Walking": 3.5,
    "Jogging": 6.0,
    "AerobicWorkout": 8.0,
    "Cycling": 4.0,
    "Swimming": 6.0,
    # Elliptical and Gym share 6.0; folded kinds inherit it as "Others".
    "Elliptical": 6.0,
    "Gym": 6.0,
    "Others": 6.0,
}


def _family(prefix: str, unit: str, counts: bool = False) -> list[Column]:
    cols = [Column(prefix, "numeric", unit)] + [Column(f"{prefix}_{s}", "numeric", unit) for s in "FLC"]
    if counts:
        cols += [Column(f"{prefix}_Count", "numeric", "entries")]
        cols += [Column(f"{prefix}_{s}_Count", "numeric", "entries") for s in "FLC"]
    return cols


FEATURE_COLUMNS: tuple[Column, ...] = tuple(
    [
        Column("Gender", "categorical", "", GENDERS),
        Column("Age", "numeric", "years"),
        Column("Ethnicity", "categorical", "", ETHNICITIES),
        Column("BMI", "numeric", "kg/m2"),
        Column("Smoking", "categorical", "", SMOKING),
        Column("Drinking", "categorical", "", DRINKING),
        Column("BG", "numeric", "mmol/L"),
        Column("BG_BM", "numeric", "mmol/L"),
        Column("BG_AM", "numeric", "mmol/L"),
        Column("BG_C", "numeric", "mmol/L"),
    ]
    + _family("SBP", "mmHg")
    + _family("DBP", "mmHg")
    + _family("Step", "steps", counts=True)
    + _family("Sleep", "minutes", counts=True)
    + [Column("Activity", "numeric", "intensity-minutes")]
)
FEATURE_NAMES = tuple(c.name for c in FEATURE_COLUMNS)
assert len(FEATURE_COLUMNS) == 35

BG_FAMILY = ("BG", "BG_BM", "BG_AM", "BG_C")
BP_FAMILY = tuple(n for n in FEATURE_NAMES if n.startswith(("SBP", "DBP")))


@dataclass(frozen=True)
class HalfSplit:
    former: tuple[DailyRecord, ...]
    latter: tuple[DailyRecord, ...]


def split_halves(records: Iterable[DailyRecord]) -> HalfSplit:
    """Chronological split; an odd record goes to the former half."""
    recs = sorted(records, key=lambda r: r.day_index)
    cut = (len(recs) + 1) // 2
    return HalfSplit(tuple(recs[:cut]), tuple(recs[cut:]))


def change_feature(mean_former: float | None, mean_latter: float | None) -> float | None:
    if mean_former is None or mean_latter is None:
        return None
    return abs(mean_former - mean_latter)


def bg_gap(mean_before_meal: float | None, mean_after_meal: float | None) -> float | None:
    if mean_before_meal is None or mean_after_meal is None:
        return None
    return abs(mean_after_meal - mean_before_meal)


def fold_rare_activities(records: Sequence[DailyRecord], min_participants: int = 50) -> list[DailyRecord]:
    """Rename activity kinds uploaded by fewer than ``min_participants`` people to Others."""
    uploaders: dict[str, set[str]] = defaultdict(set)
    for r in records:
        for a in r.activities:
            uploaders[a.kind].add(r.participant_id)
    rare = {k for k, who in uploaders.items() if len(who) < min_participants}
    if not rare:
        return list(records)
    out = []
    for r in records:
        if any(a.kind in rare for a in r.activities):
            acts = tuple(ActivityEntry("Others", a.duration_minutes) if a.kind in rare else a for a in r.activities)
            r = DailyRecord(r.participant_id, r.day_index, r.steps, r.sleep_minutes, r.bp_readings, r.bg_readings, acts)
        out.append(r)
    return out


def activity_score(records: Iterable[DailyRecord], intensity: dict[str, float] | None = None) -> float | None:
    """Sum over kinds of intensity × active days × mean minutes per active day."""
    codes = INTENSITY_CODES if intensity is None else intensity
    minutes: dict[str, dict[int, float]] = defaultdict(lambda: defaultdict(float))
    for r in records:
        for a in r.activities:
            minutes[a.kind][r.day_index] += a.duration_minutes
    if not minutes:
        return None
    total = 0.0
    for kind in sorted(minutes):
        if kind not in codes:
            raise ValueError(f"no intensity code for activity kind {kind!r}")
        per_day = minutes[kind]
        days = len(per_day)
        mean_session = math.fsum(per_day.values()) / days
        total += codes[kind] * days * mean_session
    return total


def _mean(xs: list[float]) -> float | None:
    return math.fsum(xs) / len(xs) if xs else None


def _count(xs: list) -> float | None:
    return float(len(xs)) if xs else None


def _family_values(values_f: list[float], values_l: list[float], counts: bool) -> list[float | None]:
    both = values_f + values_l
    mean_f, mean_l = _mean(values_f), _mean(values_l)
    out = [_mean(both), mean_f, mean_l, change_feature(mean_f, mean_l)]
    if counts:
        cf, cl = _count(values_f), _count(values_l)
        out += [_count(both), cf, cl, change_feature(cf, cl)]
    return out


def participant_features(
    profile: ParticipantProfile, records: Sequence[DailyRecord], intensity: dict[str, float] | None = None
) -> list:
    """The 35 attribute values for one participant, ``None`` marking missing."""
    uploads = [r for r in records if r.is_upload()]
    halves = split_halves(uploads)

    bg_all = [g for r in uploads for g in r.bg_readings]
    bm = [g.value for g in bg_all if g.meal_tag == "before_meal"]
    am = [g.value for g in bg_all if g.meal_tag == "after_meal"]
    mean_bm, mean_am = _mean(bm), _mean(am)

    def readings(half, attr):
        return [getattr(bp, attr) for r in half for bp in r.bp_readings]

    row: list = [profile.gender, profile.age, profile.ethnicity, profile.bmi, profile.smoking, profile.drinking]
    row += [_mean([g.value for g in bg_all]), mean_bm, mean_am, bg_gap(mean_bm, mean_am)]
    row += _family_values(readings(halves.former, "systolic"), readings(halves.latter, "systolic"), counts=False)
    row += _family_values(readings(halves.former, "diastolic"), readings(halves.latter, "diastolic"), counts=False)
    row += _family_values(
        [float(r.steps) for r in halves.former if r.steps is not None],
        [float(r.steps) for r in halves.latter if r.steps is not None],
        counts=True,
    )
    row += _family_values(
        [r.sleep_minutes for r in halves.former if r.sleep_minutes is not None],
        [r.sleep_minutes for r in halves.latter if r.sleep_minutes is not None],
        counts=True,
    )
    row.append(activity_score(uploads, intensity))
    return row


def matrix_from_cells(
    columns: Sequence[Column], rows: Sequence[Sequence], row_ids: Sequence[str]
) -> FeatureMatrix:
    """Build a FeatureMatrix from python cells (``None`` = missing)."""
    n, m = len(rows), len(columns)
    values = np.zeros((n, m))
    missing = np.zeros((n, m), dtype=bool)
    lookup = [{c: i for i, c in enumerate(col.categories)} if col.is_categorical else None for col in columns]
    for i, row in enumerate(rows):
        if len(row) != m:
            raise ValueError(f"row {row_ids[i]!r} has {len(row)} cells, expected {m}")
        for j, v in enumerate(row):
            if v is None:
                missing[i, j] = True
            elif lookup[j] is not None:
                try:
                    values[i, j] = lookup[j][v]
                except KeyError:
                    raise ValueError(f"unseen category {v!r} in column {columns[j].name!r}") from None
            else:
                values[i, j] = float(v)
    return FeatureMatrix(tuple(columns), values, missing, tuple(row_ids))


def build_feature_matrix(
    cohort: Cohort, fold_rare: bool = True, min_participants: int = 50, intensity: dict[str, float] | None = None
) -> FeatureMatrix:
    records = cohort.records
    if fold_rare:
        records = fold_rare_activities(records, min_participants)
    grouped: dict[str, list[DailyRecord]] = defaultdict(list)
    for r in records:
        grouped[r.participant_id].append(r)
    rows = [participant_features(p, grouped.get(p.id, []), intensity) for p in cohort.profiles]
    return matrix_from_cells(FEATURE_COLUMNS, rows, [p.id for p in cohort.profiles])


@dataclass(frozen=True, eq=False)
class EncodedMatrix:
    """Numeric design matrix after one-hot expansion of categorical attributes."""

    columns: tuple[str, ...]
    source: tuple[str, ...]
    values: np.ndarray
    missing: np.ndarray
    row_ids: tuple[str, ...]

    @property
    def fingerprint(self) -> str:
        return schema_fingerprint(self.columns)

    def groups(self) -> list[tuple[str, list[int]]]:
        """Source attributes in order, each with its encoded column indices."""
        out: dict[str, list[int]] = {}
        for j, s in enumerate(self.source):
            out.setdefault(s, []).append(j)
        return list(out.items())


def one_hot_encode(matrix: FeatureMatrix) -> EncodedMatrix:
    n = matrix.shape[0]
    names: list[str] = []
    source: list[str] = []
    blocks: list[np.ndarray] = []
    miss: list[np.ndarray] = []
    for j, col in enumerate(matrix.columns):
        v = matrix.values[:, j]
        m = matrix.missing[:, j]
        if not col.is_categorical:
            names.append(col.name)
            source.append(col.name)
            blocks.append(v[:, None])
            miss.append(m[:, None])
            continue
        codes = v[~m]
        bad = (codes < 0) | (codes >= len(col.categories)) | (codes != np.round(codes))
        if bad.any():
            raise ValueError(f"unseen category code {codes[bad][0]!r} in column {col.name!r}")
        ind = np.zeros((n, len(col.categories)))
        rows = np.flatnonzero(~m)
        ind[rows, v[rows].astype(int)] = 1.0
        names += [f"{col.name}={c}" for c in col.categories]
        source += [col.name] * len(col.categories)
        blocks.append(ind)
        miss.append(np.repeat(m[:, None], len(col.categories), axis=1))
    return EncodedMatrix(
        tuple(names),
        tuple(source),
        np.hstack(blocks) if blocks else np.zeros((n, 0)),
        np.hstack(miss) if miss else np.zeros((n, 0), dtype=bool),
        matrix.row_ids,
    )
