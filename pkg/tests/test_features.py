from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chronicdx.domain import ActivityEntry, BGReading, BPReading, Cohort, DailyRecord
from chronicdx.features import (
    BG_FAMILY,
    FEATURE_COLUMNS,
    FEATURE_NAMES,
    INTENSITY_CODES,
    activity_score,
    bg_gap,
    build_feature_matrix,
    change_feature,
    fold_rare_activities,
    matrix_from_cells,
    one_hot_encode,
    participant_features,
    split_halves,
)

from test_domain import profile


def days(n):
    return [DailyRecord("P1", d, steps=100 * d) for d in range(n)]


@pytest.mark.parametrize("n, former, latter", [(4, 2, 2), (5, 3, 2), (1, 1, 0), (0, 0, 0)])
def test_half_split_sizes(n, former, latter):
    h = split_halves(list(reversed(days(n))))
    assert (len(h.former), len(h.latter)) == (former, latter)
    assert [r.day_index for r in h.former + h.latter] == list(range(n))


def test_change_and_gap_values():
    assert change_feature(120.0, 130.0) == 10.0
    assert change_feature(7.5, 7.5) == 0.0
    assert change_feature(None, 130.0) is None
    assert bg_gap(5.0, 8.0) == 3.0
    assert bg_gap(8.0, 5.0) == 3.0
    assert bg_gap(6.0, 6.0) == 0.0
    assert bg_gap(6.0, None) is None


def uploads_of(kind, n_participants):
    return [DailyRecord(f"P{i}", 0, activities=(ActivityEntry(kind, 30.0),)) for i in range(n_participants)]


@pytest.mark.parametrize("kind, n, expect", [("Elliptical", 46, "Others"), ("Walking", 315, "Walking"),
                                             ("Cycling", 50, "Cycling"), ("Swimming", 49, "Others")])
def test_rare_activity_folding(kind, n, expect):
    out = fold_rare_activities(uploads_of(kind, n), 50)
    assert {a.kind for r in out for a in r.activities} == {expect}


def test_activity_score_examples():
    jog = [DailyRecord("P1", d, activities=(ActivityEntry("Jogging", m),)) for d, m in enumerate([20, 40, 30, 30])]
    assert activity_score(jog) == 720.0
    mixed = [DailyRecord("P1", d, activities=(ActivityEntry("Walking", 30.0),)) for d in range(10)]
    mixed += [DailyRecord("P1", 20 + d, activities=(ActivityEntry("Housework", 60.0),)) for d in range(5)]
    assert activity_score(mixed) == 1800.0
    assert activity_score(days(3)) is None
    with pytest.raises(ValueError, match="intensity code"):
        activity_score([DailyRecord("P1", 0, activities=(ActivityEntry("Rowing", 5.0),))])


def test_participant_without_glucose_has_missing_bg_family():
    row = participant_features(profile("P1"), days(12))
    for name in BG_FAMILY:
        assert row[FEATURE_NAMES.index(name)] is None


def test_bp_only_in_former_half():
    recs = days(10)
    recs[1] = DailyRecord("P1", 1, steps=5, bp_readings=(BPReading(130.0, 80.0, 420), BPReading(140.0, 90.0, 1200)))
    row = dict(zip(FEATURE_NAMES, participant_features(profile("P1"), recs)))
    for name in ("SBP_L", "SBP_C", "DBP_L", "DBP_C"):
        assert row[name] is None
    assert row["SBP"] == 135.0 and row["SBP_F"] == 135.0 and row["DBP"] == 85.0


def test_glucose_features():
    recs = days(4)
    recs[0] = DailyRecord("P1", 0, bg_readings=(BGReading(5.0, "before_meal", 400), BGReading(9.0, "after_meal", 600)))
    recs[3] = DailyRecord("P1", 3, bg_readings=(BGReading(6.0, "before_meal", 400),))
    row = dict(zip(FEATURE_NAMES, participant_features(profile("P1"), recs)))
    assert row["BG"] == pytest.approx(20.0 / 3)
    assert (row["BG_BM"], row["BG_AM"], row["BG_C"]) == (5.5, 9.0, 3.5)


def test_step_and_sleep_counts():
    recs = [DailyRecord("P1", d, steps=1000, sleep_minutes=400.0 if d < 3 else None) for d in range(6)]
    row = dict(zip(FEATURE_NAMES, participant_features(profile("P1"), recs)))
    assert (row["Step_Count"], row["Step_F_Count"], row["Step_L_Count"], row["Step_C_Count"]) == (6.0, 3.0, 3.0, 0.0)
    assert (row["Sleep_Count"], row["Sleep_F_Count"], row["Sleep_L_Count"]) == (3.0, 3.0, None)


def test_schema_has_thirty_five_attributes_in_order():
    assert len(FEATURE_COLUMNS) == 35
    assert FEATURE_NAMES[:4] == ("Gender", "Age", "Ethnicity", "BMI")
    assert FEATURE_NAMES[6] == "BG" and FEATURE_NAMES[10] == "SBP"
    assert FEATURE_NAMES[18] == "Step" and FEATURE_NAMES[26] == "Sleep" and FEATURE_NAMES[34] == "Activity"


def one_row(**cells):
    row = [cells.get(c.name) for c in FEATURE_COLUMNS]
    return matrix_from_cells(FEATURE_COLUMNS, [row], ["a"])


def test_one_hot_gender_and_ethnicity():
    enc = one_hot_encode(one_row(Gender="female", Ethnicity="Malay"))
    g = [j for j, s in enumerate(enc.source) if s == "Gender"]
    e = [j for j, s in enumerate(enc.source) if s == "Ethnicity"]
    assert enc.values[0, g].tolist() == [1.0, 0.0]
    assert enc.values[0, e].tolist() == [0.0, 1.0, 0.0, 0.0, 0.0, 0.0]
    assert [name for name, _ in enc.groups()] == list(FEATURE_NAMES)


def test_unseen_category_is_an_error():
    with pytest.raises(ValueError, match="unseen category"):
        one_row(Gender="unknown")


def test_feature_matrix_from_cohort(small_cohort, small_matrix):
    assert small_matrix.shape == (len(small_cohort), 35)
    assert small_matrix.row_ids == tuple(small_cohort.ids)
    frac = small_matrix.missing_fraction()
    assert frac["Gender"] == 0.0 and frac["BG"] > 0.3


def test_change_columns_equal_absolute_difference(small_matrix):
    for fam in ("SBP", "DBP", "Step", "Sleep"):
        f, l, c = (small_matrix.column_index(f"{fam}_{s}") for s in "FLC")
        obs = ~small_matrix.missing[:, c]
        assert np.array_equal(small_matrix.missing[:, c], small_matrix.missing[:, f] | small_matrix.missing[:, l])
        diff = np.abs(small_matrix.values[obs, f] - small_matrix.values[obs, l])
        assert np.array_equal(small_matrix.values[obs, c], diff)


activity = st.builds(ActivityEntry, st.sampled_from(sorted(INTENSITY_CODES)),
                     st.floats(0.5, 300.0, allow_nan=False))


@settings(max_examples=150, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 40), st.lists(activity, min_size=1, max_size=3)), min_size=1, max_size=12))
def test_activity_score_matches_direct_sum(entries):
    by_day = {}
    for d, acts in entries:
        by_day.setdefault(d, []).extend(acts)
    recs = [DailyRecord("P1", d, activities=tuple(a)) for d, a in by_day.items()]
    expected = 0.0
    for kind in {a.kind for a in sum(by_day.values(), [])}:
        daily = [sum(a.duration_minutes for a in acts if a.kind == kind) for acts in by_day.values()]
        daily = [m for m in daily if m > 0]
        expected += INTENSITY_CODES[kind] * len(daily) * (sum(daily) / len(daily))
    assert math.isclose(activity_score(recs), expected, rel_tol=1e-9)


def test_build_feature_matrix_respects_custom_intensity():
    recs = [DailyRecord("P1", d, steps=1, activities=(ActivityEntry("Walking", 10.0),)) for d in range(10)]
    m = build_feature_matrix(Cohort([profile("P1")], recs), True, 1, {**INTENSITY_CODES, "Walking": 1.0})
    assert m.cell(0, "Activity") == 100.0
