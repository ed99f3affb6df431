from __future__ import annotations

import numpy as np
import pytest

from chronicdx.domain import (
    BPReading,
    Cohort,
    DailyRecord,
    FeatureMatrix,
    LabelVector,
    ParticipantProfile,
    labels_for,
    schema_fingerprint,
    validate_cohort,
)
from chronicdx.features import FEATURE_COLUMNS


def profile(pid="P0001", **kw):
    base = dict(id=pid, gender="female", age=60, ethnicity="Chinese", bmi=24.0, smoking="non-smoker",
                drinking="non-drinker", diabetes_label="no_DM", hyperlipidemia_label=False, hypertension_label=True)
    base.update(kw)
    return ParticipantProfile(**base)


def test_well_formed_two_participant_cohort_has_no_violations():
    profiles = [profile("P0001"), profile("P0002", gender="male")]
    records = [DailyRecord("P0001", 0, steps=4000), DailyRecord("P0002", 0, sleep_minutes=420.0),
               DailyRecord("P0002", 1, bp_readings=(BPReading(130.0, 80.0, 480),))]
    assert validate_cohort(profiles, records) == []


def test_inverted_blood_pressure_is_one_violation():
    records = [DailyRecord("P0001", 0, bp_readings=(BPReading(80.0, 120.0, 480),))]
    out = validate_cohort([profile()], records)
    assert [v.kind for v in out] == ["systolic ≤ diastolic"]


def test_duplicate_id_is_one_violation():
    out = validate_cohort([profile("P0001"), profile("P0001")], [])
    assert [v.kind for v in out] == ["duplicate id"]


def test_duplicate_day_and_bad_enum_are_reported():
    records = [DailyRecord("P0001", 3, steps=1), DailyRecord("P0001", 3, steps=2)]
    kinds = [v.kind for v in validate_cohort([profile(smoking="vaper")], records)]
    assert kinds == ["invalid smoking", "duplicate day"]


def test_upload_day_requires_a_field():
    assert not DailyRecord("P0001", 0).is_upload()
    assert DailyRecord("P0001", 0, steps=0).is_upload()


def test_profile_labels():
    p = profile(diabetes_label="DM", hyperlipidemia_label=True, hypertension_label=False)
    assert (p.label("diabetes"), p.label("hyperlipidemia"), p.label("hypertension")) == ("DM", "yes", "no")
    with pytest.raises(KeyError):
        p.label("gout")


def test_cohort_subset_and_grouping():
    c = Cohort([profile("P0001"), profile("P0002")],
               [DailyRecord("P0002", 5, steps=1), DailyRecord("P0002", 1, steps=2), DailyRecord("P0001", 0, steps=3)])
    assert [r.day_index for r in c.records_by_participant()["P0002"]] == [1, 5]
    sub = c.subset(["P0002"])
    assert sub.ids == ["P0002"] and len(sub.records) == 2


def test_feature_matrix_masks_values_and_rejects_nan():
    cols = FEATURE_COLUMNS[:2]
    m = FeatureMatrix(cols, np.array([[1.0, 7.0]]), np.array([[False, True]]), ("a",))
    assert m.cell(0, "Gender") == "male" and m.cell(0, "Age") is None
    assert m.values[0, 1] == 0.0
    with pytest.raises(ValueError, match="non-finite"):
        FeatureMatrix(cols, np.array([[np.nan, 1.0]]), np.array([[False, False]]), ("a",))
    with pytest.raises(ValueError, match="shape mismatch"):
        FeatureMatrix(cols, np.zeros((2, 2)), np.zeros((2, 2), bool), ("a",))
    with pytest.raises(ValueError):
        m.values[0, 0] = 3.0


def test_schema_fingerprint_tracks_names_and_order():
    a = schema_fingerprint(["x", "y"])
    assert a == schema_fingerprint(["x", "y"])
    assert a != schema_fingerprint(["y", "x"])
    assert schema_fingerprint(FEATURE_COLUMNS) != schema_fingerprint([c.name for c in FEATURE_COLUMNS])


def test_label_vector_validation():
    v = LabelVector("hypertension", ("yes", "no"))
    assert v.row_ids == ("0", "1") and v.positive_class == "yes"
    with pytest.raises(ValueError, match="not valid"):
        LabelVector("hypertension", ("maybe",))
    with pytest.raises(ValueError, match="row ids"):
        LabelVector("hypertension", ("yes",), row_ids=("a", "b"))


def test_labels_for_follows_requested_row_order():
    ps = [profile("A", diabetes_label="DM"), profile("B", diabetes_label="pre_DM")]
    v = labels_for(ps, "diabetes", ["B", "A"])
    assert v.values == ("pre_DM", "DM") and v.row_ids == ("B", "A")
