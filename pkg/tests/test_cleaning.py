from __future__ import annotations

import pytest

from chronicdx.cleaning import (
    clean,
    filter_constant_sleep,
    filter_min_upload_days,
    filter_missing_critical_profile,
)
from chronicdx.domain import Cohort, DailyRecord
from chronicdx.synthgen import GeneratorConfig, ViolationSpec, generate_study_cohort

from test_domain import profile


def cohort_with_days(n_days: int, sleep=None, pid="P0001", **profile_kw) -> Cohort:
    sleep = sleep if sleep is not None else [None] * n_days
    records = [DailyRecord(pid, d, steps=1000 + d, sleep_minutes=sleep[d]) for d in range(n_days)]
    return Cohort([profile(pid, **profile_kw)], records)


@pytest.mark.parametrize("days, kept", [(9, False), (10, True), (11, True)])
def test_minimum_upload_days_boundary(days, kept):
    out, removed = filter_min_upload_days(cohort_with_days(days))
    assert (len(out) == 1) is kept and (removed == set()) is kept


def test_empty_days_do_not_count_as_uploads():
    c = cohort_with_days(9)
    c = Cohort(c.profiles, c.records + (DailyRecord("P0001", 50),))
    assert filter_min_upload_days(c)[1] == {"P0001"}


def test_empty_cohort_passes_through():
    out, report = clean(Cohort([], []))
    assert len(out) == 0 and report.counts == (0, 0, 0)


@pytest.mark.parametrize("field", ["age", "gender", "bmi"])
def test_missing_critical_profile_field_removes(field):
    assert filter_missing_critical_profile(cohort_with_days(12, **{field: None}))[1] == {"P0001"}


def test_missing_drinking_status_is_not_critical():
    assert filter_missing_critical_profile(cohort_with_days(12, drinking=None))[1] == set()


def test_constant_sleep_rules():
    assert filter_constant_sleep(cohort_with_days(15, [440.0] * 15))[1] == {"P0001"}
    assert filter_constant_sleep(cohort_with_days(15, [440.0] * 14 + [441.0]))[1] == set()
    assert filter_constant_sleep(cohort_with_days(8, [440.0] * 8))[1] == set()
    # exactly ten identical days is not "more than ten"
    assert filter_constant_sleep(cohort_with_days(10, [440.0] * 10))[1] == set()


def test_each_removal_is_attributed_to_the_first_rule():
    c = cohort_with_days(5, [440.0] * 5, bmi=None)
    _, report = clean(c, constant_sleep_days=3)
    assert report.counts == (1, 0, 0)


def test_injected_violations_are_recovered_exactly():
    cohort, ids = generate_study_cohort(GeneratorConfig(n_participants=160, seed=8), ViolationSpec(20, 4, 5))
    kept, report = clean(cohort)
    assert report.counts == (20, 4, 5)
    assert report.removed_short_upload == ids.short_upload
    assert report.removed_missing_profile == ids.missing_profile
    assert report.removed_constant_sleep == ids.constant_sleep
    assert set(kept.ids) == set(cohort.ids) - ids.all
    assert report.retained == 131


def test_report_text_lists_counts_and_ids():
    c = Cohort([profile("P1"), profile("P2")],
               [DailyRecord("P1", d, steps=1) for d in range(12)] + [DailyRecord("P2", 0, steps=1)])
    _, report = clean(c)
    text = report.to_text()
    assert "removed_short_upload\t1" in text
    assert "removed_total\t1\t50.00%" in text
    assert "short_upload_ids\tP2" in text
    assert text.endswith("\n")
