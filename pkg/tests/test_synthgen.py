from __future__ import annotations

from collections import Counter

import numpy as np
import pytest
from scipy import stats

from chronicdx.domain import labels_for, validate_cohort
from chronicdx.features import build_feature_matrix
from chronicdx.synthgen import (
    GeneratorConfig,
    ViolationSpec,
    generate_cohort,
    generate_cohort_with_latent,
    generate_study_cohort,
    inject_violations,
    truncated_normal,
)


@pytest.fixture(scope="module")
def default_cohort():
    return generate_cohort_with_latent(GeneratorConfig())


def test_default_cohort_size_and_hypertension_share(default_cohort):
    cohort, _ = default_cohort
    assert len(cohort) == 629
    share = np.mean([p.hypertension_label for p in cohort.profiles])
    assert 0.536 <= share <= 0.576


def test_generated_cohort_is_well_formed(default_cohort):
    cohort, _ = default_cohort
    assert validate_cohort(cohort.profiles, cohort.records) == []
    assert all(p.age is not None and p.gender and p.bmi for p in cohort.profiles)


def test_same_seed_is_bit_identical_and_seed_matters():
    a = generate_cohort(GeneratorConfig(n_participants=25, seed=5))
    b = generate_cohort(GeneratorConfig(n_participants=25, seed=5))
    c = generate_cohort(GeneratorConfig(n_participants=25, seed=6))
    assert a == b
    assert a != c


def test_ten_participants():
    small = generate_cohort(GeneratorConfig(n_participants=10, seed=9))
    assert len(small) == 10


def test_planted_signal_is_learnable_by_the_latent_oracle(default_cohort):
    cohort, latent = default_cohort
    for disease in ("diabetes", "hyperlipidemia", "hypertension"):
        y = labels_for(cohort.profiles, disease).as_array()
        acc = np.mean(np.asarray(latent.bayes_predict(disease), dtype=object) == y)
        assert acc >= 0.85, disease


def test_zero_signal_makes_labels_independent_of_features():
    cohort = generate_cohort(GeneratorConfig(signal_strength=0.0))
    m = build_feature_matrix(cohort)
    y = np.array([p.hypertension_label for p in cohort.profiles], dtype=float)
    for name in ("SBP", "BMI", "DBP_L"):
        j = m.column_index(name)
        obs = ~m.missing[:, j]
        r, p = stats.pearsonr(m.values[obs, j], y[obs])
        assert p > 0.001, (name, r)


def test_missing_sleep_never_blocks_a_constant_sleep_check(default_cohort):
    cohort, _ = default_cohort
    days = Counter(r.participant_id for r in cohort.records if r.is_upload())
    assert min(days.values()) >= 10


def test_injection_counts_and_ids():
    base = generate_cohort(GeneratorConfig(n_participants=503))
    cohort, ids = inject_violations(base, ViolationSpec(113, 6, 7), seed=1)
    assert len(cohort) == 629
    assert (len(ids.short_upload), len(ids.missing_profile), len(ids.constant_sleep)) == (113, 6, 7)
    assert len(ids.all) == 126
    assert len(set(cohort.ids)) == 629


def test_zero_injection_leaves_cohort_unchanged():
    base = generate_cohort(GeneratorConfig(n_participants=20))
    cohort, ids = inject_violations(base, ViolationSpec(0, 0, 0), seed=1)
    assert cohort is base and not ids.all


def test_single_short_uploader_has_at_most_nine_days():
    base = generate_cohort(GeneratorConfig(n_participants=20))
    cohort, ids = inject_violations(base, ViolationSpec(1, 0, 0), seed=4)
    (pid,) = ids.short_upload
    days = {r.day_index for r in cohort.records if r.participant_id == pid and r.is_upload()}
    assert 1 <= len(days) <= 9


def test_study_cohort_totals_the_requested_size():
    cohort, ids = generate_study_cohort(GeneratorConfig(n_participants=60, seed=2), ViolationSpec(5, 1, 1))
    assert len(cohort) == 60 and len(ids.all) == 7
    with pytest.raises(ValueError, match="cannot host"):
        generate_study_cohort(GeneratorConfig(n_participants=5), ViolationSpec(5, 1, 1))


def test_config_validation():
    with pytest.raises(ValueError, match="signal_strength"):
        GeneratorConfig(signal_strength=1.5).validate()
    with pytest.raises(ValueError, match="sum to"):
        GeneratorConfig(class_ratios={"hypertension": {"no": 0.5, "yes": 0.6}}).validate()
    with pytest.raises(ValueError):
        ViolationSpec(-1, 0, 0)


def test_truncated_normal_respects_bounds():
    rng = np.random.default_rng(0)
    x = truncated_normal(rng, 0.0, 1.0, -0.5, 0.5, size=2000)
    assert x.min() >= -0.5 and x.max() <= 0.5
