from __future__ import annotations

import json

import pytest

from chronicdx.config import (
    ConfigError,
    PipelineConfig,
    dump_config,
    from_dict,
    generator_settings,
    load_config,
    validate,
)


def test_defaults():
    cfg = load_config(None)
    assert cfg.seed == 42
    assert cfg.generator.n_participants == 629
    assert cfg.imputation.k == 200
    assert cfg.imputation.anchor_attributes == ["Age", "Gender", "Ethnicity", "BMI"]
    assert (cfg.cv.k_outer, cfg.cv.k_inner) == (5, 5)
    assert cfg.expert_rule.systolic_threshold == 140.0
    assert cfg.expert_rule.diastolic_threshold == 90.0


def test_yaml_and_json_agree(tmp_path):
    doc = {"seed": 7, "generator": {"n_participants": 80}, "cv": {"k_outer": 3}}
    (tmp_path / "c.json").write_text(json.dumps(doc))
    (tmp_path / "c.yaml").write_text("seed: 7\ngenerator:\n  n_participants: 80\ncv:\n  k_outer: 3\n")
    a, b = load_config(tmp_path / "c.json"), load_config(tmp_path / "c.yaml")
    assert a == b
    assert a.digest() == b.digest()


def test_dump_round_trips(tmp_path):
    cfg = from_dict({"seed": 3, "explain": {"n_permutations": 12}})
    (tmp_path / "c.yaml").write_text(dump_config(cfg))
    assert load_config(tmp_path / "c.yaml") == cfg


@pytest.mark.parametrize("doc, where", [
    ({"sed": 1}, "unknown key sed"),
    ({"cv": {"folds": 3}}, "unknown key cv.folds"),
    ({"explain": {"model": "GBT", "rank": 2}}, "unknown key explain.rank"),
])
def test_unknown_keys_rejected(doc, where):
    with pytest.raises(ConfigError, match=where):
        from_dict(doc)


def test_generator_seed_rejected():
    with pytest.raises(ConfigError, match="top-level seed"):
        from_dict({"generator": {"seed": 5}})


def test_top_level_seed_reaches_generator():
    assert generator_settings(from_dict({"seed": 11})).seed == 11


@pytest.mark.parametrize("doc", [
    {"seed": "42"},
    {"seed": True},
    {"cv": {"k_outer": 1}},
    {"workers": 0},
    {"imputation": {"k": 0}},
    {"imputation": {"methods": ["median"]}},
    {"diseases": ["asthma"]},
    {"diseases": []},
    {"models": {"kinds": ["MLP"]}},
    {"models": {"grids": {"GBT": {"depth": [3]}}}},
    {"models": {"grids": {"GBT": {"max_depth": []}}}},
    {"explain": {"n_permutations": 0}},
    {"explain": {"background_size": 0}},
    {"explain": {"rows": "some"}},
    {"explain": {"figure_format": "gif"}},
    {"generator": {"n_participants": 0}},
    {"cv": 5},
])
def test_invalid_values_rejected(doc):
    with pytest.raises(ConfigError):
        from_dict(doc)


def test_partial_grid_extends_defaults():
    cfg = from_dict({"models": {"grids": {"KNN": {"k": [3, 5]}}}})
    assert cfg.models.grids["KNN"] == {"k": [3, 5]}
    assert cfg.models.grids["GBT"] == PipelineConfig().models.grids["GBT"]


def test_digest_ignores_workers_and_output_dir():
    cfg = PipelineConfig()
    assert cfg.digest() == cfg.replace(workers=8, output_dir="elsewhere").digest()
    assert cfg.digest() != cfg.replace(seed=43).digest()


def test_overrides_are_validated():
    with pytest.raises(ConfigError):
        validate(PipelineConfig().replace(workers=-2))


def test_unreadable_config(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "absent.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("seed: [1,\n")
    with pytest.raises(ConfigError, match="cannot parse"):
        load_config(bad)
    scalar = tmp_path / "scalar.yaml"
    scalar.write_text("42\n")
    with pytest.raises(ConfigError, match="mapping"):
        load_config(scalar)
