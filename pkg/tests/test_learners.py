from __future__ import annotations

import json

import numpy as np
import pytest

from chronicdx import learners
from chronicdx.learners import ClassifierSpec, SchemaMismatchError, TrainedModel
from chronicdx.learners.boosting import (
    logistic_grad_hess,
    logistic_loss,
    softmax_cross_entropy,
    softmax_grad_hess,
)

KINDS = ("RF", "GBT", "KNN", "SVM")
FAST = {"RF": {"n_trees": 30}, "GBT": {"n_rounds": 30}, "KNN": {}, "SVM": {}}


def blobs(n=200, gap_sigma=2.0, seed=0, n_features=2):
    """Two Gaussian blobs whose means differ by ``gap_sigma`` standard deviations per axis, plus a margin."""
    rng = np.random.default_rng(seed)
    y = np.repeat(["a", "b"], n // 2)
    X = rng.normal(0, 0.25, (n, n_features))
    X[y == "b"] += gap_sigma
    return X, y


def separated_blobs(n=200, seed=0):
    """Unit-variance blobs truncated so the classes are split by an empty band 2 sigma wide."""
    rng = np.random.default_rng(seed)
    y = np.repeat(["a", "b"], n // 2)
    X = rng.normal(0, 1, (n, 2))
    X[:, 0] = np.clip(X[:, 0], -3.0, 2.0)
    X[y == "b", 0] = -X[y == "b", 0] + 6.0
    return X, y


def three_class(n=300, seed=1):
    rng = np.random.default_rng(seed)
    centers = np.array([[0, 0], [4, 0], [0, 4]], dtype=float)
    y = rng.integers(0, 3, n)
    return centers[y] + rng.normal(0, 0.5, (n, 2)), np.array(["no_DM", "pre_DM", "DM"], dtype=object)[y]


def spec(kind, **kw):
    return ClassifierSpec(kind, {**FAST[kind], **kw}, seed=11)


def accuracy(model, X, y):
    return np.mean(np.asarray(learners.predict(model, X), dtype=object) == y)


@pytest.mark.parametrize("kind", KINDS)
def test_single_class_is_rejected(kind):
    with pytest.raises(ValueError, match="single class"):
        learners.fit(spec(kind), np.zeros((4, 2)), ["x"] * 4)


def test_forest_separates_blobs():
    X, y = separated_blobs()
    assert accuracy(learners.fit(spec("RF"), X, y), X, y) >= 0.95


def test_boosting_drives_training_error_down():
    X, y = blobs(gap_sigma=0.5, seed=3)
    model = learners.fit(spec("GBT", n_rounds=200, max_depth=3), X, y)
    assert accuracy(model, X, y) >= 0.95


def test_linear_svm_separates_blobs():
    X, y = separated_blobs()
    assert accuracy(learners.fit(spec("SVM"), X, y), X, y) >= 0.95


def test_one_neighbor_reproduces_training_labels():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(80, 3))
    y = rng.choice(["p", "q", "r"], 80)
    model = learners.fit(spec("KNN", k=1), X, y)
    assert learners.predict(model, X) == list(y)


@pytest.mark.parametrize("kind", KINDS)
def test_multiclass_fit(kind):
    X, y = three_class()
    model = learners.fit(spec(kind), X, y)
    assert model.classes == ("DM", "no_DM", "pre_DM")
    assert accuracy(model, X, y) >= 0.9


@pytest.mark.parametrize("kind", KINDS)
def test_probability_rows_and_argmax_consistency(kind):
    X, y = three_class()
    model = learners.fit(spec(kind), X, y)
    p = learners.predict_proba(model, X)
    assert np.allclose(p.sum(axis=1), 1.0, atol=1e-9)
    assert [model.classes[i] for i in p.argmax(axis=1)] == learners.predict(model, X)


@pytest.mark.parametrize("kind", KINDS)
def test_empty_input_and_row_permutation(kind):
    X, y = blobs(gap_sigma=0.6, seed=4)
    model = learners.fit(spec(kind), X, y)
    assert learners.predict(model, np.zeros((0, 2))) == []
    perm = np.random.default_rng(0).permutation(len(X))
    assert learners.predict(model, X[perm]) == [learners.predict(model, X)[i] for i in perm]


def test_forest_scores_are_vote_fractions():
    X, y = blobs(gap_sigma=0.3, seed=5)
    model = learners.fit(spec("RF", n_trees=10, max_depth=2), X, y)
    p = learners.predict_proba(model, X)
    assert np.array_equal(p * 10, np.round(p * 10))
    assert np.array_equal(p, model.estimator.votes(X) / 10)


def test_single_tree_without_bootstrap_fits_training_data_exactly():
    X, y = blobs(gap_sigma=0.3, seed=6)
    model = learners.fit(spec("RF", n_trees=1, bootstrap=False, features_per_split=2), X, y)
    assert accuracy(model, X, y) == 1.0


def finite_difference(f, x, eps=1e-6):
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        up, dn = x.copy(), x.copy()
        up[idx] += eps
        dn[idx] -= eps
        g[idx] = (f(up) - f(dn)) / (2 * eps)
    return g


def test_softmax_gradient_and_hessian_match_finite_differences():
    rng = np.random.default_rng(0)
    logits = rng.normal(size=(5, 3))
    onehot = np.eye(3)[rng.integers(0, 3, 5)]
    g, h = softmax_grad_hess(logits, onehot)
    assert np.allclose(g, finite_difference(lambda z: softmax_cross_entropy(z, onehot), logits), atol=1e-6)
    for i, k in np.ndindex(logits.shape):
        def gk(z, i=i, k=k):
            return softmax_grad_hess(z, onehot)[0][i, k]
        assert h[i, k] == pytest.approx(finite_difference(gk, logits)[i, k], abs=1e-6)


def test_logistic_gradient_matches_finite_differences():
    rng = np.random.default_rng(1)
    m = rng.normal(size=6)
    y = rng.integers(0, 2, 6).astype(float)
    g, h = logistic_grad_hess(m, y)
    assert np.allclose(g, finite_difference(lambda z: logistic_loss(z, y), m), atol=1e-6)
    assert np.allclose(h, finite_difference(lambda z: logistic_grad_hess(z, y)[0].sum(), m), atol=1e-6)


@pytest.mark.parametrize("data", [blobs(gap_sigma=0.4, seed=7), three_class()])
def test_boosting_loss_never_increases(data):
    X, y = data
    model = learners.fit(spec("GBT", n_rounds=50, learning_rate=0.3), X, y)
    curve = model.estimator.loss_curve_
    assert len(curve) == 51 and np.all(np.diff(curve) <= 1e-9)


def test_one_stump_round_matches_newton_step():
    X = np.array([[0.0], [0.0], [0.0], [1.0], [1.0]])
    y = np.array(["n", "y", "n", "y", "y"], dtype=object)
    lam, lr = 1.0, 0.5
    model = learners.fit(spec("GBT", n_rounds=1, max_depth=1, learning_rate=lr, l2_leaf_penalty=lam,
                              min_child_weight=0.0), X, y)
    t = (y == "y").astype(float)
    base = np.log(0.6 / 0.4)
    p = 1 / (1 + np.exp(-base))
    g, h = p - t, np.full(5, p * (1 - p))
    left = -g[:3].sum() / (h[:3].sum() + lam) * lr
    right = -g[3:].sum() / (h[3:].sum() + lam) * lr
    got = model.estimator.decision_function(np.array([[0.0], [1.0]]))[:, 0]
    assert got == pytest.approx([base + left, base + right], abs=1e-12)


@pytest.mark.parametrize("kind", ["RF", "GBT"])
def test_tree_models_ignore_a_constant_column(kind):
    X, y = blobs(gap_sigma=0.5, seed=8, n_features=3)
    X[:, 1] = 7.0
    model = learners.fit(spec(kind), X, y)
    assert 1 not in model.estimator.used_features()


@pytest.mark.parametrize("kind", KINDS)
def test_fit_is_deterministic_and_serialization_round_trips(kind):
    X, y = three_class()
    a = learners.fit(spec(kind), X, y)
    b = learners.fit(spec(kind), X, y)
    assert a.dumps() == b.dumps()
    back = TrainedModel.loads(a.dumps())
    assert back.dumps() == a.dumps()
    assert np.array_equal(learners.predict_proba(back, X), learners.predict_proba(a, X))
    doc = json.loads(a.dumps())
    assert doc["format_version"] == learners.MODEL_FORMAT_VERSION and doc["spec"]["kind"] == kind


def test_seed_changes_random_forest():
    X, y = blobs(gap_sigma=0.3, seed=9)
    a = learners.fit(ClassifierSpec("RF", {"n_trees": 5}, seed=1), X, y)
    b = learners.fit(ClassifierSpec("RF", {"n_trees": 5}, seed=2), X, y)
    assert a.dumps() != b.dumps()


def test_model_file_version_and_fingerprint_checks():
    X, y = blobs()
    doc = json.loads(learners.fit(spec("KNN"), X, y).dumps())
    with pytest.raises(ValueError, match="format version"):
        TrainedModel.from_dict({**doc, "format_version": 99})
    with pytest.raises(SchemaMismatchError):
        TrainedModel.from_dict({**doc, "columns": ["u", "v"]})


def test_schema_mismatch_on_prediction():
    X, y = blobs()
    model = learners.fit(spec("KNN"), X, y, columns=["a", "b"])
    with pytest.raises(SchemaMismatchError):
        learners.predict(model, X, columns=["a", "c"])
    with pytest.raises(SchemaMismatchError):
        learners.predict(model, np.zeros((2, 3)), columns=["a", "b", "c"])


def test_spec_validation():
    with pytest.raises(ValueError, match="unknown classifier"):
        ClassifierSpec("NB")
    with pytest.raises(ValueError, match="n_trees"):
        ClassifierSpec("RF", {"n_trees": 0})
    with pytest.raises(ValueError, match="learning_rate"):
        ClassifierSpec("GBT", {"learning_rate": 0})
    assert ClassifierSpec("KNN").hyperparameters == learners.DEFAULT_HYPERPARAMETERS["KNN"]
