import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oculodec.classify import (
    ClassifierSpec, TrainedModel, default_grid, grid_search, predict, predict_proba, train,
)
from oculodec.evaluate import auc_roc, make_loro, score_auc

KINDS = ("random_forest", "knn", "logistic", "lda")


def _blobs(seed, n=40, d=4, gap=6.0, k=2):
    r = np.random.default_rng(seed)
    y = np.repeat(np.arange(k), n // k)
    X = r.normal(size=(y.size, d))
    X[:, 0] += gap * y
    return X, y


@pytest.mark.parametrize("kind", KINDS)
def test_separable_blobs_score_one(kind):
    X, y = _blobs(0)
    model = train(ClassifierSpec(kind, n_estimators=25), X, y)
    assert score_auc(model, X, y) == 1.0
    np.testing.assert_allclose(predict_proba(model, X).sum(axis=1), 1.0, atol=1e-9)


def test_forest_is_deterministic():
    X, y = _blobs(1, gap=1.0)
    probe = np.random.default_rng(9).normal(size=(30, 4))
    a = predict_proba(train(ClassifierSpec(n_estimators=30, seed=4), X, y), probe)
    b = predict_proba(train(ClassifierSpec(n_estimators=30, seed=4), X, y), probe)
    assert np.array_equal(a, b)


def test_lda_without_signal_is_chance():
    aucs = []
    for seed in range(20):
        Xtr, ytr = _blobs(seed, n=100, gap=0.0)
        Xte, yte = _blobs(seed + 1000, n=100, gap=0.0)
        aucs.append(score_auc(train(ClassifierSpec("lda"), Xtr, ytr), Xte, yte))
    assert abs(np.mean(aucs) - 0.5) <= 0.05


def test_unanimous_forest_gives_probability_one():
    X, y = _blobs(2, gap=20.0)
    model = train(ClassifierSpec(n_estimators=15), X, y)
    p = predict_proba(model, [[30.0, 0, 0, 0]])
    assert p[0, 1] == 1.0


def test_knn_vote_fraction():
    X = np.array([[0.0], [0.1], [0.2], [0.3], [0.4], [5.0], [5.1]])
    y = np.array(["A", "A", "A", "B", "B", "B", "B"])
    model = train(ClassifierSpec("knn", k=5), X, y)
    p = predict_proba(model, [[0.0]])
    assert p[0, model.classes.index("A")] == pytest.approx(0.6)


def test_logistic_boundary_point():
    X = np.array([[-2.0], [-1.0], [-1.5], [1.0], [2.0], [1.5]])
    y = np.array([0, 0, 0, 1, 1, 1])
    model = train(ClassifierSpec("logistic"), X, y)
    assert abs(predict_proba(model, [[0.0]])[0, 1] - 0.5) <= 1e-6


def test_single_class_rejected():
    with pytest.raises(ValueError, match="two classes"):
        train(ClassifierSpec(), np.zeros((4, 2)), [1, 1, 1, 1])


def test_schema_mismatch_rejected():
    X, y = _blobs(3)
    model = train(ClassifierSpec("lda"), X, y, schema=("a", "b", "c", "d"))
    with pytest.raises(ValueError, match="schema"):
        predict_proba(model, X, schema=("a", "b", "c", "e"))
    with pytest.raises(ValueError, match="features"):
        predict_proba(model, X[:, :3])


def test_spec_validation():
    with pytest.raises(ValueError):
        ClassifierSpec("svm")
    with pytest.raises(ValueError):
        ClassifierSpec(seed=None)
    assert len(default_grid()) == 6


@pytest.mark.parametrize("kind", KINDS)
def test_model_json_round_trip(kind, tmp_path):
    X, y = _blobs(4, gap=1.0, k=3, n=60)
    model = train(ClassifierSpec(kind, n_estimators=10), X, y)
    back = TrainedModel.load(model.save(tmp_path / "m.json"))
    assert np.array_equal(predict_proba(back, X), predict_proba(model, X))
    assert (predict(back, X) == predict(model, X)).all()


def _runs(n, n_runs=3):
    return np.arange(n) % n_runs


def test_grid_of_one():
    X, y = _blobs(5, n=60, gap=1.0)
    spec = ClassifierSpec(n_estimators=10)
    res = grid_search([spec], X, y, make_loro(_runs(60)).splits(_runs(60)))
    assert res.best == spec and res.best_score == res.table[0]["mean_auc"]


def test_tie_prefers_shallower_then_smaller():
    y = np.arange(60) % 2
    X = 10.0 * y[:, None]
    grid = [ClassifierSpec(n_estimators=10, max_depth=8), ClassifierSpec(n_estimators=5, max_depth=4),
            ClassifierSpec(n_estimators=10, max_depth=4), ClassifierSpec(n_estimators=5)]
    res = grid_search(grid, X, y, make_loro(_runs(60)).splits(_runs(60)))
    assert {r["mean_auc"] for r in res.table} == {1.0}
    assert res.best == ClassifierSpec(n_estimators=5, max_depth=4)


def test_planted_grid_table():
    X, y = _blobs(7, n=90, gap=1.5)
    grid = [ClassifierSpec(n_estimators=n, max_depth=d) for n in (50, 200) for d in (4, None)]
    res = grid_search(grid, X, y, make_loro(_runs(90)).splits(_runs(90)))
    assert len(res.table) == 4
    assert all(len(r["fold_aucs"]) == 3 for r in res.table)
    assert res.best_score > 0.7


def test_single_class_fold_skipped():
    X, y = _blobs(8, n=60, gap=2.0)
    # run 0 holds only class 1, so its fold cannot be scored
    runs = np.where((y == 1) & (np.arange(60) < 40), 0, np.arange(60) % 3 + 1)
    folds = make_loro(runs).splits(runs)
    with pytest.warns(UserWarning, match="skipped"):
        res = grid_search([ClassifierSpec(n_estimators=5)], X, y, folds)
    assert res.table[0]["skipped"] >= 1
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with pytest.raises(ValueError, match="every fold"):
            grid_search([ClassifierSpec(n_estimators=5)], X, y, folds[:1])


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), col=st.integers(0, 3))
def test_forest_invariant_to_increasing_transform(seed, col):
    X, y = _blobs(seed % 1000, gap=1.0)
    probe = np.random.default_rng(seed).normal(size=(20, 4))
    spec = ClassifierSpec(n_estimators=10, seed=seed % 97)
    base = predict_proba(train(spec, X, y), probe)
    g = lambda v: np.exp(v / 3.0) + v ** 3  # noqa: E731
    X2, P2 = X.copy(), probe.copy()
    X2[:, col], P2[:, col] = g(X2[:, col]), g(P2[:, col])
    assert np.array_equal(predict_proba(train(spec, X2, y), P2), base)


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_forest_invariant_to_row_permutation(seed):
    X, y = _blobs(3, gap=1.0, k=3, n=45)
    probe = np.random.default_rng(1).normal(size=(20, 4))
    spec = ClassifierSpec(n_estimators=10, seed=2)
    perm = np.random.default_rng(seed).permutation(y.size)
    assert np.array_equal(predict_proba(train(spec, X[perm], y[perm]), probe),
                          predict_proba(train(spec, X, y), probe))


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), kind=st.sampled_from(KINDS))
def test_probabilities_sum_to_one(seed, kind):
    X, y = _blobs(seed % 500, n=30, gap=0.5, k=3)
    probe = np.random.default_rng(seed).normal(0, 5, size=(10, 4))
    p = predict_proba(train(ClassifierSpec(kind, n_estimators=5), X, y), probe)
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-9)
    assert np.all(p >= 0)
    assert auc_roc(p[:, 0], (np.arange(10) % 2)) >= 0.0
