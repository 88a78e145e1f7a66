import numpy as np
import pytest

from sdrforest.errors import DimensionMismatch, EmptyDataset, NoOobSamples, NonFiniteInput
from sdrforest.eval import SimulationSpec, gen_simulation
from sdrforest.forest import (bootstrap_counts, fit_forest, kernel_from_leaves, kernel_weights,
                              oob_mse, permutation_importance)
from sdrforest.io import dumps_model
from sdrforest.tree import FitParams, route

from oracles import kernel_bruteforce


@pytest.fixture(scope="module")
def sim1():
    train = gen_simulation(SimulationSpec("sim1", 600, seed=11))
    forest = fit_forest(train.X, train.y, FitParams(m_try=2), n_trees=30, seed=5)
    return train, forest


def test_constant_response_predicts_constant():
    X = np.random.default_rng(0).standard_normal((40, 3))
    f = fit_forest(X, np.full(40, -1.25), n_trees=5)
    assert (f.predict(np.random.default_rng(1).standard_normal((10, 3))) == -1.25).all()


def test_single_tree_single_leaf_predicts_mean():
    rng = np.random.default_rng(2)
    X, y = rng.standard_normal((20, 2)), rng.standard_normal(20)
    f = fit_forest(X, y, FitParams(n_min=50), n_trees=1, seed=3)
    counts = bootstrap_counts(3, 0, 20)
    assert f.predict(X[:1])[0] == pytest.approx(np.repeat(y, counts).mean())
    assert (f.kernel(X[:3], X) == 1.0).all()


def test_bootstrap_is_n_draws(sim1):
    _, f = sim1
    assert (f.inbag.sum(axis=1) == 600).all()
    oob_frac = (f.inbag == 0).mean(axis=1)
    assert ((oob_frac > 0.25) & (oob_frac < 0.45)).all()


def test_beats_mean_predictor(sim1):
    train, f = sim1
    test = gen_simulation(SimulationSpec("sim1", 1000, seed=12))
    assert np.mean((f.predict(test.X) - test.y) ** 2) < np.var(test.y)


def test_prediction_is_average_of_tree_routes(sim1):
    _, f = sim1
    Q = np.random.default_rng(3).uniform(-3, 3, (20, 5))
    for q, pred in zip(Q, f.predict(Q)):
        total = 0.0
        for t in f.trees:
            total += route(t, q)[1]
        assert pred == total / f.n_trees


def test_two_tree_average():
    X = np.array([[0.0], [1.0]])
    f = fit_forest(X, np.array([0.0, 1.0]), FitParams(n_min=1), n_trees=40, seed=0)
    # each leaf predicts 0 or 1, so every prediction is a multiple of 1/M
    pred = f.predict(np.array([[0.0], [1.0]]))
    assert np.allclose(pred * 40, np.round(pred * 40))


def test_kernel_matches_bruteforce():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((30, 3))
    y = X[:, 0] ** 2 + rng.standard_normal(30)
    f = fit_forest(X, y, FitParams(n_min=3, n_slices=3), n_trees=5, seed=9)
    K = f.kernel(X, X)
    assert np.array_equal(K, kernel_bruteforce(f.trees, X, X))
    assert np.array_equal(K, K.T)
    assert (np.diag(K) == 1.0).all()
    assert ((K >= 0) & (K <= 1)).all()


def test_kernel_half_when_shared_in_one_of_two_trees():
    leaves_a = np.array([[0, 1]])
    leaves_b = np.array([[0, 2], [3, 1], [0, 1]])
    assert kernel_from_leaves(leaves_a, leaves_b).tolist() == [[0.5, 0.5, 1.0]]


def test_kernel_weights_of_query(sim1):
    train, f = sim1
    w = kernel_weights(f, train.X[7], train.X)
    assert w[7] == 1.0 and ((w >= 0) & (w <= 1)).all()
    with pytest.raises(DimensionMismatch):
        kernel_weights(f, np.zeros(4), train.X)


def test_worker_count_does_not_change_model():
    train = gen_simulation(SimulationSpec("sim2", 300, seed=1))
    a = fit_forest(train.X, train.y, FitParams(m_try=3), n_trees=12, seed=4, workers=1)
    b = fit_forest(train.X, train.y, FitParams(m_try=3), n_trees=12, seed=4, workers=4)
    assert dumps_model(a) == dumps_model(b)


def test_seed_changes_model():
    train = gen_simulation(SimulationSpec("sim2", 200, seed=1))
    a = fit_forest(train.X, train.y, n_trees=3, seed=1)
    b = fit_forest(train.X, train.y, n_trees=3, seed=2)
    assert dumps_model(a) != dumps_model(b)


def test_input_validation():
    with pytest.raises(EmptyDataset):
        fit_forest(np.zeros((0, 2)), np.zeros(0))
    with pytest.raises(NonFiniteInput):
        fit_forest(np.array([[0.0], [np.nan]]), np.array([0.0, 1.0]))
    with pytest.raises(DimensionMismatch):
        fit_forest(np.zeros((3, 2)), np.zeros(4))


def test_importance_ranks_signal_above_noise(sim1):
    train, f = sim1
    imp = permutation_importance(f, train.X, train.y, seed=0, repeats=2)
    assert min(imp[0], imp[1]) > max(imp[2:])
    assert np.abs(imp[2:]).max() < 0.1 * imp.max()
    again = permutation_importance(f, train.X, train.y, seed=0, repeats=2)
    assert np.array_equal(imp, again)


def test_oob_mse_and_missing_oob():
    X = np.array([[0.0], [1.0]])
    f = fit_forest(X, np.array([0.0, 1.0]), n_trees=1, seed=0)
    full = f.inbag.copy()
    full[:] = 1
    g = type(f)(**{**f.__dict__, "inbag": full})
    with pytest.raises(NoOobSamples):
        oob_mse(g, X, np.array([0.0, 1.0]))
    with pytest.raises(NoOobSamples):
        permutation_importance(g, X, np.array([0.0, 1.0]))


def test_oob_mse_reasonable(sim1):
    train, f = sim1
    assert 0 < oob_mse(f, train.X, train.y) < np.var(train.y)
