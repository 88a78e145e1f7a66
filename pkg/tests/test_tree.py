import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sdrforest.errors import DimensionMismatch, NoValidSplit
from sdrforest.eval.metrics import trace_correlation
from sdrforest.tree import (AXIS, LEAF, OBLIQUE, AxisSplit, FitParams, ObliqueSplit, best_split_1d,
                            find_split, fit_tree, resolve_m_try, route, screen_features)

from oracles import cart_fit, cart_predict

AXIS_ONLY = FitParams(n_min=1, use_sdr=False)


# -- split search --------------------------------------------------------


def test_best_split_perfect_separation():
    assert best_split_1d([1, 2, 3, 4], [0, 0, 10, 10]) == (2.0, 0.0, 2)


def test_best_split_tie_goes_to_smallest_threshold():
    c, sse, n_left = best_split_1d([1, 2, 3], [0, 1, 2])
    assert (c, n_left) == (1.0, 1)
    assert sse == pytest.approx(0.5)


def test_best_split_constant_values():
    with pytest.raises(NoValidSplit):
        best_split_1d([5, 5, 5], [1, 2, 3])


@settings(max_examples=80, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 8), st.floats(-10, 10)), min_size=2, max_size=30))
def test_best_split_matches_enumeration(pairs):
    v = np.array([a for a, _ in pairs], dtype=float)
    y = np.array([b for _, b in pairs])
    cands = np.unique(v)[:-1]
    if len(cands) == 0:
        with pytest.raises(NoValidSplit):
            best_split_1d(v, y)
        return
    sse = [((y[v <= c] - y[v <= c].mean()) ** 2).sum() + ((y[v > c] - y[v > c].mean()) ** 2).sum()
           for c in cands]
    c, s, n_left = best_split_1d(v, y)
    assert s == pytest.approx(min(sse), abs=1e-7 * max(1.0, float((y**2).sum())))
    assert c in cands and n_left == (v <= c).sum()


# -- screening -----------------------------------------------------------


def test_screen_picks_informative_feature():
    X = np.random.default_rng(0).standard_normal((50, 4))
    assert screen_features(X, X[:, 2], 1) == [2]


def test_screen_all_when_m_try_covers_p():
    X = np.random.default_rng(1).standard_normal((20, 3))
    assert screen_features(X, X[:, 1], 3) == [0, 1, 2]


def test_screen_duplicate_columns_keep_lower_index():
    X = np.random.default_rng(2).standard_normal((40, 3))
    X[:, 2] = X[:, 1]
    assert screen_features(X, np.sign(X[:, 1]), 1) == [1]


def test_screen_constant_features_rank_last():
    X = np.random.default_rng(3).standard_normal((20, 3))
    X[:, 0] = 1.0
    assert 0 not in screen_features(X, X[:, 1] + X[:, 2], 2)


@pytest.mark.parametrize("spec, p, expect", [
    ("all", 10, 10), ("sqrt", 10, 4), ("third", 10, 4), (3, 10, 3), ("7", 5, 5), (12, 4, 4),
])
def test_resolve_m_try(spec, p, expect):
    assert resolve_m_try(spec, p) == expect


def test_resolve_m_try_rejects_bad_values():
    for bad in ("half", 0, -2):
        with pytest.raises(ValueError):
            resolve_m_try(bad, 5)


# -- node splits ---------------------------------------------------------


def test_find_split_oblique_on_quadratic_ridge():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((400, 5))
    beta = np.array([1, 1, 0, 0, 0]) / np.sqrt(2)
    rule = find_split(X, (X @ beta) ** 2, FitParams())
    assert isinstance(rule, ObliqueSplit)
    assert trace_correlation(rule.direction, beta) >= 0.9
    assert np.linalg.norm(rule.direction) == pytest.approx(1.0)


def test_find_split_small_node_falls_back_to_axis():
    rng = np.random.default_rng(5)
    X = rng.standard_normal((4, 5))
    assert isinstance(find_split(X, rng.standard_normal(4)), AxisSplit)


def test_find_split_constant_response():
    X = np.random.default_rng(6).standard_normal((50, 2))
    assert find_split(X, np.full(50, 3.0)) is None


def test_find_split_collinear_node_falls_back():
    rng = np.random.default_rng(7)
    X = rng.standard_normal((60, 3))
    X[:, 2] = X[:, 0] + X[:, 1]
    rule = find_split(X, X[:, 0] + rng.standard_normal(60))
    assert isinstance(rule, AxisSplit)


# -- whole trees ---------------------------------------------------------


def test_single_leaf_when_n_min_exceeds_n():
    rng = np.random.default_rng(8)
    X, y = rng.standard_normal((10, 2)), rng.standard_normal(10)
    t = fit_tree(X, y, FitParams(n_min=11))
    assert t.n_nodes == 1
    assert route(t, rng.standard_normal(2)) == (0, pytest.approx(y.mean()))


def test_constant_response_single_leaf():
    X = np.random.default_rng(9).standard_normal((30, 3))
    t = fit_tree(X, np.full(30, 2.5))
    assert t.n_nodes == 1 and t.predict(X[:3]).tolist() == [2.5] * 3


def test_step_function_fits():
    rng = np.random.default_rng(10)
    X = rng.uniform(-1, 1, (200, 3))
    y = (X[:, 0] > 0).astype(float)
    t = fit_tree(X, y, FitParams(n_min=5))
    assert np.mean((t.predict(X) - y) ** 2) < 0.01


def test_route_boundary_goes_left():
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    t = fit_tree(X, np.array([0.0, 0.0, 5.0, 5.0]), AXIS_ONLY)
    assert t.kind[0] == AXIS and t.threshold[0] == 1.0
    leaf_at_boundary, mean = route(t, np.array([1.0]))
    assert mean == 0.0
    assert route(t, np.array([1.0 + 1e-12]))[1] == 5.0
    assert leaf_at_boundary == 0


def test_route_wrong_length():
    t = fit_tree(np.random.default_rng(11).standard_normal((10, 3)), np.arange(10.0))
    with pytest.raises(DimensionMismatch):
        route(t, np.zeros(2))


def seq_project(X, beta):
    # accumulate over features in order, like the tree does; BLAS may round differently
    acc = np.zeros(len(X))
    for j, b in enumerate(beta):
        acc += X[:, j] * b
    return acc


def _node_sse(y):
    return float(((y - y.mean()) ** 2).sum()) if len(y) else 0.0


def _check_tree(t, X, y):
    nodes = t.apply_nodes(X)
    assert (t.kind[nodes] == LEAF).all()
    assert t.n_nodes <= 2 * len(y) - 1
    assert sorted(t.leaf_id[t.kind == LEAF]) == list(range(t.n_leaves))
    # which training rows pass through each node
    members = {0: np.arange(len(y))}
    for node in range(t.n_nodes):
        rows = members.get(node)
        if rows is None or t.kind[node] == LEAF:
            if rows is not None:
                np.testing.assert_allclose(t.value[node], y[rows].mean(), rtol=1e-12, atol=1e-12)
            continue
        if t.kind[node] == AXIS:
            proj = X[rows, t.feature[node]]
        else:
            beta = t.coefs[t.coef_row[node]]
            assert abs(np.linalg.norm(beta) - 1) < 1e-9
            proj = seq_project(X[rows], beta)
        go = proj <= t.threshold[node]
        left, right = rows[go], rows[~go]
        assert len(left) and len(right)
        assert _node_sse(y[left]) + _node_sse(y[right]) <= _node_sse(y[rows]) + 1e-9
        members[t.left[node]] = left
        members[t.right[node]] = right


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(20, 120), st.integers(1, 6),
       st.integers(1, 10), st.booleans())
def test_tree_invariants(seed, n, p, n_min, use_sdr):
    rng = np.random.default_rng(seed)
    X = np.round(rng.standard_normal((n, p)), 1)
    y = np.sin(X[:, 0]) + X[:, -1] ** 2 + 0.2 * rng.standard_normal(n)
    t = fit_tree(X, y, FitParams(n_min=n_min, m_try=max(1, p - 1), n_slices=4, use_sdr=use_sdr))
    _check_tree(t, X, y)
    Q = rng.standard_normal((50, p)) * 3
    leaves = t.apply(Q)
    assert ((leaves >= 0) & (leaves < t.n_leaves)).all()


def test_oblique_nodes_used_on_ridge_data():
    rng = np.random.default_rng(12)
    X = rng.standard_normal((500, 4))
    y = np.sin(X @ [1, 1, 0, 0]) + 0.1 * rng.standard_normal(500)
    t = fit_tree(X, y)
    assert (t.kind == OBLIQUE).sum() > 0
    assert any(isinstance(r, ObliqueSplit) for _, r in t.rules())


def test_fit_is_deterministic():
    rng = np.random.default_rng(13)
    X = rng.standard_normal((300, 4))
    y = X[:, 0] * X[:, 1] + rng.standard_normal(300)
    a, b = fit_tree(X, y), fit_tree(X, y)
    for name in a.ARRAYS:
        assert np.array_equal(getattr(a, name), getattr(b, name), equal_nan=True)


@pytest.mark.parametrize("seed", range(5))
def test_axis_only_matches_cart_oracle(seed):
    rng = np.random.default_rng(1000 + seed)
    n = int(rng.integers(10, 50))
    X = rng.standard_normal((n, 3))
    y = X[:, 0] - 2 * (X[:, 1] > 0) + 0.5 * rng.standard_normal(n)
    n_min = int(rng.integers(1, 6))
    t = fit_tree(X, y, FitParams(n_min=n_min, use_sdr=False))
    oracle = cart_fit(X, y, n_min)
    Q = np.vstack([X, rng.standard_normal((200, 3))])
    expect = np.array([cart_predict(oracle, q) for q in Q])
    assert np.array_equal(t.predict(Q), expect)


def test_bootstrap_rows_are_weighted_by_multiplicity():
    X = np.array([[0.0], [1.0], [2.0]])
    y = np.array([0.0, 3.0, 6.0])
    t = fit_tree(X, y, FitParams(n_min=10), sample_idx=[0, 0, 0, 2])
    assert t.value[0] == 1.5 and t.count[0] == 4
