"""Dimension reduction trees.

A node is split along the leading SIR or SAVE direction estimated from
the samples it holds, on the features kept by a per-node screening
step.  Small or degenerate nodes fall back to ordinary axis-aligned CART
splits.  Leaves predict the mean response of their training samples.

Trees are stored as flat arrays so that growing and routing can run in
compiled code without holding the GIL.
"""

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np
from numba import njit

from .errors import DimensionMismatch, NoValidSplit
from .sdr import DEFAULT_SLICES, OK, _leading_pair

LEAF, AXIS, OBLIQUE = 0, 1, 2

# gains closer than this fraction of the node SSE count as ties; the same
# partition reached through different features can differ in the last ulp
TIE_RTOL = 1e-12


@dataclass(frozen=True)
class FitParams:
    """Tree growing hyperparameters.

    n_min:
        Nodes with fewer samples than this are not split.
    m_try:
        Number of features kept by screening; ``None`` keeps all of them.
    n_slices:
        Response slices used by SIR and SAVE.
    use_sdr:
        When false every split is axis-aligned, which turns the forest
        into bagged CART.
    """

    n_min: int = 5
    m_try: int | None = None
    n_slices: int = DEFAULT_SLICES
    use_sdr: bool = True

    def __post_init__(self):
        if self.n_min < 1:
            raise ValueError("n_min must be >= 1")
        if self.m_try is not None and self.m_try < 1:
            raise ValueError("m_try must be >= 1")
        if self.n_slices < 2:
            raise ValueError("n_slices must be >= 2")

    def resolved_m_try(self, p: int) -> int:
        return p if self.m_try is None else min(self.m_try, p)


def resolve_m_try(spec, p: int) -> int:
    """Turn an integer, ``"all"``, ``"sqrt"`` or ``"third"`` into a feature count in ``[1, p]``."""
    if isinstance(spec, str):
        key = spec.strip().lower()
        if key == "all":
            return p
        if key == "sqrt":
            return max(1, math.ceil(math.sqrt(p)))
        if key == "third":
            return max(1, math.ceil(p / 3))
        try:
            spec = int(key)
        except ValueError:
            raise ValueError(f"m_try must be an integer, 'all', 'sqrt' or 'third', got {spec!r}")
    spec = int(spec)
    if spec < 1:
        raise ValueError("m_try must be >= 1")
    return min(spec, p)


@dataclass(frozen=True)
class AxisSplit:
    feature: int
    threshold: float

    def goes_left(self, x) -> bool:
        return bool(x[self.feature] <= self.threshold)


@dataclass(frozen=True)
class ObliqueSplit:
    direction: np.ndarray
    threshold: float

    def goes_left(self, x) -> bool:
        x = np.ascontiguousarray(x, dtype=np.float64)[None, :]
        return bool(_project(x, 0, self.direction) <= self.threshold)


SplitRule = AxisSplit | ObliqueSplit


# ---------------------------------------------------------------------------
# compiled kernels
# ---------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def _project(X, i, beta):
    # the one place projections are computed: training and routing must agree bitwise
    acc = 0.0
    for j in range(beta.shape[0]):
        acc += X[i, j] * beta[j]
    return acc


@njit(cache=True, nogil=True)
def _best_split(values, y):
    """Best ``values <= c`` split by the sum of squared errors.

    Returns ``(c, gain, total, n_left)`` where ``total - gain`` is the
    child SSE and ``n_left == 0`` flags that no split exists.  Among tied
    gains the smallest threshold wins.
    """
    m = values.shape[0]
    ymean = 0.0
    for i in range(m):
        ymean += y[i]
    ymean /= m
    total = 0.0
    S = 0.0
    for i in range(m):
        d = y[i] - ymean
        total += d * d
        S += d

    tol = TIE_RTOL * total
    order = np.argsort(values, kind="mergesort")
    best_gain = -np.inf
    best_thr = np.nan
    best_left = 0
    sum_left = 0.0
    for i in range(m - 1):
        sum_left += y[order[i]] - ymean
        v = values[order[i]]
        if v < values[order[i + 1]]:
            n_left = i + 1
            sum_right = S - sum_left
            gain = sum_left * sum_left / n_left + sum_right * sum_right / (m - n_left)
            if gain > best_gain + tol:
                best_gain = gain
                best_thr = v
                best_left = n_left
    return best_thr, best_gain, total, best_left


@njit(cache=True, nogil=True)
def _axis_candidates(X, y_node, idx):
    s = idx.shape[0]
    p = X.shape[1]
    thr = np.empty(p)
    gain = np.empty(p)
    valid = np.zeros(p, dtype=np.bool_)
    vals = np.empty(s)
    for j in range(p):
        for i in range(s):
            vals[i] = X[idx[i], j]
        c, g, _, n_left = _best_split(vals, y_node)
        thr[j] = c
        gain[j] = g
        valid[j] = n_left > 0
    return thr, gain, valid


@njit(cache=True, nogil=True)
def _screen(gain, valid, m_try, tol):
    p = gain.shape[0]
    if m_try >= p:
        return np.arange(p)
    # selection by gain; tied gains keep the lower feature index first, invalid features last
    taken = np.zeros(p, dtype=np.bool_)
    out = np.empty(m_try, dtype=np.int64)
    for k in range(m_try):
        best = -1
        for j in range(p):
            if taken[j]:
                continue
            if best < 0 or (valid[j] and not valid[best]) or (
                    valid[j] and valid[best] and gain[j] > gain[best] + tol):
                best = j
        taken[best] = True
        out[k] = best
    return out


@njit(cache=True, nogil=True)
def _better(gain, thr, best_gain, best_thr, tol):
    return gain > best_gain + tol or (abs(gain - best_gain) <= tol and thr < best_thr)


@njit(cache=True, nogil=True)
def _node_split(X, y, idx, m_try, n_slices, use_sdr):
    """Choose the split rule for one node.

    Returns ``(kind, feature, beta, threshold)``; ``kind == LEAF`` when no
    valid split exists.
    """
    s = idx.shape[0]
    p = X.shape[1]
    y_node = np.empty(s)
    for i in range(s):
        y_node[i] = y[idx[i]]
    thr, gain, valid = _axis_candidates(X, y_node, idx)
    total = 0.0
    ymean = y_node.mean()
    for i in range(s):
        total += (y_node[i] - ymean) ** 2
    tol = TIE_RTOL * total
    screened = _screen(gain, valid, m_try, tol)
    beta = np.zeros(p)

    if use_sdr and s >= max(p, 2 * n_slices):
        # features constant within the node carry no direction information
        q = 0
        feats = np.empty(screened.shape[0], dtype=np.int64)
        for j in screened:
            if valid[j]:
                feats[q] = j
                q += 1
        if q > 0:
            Xs = np.empty((s, q))
            for i in range(s):
                for k in range(q):
                    Xs[i, k] = X[idx[i], feats[k]]
            status, b_sir, b_save = _leading_pair(Xs, y_node, n_slices)
            if status == OK:
                best_gain = -np.inf
                best_thr = np.nan
                proj = np.empty(s)
                for b_small in (b_sir, b_save):
                    cand = np.zeros(p)
                    for k in range(q):
                        cand[feats[k]] = b_small[k]
                    for i in range(s):
                        proj[i] = _project(X, idx[i], cand)
                    c, g, _, n_left = _best_split(proj, y_node)
                    if n_left > 0 and _better(g, c, best_gain, best_thr, tol):
                        best_gain = g
                        best_thr = c
                        beta = cand
                if best_gain > -np.inf:
                    return OBLIQUE, -1, beta, best_thr

    best = -1
    for j in screened:
        if valid[j] and (best < 0 or _better(gain[j], thr[j], gain[best], thr[best], tol)
                         or (abs(gain[j] - gain[best]) <= tol and thr[j] == thr[best]
                             and j < best)):
            best = j
    if best < 0:
        return LEAF, -1, beta, np.nan
    return AXIS, best, beta, thr[best]


@njit(cache=True, nogil=True)
def _grow(X, y, samples, n_min, m_try, n_slices, use_sdr):
    N = samples.shape[0]
    p = X.shape[1]
    cap = 2 * N + 1
    kind = np.zeros(cap, dtype=np.int8)
    feature = np.full(cap, -1, dtype=np.int64)
    coef_row = np.full(cap, -1, dtype=np.int64)
    threshold = np.full(cap, np.nan)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap)
    count = np.zeros(cap, dtype=np.int64)
    leaf_id = np.full(cap, -1, dtype=np.int64)
    coefs = np.zeros((max(N, 1), p))

    idx = samples.copy()
    buf = np.empty_like(idx)
    st_node = np.empty(cap, dtype=np.int64)
    st_start = np.empty(cap, dtype=np.int64)
    st_end = np.empty(cap, dtype=np.int64)
    st_node[0], st_start[0], st_end[0] = 0, 0, N
    top = 1
    n_nodes = 1
    n_leaves = 0
    n_coefs = 0

    while top > 0:
        top -= 1
        node, start, end = st_node[top], st_start[top], st_end[top]
        s = end - start
        acc = 0.0
        lo = np.inf
        hi = -np.inf
        for i in range(start, end):
            v = y[idx[i]]
            acc += v
            lo = min(lo, v)
            hi = max(hi, v)
        value[node] = acc / s
        count[node] = s

        split = False
        if s >= max(2, n_min) and hi > lo:
            k, j, beta, c = _node_split(X, y, idx[start:end], m_try, n_slices, use_sdr)
            if k != LEAF:
                row = coefs[n_coefs]
                if k == OBLIQUE:
                    row[:] = beta
                nl = 0
                nr = 0
                for i in range(start, end):
                    r = idx[i]
                    v = X[r, j] if k == AXIS else _project(X, r, row)
                    if v <= c:
                        idx[start + nl] = r
                        nl += 1
                    else:
                        buf[nr] = r
                        nr += 1
                for i in range(nr):
                    idx[start + nl + i] = buf[i]

                kind[node] = k
                threshold[node] = c
                if k == AXIS:
                    feature[node] = j
                else:
                    coef_row[node] = n_coefs
                    n_coefs += 1
                left[node] = n_nodes
                right[node] = n_nodes + 1
                st_node[top], st_start[top], st_end[top] = n_nodes + 1, start + nl, end
                st_node[top + 1], st_start[top + 1], st_end[top + 1] = n_nodes, start, start + nl
                top += 2
                n_nodes += 2
                split = True
        if not split:
            kind[node] = LEAF
            leaf_id[node] = n_leaves
            n_leaves += 1

    m = n_nodes
    return (kind[:m].copy(), feature[:m].copy(), coef_row[:m].copy(),
            coefs[:n_coefs].copy(), threshold[:m].copy(), left[:m].copy(),
            right[:m].copy(), value[:m].copy(), count[:m].copy(), leaf_id[:m].copy())


@njit(cache=True, nogil=True)
def _apply(kind, feature, coef_row, coefs, threshold, left, right, X):
    n = X.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        node = 0
        while kind[node] != LEAF:
            if kind[node] == AXIS:
                v = X[i, feature[node]]
            else:
                v = _project(X, i, coefs[coef_row[node]])
            node = left[node] if v <= threshold[node] else right[node]
        out[i] = node
    return out


# ---------------------------------------------------------------------------
# public API
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Tree:
    """Array-encoded binary regression tree.

    ``kind`` is 0 for leaves, 1 for axis splits and 2 for oblique splits.
    Axis nodes use ``feature``; oblique nodes use row ``coef_row`` of
    ``coefs``.  Samples with projected value ``<= threshold`` go left.
    """

    kind: np.ndarray
    feature: np.ndarray
    coef_row: np.ndarray
    coefs: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    count: np.ndarray
    leaf_id: np.ndarray
    n_features: int
    params: FitParams

    ARRAYS = ("kind", "feature", "coef_row", "coefs", "threshold", "left",
              "right", "value", "count", "leaf_id")

    @property
    def n_nodes(self) -> int:
        return len(self.kind)

    @property
    def n_leaves(self) -> int:
        return int(np.count_nonzero(self.kind == LEAF))

    def _check(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise DimensionMismatch(
                f"expected {self.n_features} features, got shape {X.shape}")
        return np.ascontiguousarray(X)

    def apply_nodes(self, X) -> np.ndarray:
        X = self._check(X)
        return _apply(self.kind, self.feature, self.coef_row, self.coefs,
                      self.threshold, self.left, self.right, X)

    def apply(self, X) -> np.ndarray:
        """Dense leaf id (0..n_leaves-1) of every row of ``X``."""
        return self.leaf_id[self.apply_nodes(X)]

    def predict(self, X) -> np.ndarray:
        return self.value[self.apply_nodes(X)]

    def rules(self) -> Iterator[tuple[int, SplitRule]]:
        """Yield ``(node, rule)`` for every internal node."""
        for node, k in enumerate(self.kind):
            if k == AXIS:
                yield node, AxisSplit(int(self.feature[node]), float(self.threshold[node]))
            elif k == OBLIQUE:
                yield node, ObliqueSplit(self.coefs[self.coef_row[node]],
                                         float(self.threshold[node]))


def _as_xy(X, y):
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise DimensionMismatch(f"incompatible shapes {X.shape} and {y.shape}")
    return X, y


def best_split_1d(values, y) -> tuple[float, float, int]:
    """Best single-threshold split of ``y`` along ``values``.

    Returns ``(threshold, sse, n_left)``.  Candidate thresholds are the
    distinct values except the largest; ties go to the smallest threshold.
    """
    values = np.ascontiguousarray(values, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if values.shape != y.shape or values.ndim != 1 or len(values) < 2:
        raise ValueError("values and y must be 1-d of equal length >= 2")
    c, gain, total, n_left = _best_split(values, y)
    if n_left == 0:
        raise NoValidSplit("all projected values are identical")
    return float(c), max(float(total - gain), 0.0), int(n_left)


def screen_features(X, y, m_try: int) -> list[int]:
    """Indices of the ``m_try`` features with the lowest axis-split SSE.

    Features without a valid split rank last; ties keep the lower index.
    With ``m_try >= p`` all features are returned in order.
    """
    X, y = _as_xy(X, y)
    idx = np.arange(X.shape[0])
    _, gain, valid = _axis_candidates(X, y, idx)
    tol = TIE_RTOL * float(((y - y.mean()) ** 2).sum())
    return [int(j) for j in _screen(gain, valid, m_try, tol)]


def find_split(X, y, params: FitParams = FitParams()) -> SplitRule | None:
    """Split rule a tree would place at a node holding ``(X, y)``.

    Returns ``None`` when the response is constant or nothing separates
    the samples.
    """
    X, y = _as_xy(X, y)
    if len(y) < 2 or y.max() == y.min():
        return None
    k, j, beta, c = _node_split(X, y, np.arange(len(y)), params.resolved_m_try(X.shape[1]),
                                params.n_slices, params.use_sdr)
    if k == AXIS:
        return AxisSplit(int(j), float(c))
    if k == OBLIQUE:
        return ObliqueSplit(beta, float(c))
    return None


def fit_tree(X, y, params: FitParams = FitParams(), sample_idx=None) -> Tree:
    """Grow one tree on the rows ``sample_idx`` of ``(X, y)`` (repeats allowed)."""
    X, y = _as_xy(X, y)
    n, p = X.shape
    if n < 1:
        raise ValueError("cannot fit a tree on an empty dataset")
    if sample_idx is None:
        sample_idx = np.arange(n)
    sample_idx = np.ascontiguousarray(sample_idx, dtype=np.int64)
    arrays = _grow(X, y, sample_idx, params.n_min, params.resolved_m_try(p),
                   params.n_slices, params.use_sdr)
    return Tree(*arrays, n_features=p, params=params)


def route(tree: Tree, x) -> tuple[int, float]:
    """Leaf id and leaf mean reached by a single point ``x``."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionMismatch("route expects a single point")
    node = int(tree.apply_nodes(x)[0])
    return int(tree.leaf_id[node]), float(tree.value[node])
