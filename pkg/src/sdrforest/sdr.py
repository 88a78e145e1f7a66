"""Sliced inverse regression (SIR) and sliced average variance estimation (SAVE).

Both estimators whiten the centered design with a thin QR factorization,
build a p x p candidate matrix from response slices, take its symmetric
eigendecomposition and map the eigenvectors back to the original
coordinates by back-substitution against ``sqrt(n) R``.

The compiled kernels at the top of this module are shared with the tree
builder, which calls them once per internal node.  The public functions
below wrap them with validation and typed results.
"""

from dataclasses import dataclass
from typing import Literal

import numpy as np
from numba import njit

from .errors import DegenerateSlices, RankDeficient

DEFAULT_SLICES = 10
RANK_RTOL = 1e-10

# Status codes returned by the compiled kernels.
OK = 0
RANK_DEFICIENT = 1
TOO_FEW_SLICES = 2


# ---------------------------------------------------------------------------
# compiled kernels
# ---------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def _reduced_slices(n, n_slices):
    # every slice needs two samples for a within-slice covariance
    if n < 2 * n_slices:
        return max(2, n // 2)
    return n_slices


@njit(cache=True, nogil=True)
def _slice_bounds(y_sorted, n_slices):
    """Boundaries of contiguous, near-equal slices over sorted responses.

    Boundaries falling inside a run of tied responses move right past the
    run; slices emptied by that move are dropped.
    """
    n = y_sorted.shape[0]
    base = n // n_slices
    extra = n % n_slices
    bounds = np.empty(n_slices + 1, dtype=np.int64)
    bounds[0] = 0
    count = 0
    prev = 0
    nominal = 0
    for k in range(n_slices - 1):
        nominal += base + (1 if k < extra else 0)
        b = max(nominal, prev)
        while 0 < b < n and y_sorted[b - 1] == y_sorted[b]:
            b += 1
        if prev < b < n:
            count += 1
            bounds[count] = b
            prev = b
    count += 1
    bounds[count] = n
    return bounds[: count + 1].copy()


@njit(cache=True, nogil=True)
def _whiten(X):
    """Center and QR-whiten ``X``.

    Returns ``(Z, R, mean, bad)`` with ``bad == -1`` on success, otherwise
    the first column whose R diagonal falls under the rank tolerance.
    """
    n, p = X.shape
    mean = np.zeros(p)
    for i in range(n):
        for j in range(p):
            mean[j] += X[i, j]
    for j in range(p):
        mean[j] /= n
    if n - 1 < p:
        return np.zeros((n, p)), np.zeros((p, p)), mean, max(n - 1, 0)
    # centering a constant column leaves rounding residue that a relative
    # tolerance cannot catch when every column is affected
    for j in range(p):
        constant = True
        for i in range(1, n):
            if X[i, j] != X[0, j]:
                constant = False
                break
        if constant:
            return np.zeros((n, p)), np.zeros((p, p)), mean, j

    U = np.empty((n, p))
    for i in range(n):
        for j in range(p):
            U[i, j] = X[i, j] - mean[j]
    Q, R = np.linalg.qr(U)

    # positive diagonal makes the factorization unique
    for j in range(p):
        if R[j, j] < 0.0:
            for k in range(p):
                R[j, k] = -R[j, k]
            for i in range(n):
                Q[i, j] = -Q[i, j]

    dmax = 0.0
    for j in range(p):
        dmax = max(dmax, abs(R[j, j]))
    for j in range(p):
        if abs(R[j, j]) <= RANK_RTOL * dmax or dmax == 0.0:
            return Q, R, mean, j

    Z = np.sqrt(n) * Q
    return Z, R, mean, -1


@njit(cache=True, nogil=True)
def _column_means(Z, start, stop):
    p = Z.shape[1]
    m = np.zeros(p)
    for i in range(start, stop):
        for j in range(p):
            m[j] += Z[i, j]
    for j in range(p):
        m[j] /= stop - start
    return m


@njit(cache=True, nogil=True)
def _sir_matrix(Z, bounds):
    # Z rows must be sorted by response
    n, p = Z.shape
    zbar = _column_means(Z, 0, n)
    M = np.zeros((p, p))
    for k in range(bounds.shape[0] - 1):
        a, b = bounds[k], bounds[k + 1]
        d = _column_means(Z, a, b) - zbar
        w = (b - a) / n
        for r in range(p):
            for c in range(p):
                M[r, c] += w * d[r] * d[c]
    return M


@njit(cache=True, nogil=True)
def _save_matrix(Z, bounds):
    # Z rows must be sorted by response
    n, p = Z.shape
    M = np.zeros((p, p))
    for k in range(bounds.shape[0] - 1):
        a, b = bounds[k], bounds[k + 1]
        nk = b - a
        m = _column_means(Z, a, b)
        Zc = np.empty((nk, p))
        for i in range(nk):
            for j in range(p):
                Zc[i, j] = Z[a + i, j] - m[j]
        D = -(Zc.T @ Zc) / nk
        for j in range(p):
            D[j, j] += 1.0
        M += (nk / n) * (D @ D)
    return M


@njit(cache=True, nogil=True)
def _back_substitute(R, n, G):
    """Solve ``(sqrt(n) R) B = G`` for upper-triangular ``R``."""
    p, k = G.shape
    B = np.zeros((p, k))
    s = np.sqrt(n)
    for c in range(k):
        for i in range(p - 1, -1, -1):
            acc = G[i, c]
            for j in range(i + 1, p):
                acc -= s * R[i, j] * B[j, c]
            B[i, c] = acc / (s * R[i, i])
    return B


@njit(cache=True, nogil=True)
def _canonicalize(v):
    """Scale ``v`` to unit norm with its largest-magnitude loading positive."""
    nrm = 0.0
    for j in range(v.shape[0]):
        nrm += v[j] * v[j]
    nrm = np.sqrt(nrm)
    big = 0
    for j in range(v.shape[0]):
        if abs(v[j]) > abs(v[big]):
            big = j
    sign = -1.0 if v[big] < 0.0 else 1.0
    out = np.empty_like(v)
    for j in range(v.shape[0]):
        out[j] = sign * v[j] / nrm
    return out


@njit(cache=True, nogil=True)
def _sorted_by_response(X, y):
    order = np.argsort(y, kind="mergesort")
    n, p = X.shape
    Xs = np.empty((n, p))
    ys = np.empty(n)
    for i in range(n):
        ys[i] = y[order[i]]
        for j in range(p):
            Xs[i, j] = X[order[i], j]
    return Xs, ys


@njit(cache=True, nogil=True)
def _leading_pair(X, y, n_slices):
    """Leading SIR and SAVE directions for one node.

    Returns ``(status, beta_sir, beta_save)``; directions are unit norm in
    the coordinates of ``X`` with the sign convention of ``_canonicalize``.
    """
    n, p = X.shape
    Xs, ys = _sorted_by_response(X, y)
    H = _reduced_slices(n, n_slices)
    bounds = _slice_bounds(ys, H)
    empty = np.zeros(p)
    if bounds.shape[0] - 1 < 2:
        return TOO_FEW_SLICES, empty, empty
    Z, R, _, bad = _whiten(Xs)
    if bad >= 0:
        return RANK_DEFICIENT, empty, empty

    G = np.empty((p, 2))
    _, vecs = np.linalg.eigh(_sir_matrix(Z, bounds))
    G[:, 0] = vecs[:, p - 1]
    _, vecs = np.linalg.eigh(_save_matrix(Z, bounds))
    G[:, 1] = vecs[:, p - 1]
    B = _back_substitute(R, n, G)
    return OK, _canonicalize(B[:, 0].copy()), _canonicalize(B[:, 1].copy())


# ---------------------------------------------------------------------------
# public API
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WhitenedData:
    """QR whitening of a design: ``X = Z R / sqrt(n) + 1 mean^T``."""

    Z: np.ndarray
    R: np.ndarray
    mean: np.ndarray


@dataclass(frozen=True)
class SliceAssignment:
    labels: np.ndarray
    counts: np.ndarray

    @property
    def n_slices(self) -> int:
        return len(self.counts)


@dataclass(frozen=True)
class SdrResult:
    """Estimated directions (columns, original coordinates) and eigenvalues.

    ``matrix`` is the candidate matrix in whitened coordinates whose
    eigendecomposition produced the directions.
    """

    directions: np.ndarray
    eigenvalues: np.ndarray
    method: Literal["SIR", "SAVE"]
    n_slices: int
    matrix: np.ndarray

    @property
    def leading(self) -> np.ndarray:
        return self.directions[:, 0]


def _as_design(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ValueError("X must be a 2-d array")
    return np.ascontiguousarray(X)


def whiten(X) -> WhitenedData:
    """Center ``X`` and whiten it so that ``Z.T @ Z == n * I``.

    Raises
    ------
    RankDeficient
        If a diagonal entry of R is at most ``1e-10 * max|R_jj|``.
    """
    X = _as_design(X)
    if X.shape[0] < 2:
        raise ValueError("whitening needs at least two samples")
    Z, R, mean, bad = _whiten(X)
    if bad >= 0:
        raise RankDeficient(int(bad))
    return WhitenedData(Z=Z, R=R, mean=mean)


def make_slices(y, n_slices: int) -> SliceAssignment:
    """Assign samples to contiguous slices of the sorted response.

    Slices are as equal in size as possible; a run of tied responses is
    never split across two slices.
    """
    y = np.asarray(y, dtype=np.float64)
    if n_slices < 2 or y.shape[0] < n_slices:
        raise ValueError("need n >= n_slices >= 2")
    order = np.argsort(y, kind="mergesort")
    bounds = _slice_bounds(y[order], n_slices)
    counts = np.diff(bounds)
    labels = np.empty(y.shape[0], dtype=np.int64)
    labels[order] = np.repeat(np.arange(len(counts)), counts)
    return SliceAssignment(labels=labels, counts=counts)


def _fit(X, y, n_slices, n_directions, method):
    X = _as_design(X)
    y = np.asarray(y, dtype=np.float64)
    n, p = X.shape
    if y.shape != (n,):
        raise ValueError("y must have one entry per row of X")
    Xs, ys = _sorted_by_response(X, y)
    H = int(_reduced_slices(n, n_slices))
    bounds = _slice_bounds(ys, H)
    n_used = len(bounds) - 1
    if n_used < 2:
        raise DegenerateSlices(f"only {n_used} slice(s) after merging tied responses")
    w = whiten(Xs)

    if method == "SIR":
        M = _sir_matrix(w.Z, bounds)
        k_max = min(p, n_used)
    else:
        M = _save_matrix(w.Z, bounds)
        k_max = p
    k = k_max if n_directions is None else min(n_directions, k_max)

    evals, evecs = np.linalg.eigh(M)
    evals, evecs = evals[::-1][:k], evecs[:, ::-1][:, :k]
    B = _back_substitute(w.R, n, np.ascontiguousarray(evecs))
    directions = np.column_stack([_canonicalize(B[:, c].copy()) for c in range(k)])
    return SdrResult(
        directions=directions,
        eigenvalues=np.maximum(evals, 0.0),
        method=method,
        n_slices=n_used,
        matrix=M,
    )


def fit_sir(X, y, n_slices: int = DEFAULT_SLICES, n_directions: int | None = None) -> SdrResult:
    """Sliced inverse regression.

    The candidate matrix is the slice-size weighted covariance of the
    slice means of the whitened design.  When ``n < 2 * n_slices`` the
    slice count drops to ``max(2, n // 2)``.  At most ``min(p, slices)``
    directions are returned.
    """
    return _fit(X, y, n_slices, n_directions, "SIR")


def fit_save(X, y, n_slices: int = DEFAULT_SLICES, n_directions: int | None = None) -> SdrResult:
    """Sliced average variance estimation.

    The candidate matrix is ``sum_k (n_k / n) (I - Var(Z | slice k))^2``
    with within-slice covariances taken on slice-centered whitened data.
    """
    return _fit(X, y, n_slices, n_directions, "SAVE")
