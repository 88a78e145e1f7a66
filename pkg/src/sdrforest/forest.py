"""Bootstrap ensembles of dimension reduction trees."""

import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, EmptyDataset, NoOobSamples, NonFiniteInput
from .tree import FitParams, Tree, fit_tree

logger = logging.getLogger(__name__)

DEFAULT_IMPORTANCE_REPEATS = 5


def fingerprint(X, y) -> dict:
    """Shape and content checksum identifying a training set."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    h = hashlib.sha256()
    h.update(X.astype("<f8").tobytes())
    h.update(y.astype("<f8").tobytes())
    return {"n_samples": int(X.shape[0]), "n_features": int(X.shape[1]),
            "checksum": h.hexdigest()}


def tree_rng(seed: int, tree_index: int) -> np.random.Generator:
    """Independent stream for one tree, fixed by ``(seed, tree_index)`` alone."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(tree_index,)))


def bootstrap_counts(seed: int, tree_index: int, n: int) -> np.ndarray:
    draws = tree_rng(seed, tree_index).integers(0, n, size=n)
    return np.bincount(draws, minlength=n)


@dataclass(frozen=True, eq=False)
class Forest:
    """A fitted forest.

    ``inbag[m, i]`` counts how often training row ``i`` was drawn for
    tree ``m``; rows with zero count are out-of-bag for that tree.
    ``standardization`` (an ``io.Standardization``) records the input
    scaling applied before fitting, if any; predictions expect scaled input.
    """

    trees: list[Tree]
    inbag: np.ndarray
    params: FitParams
    seed: int
    n_features: int
    fingerprint: dict
    feature_names: list[str] | None = None
    target_name: str | None = None
    standardization: object | None = field(default=None)

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def _check(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise DimensionMismatch(
                f"expected {self.n_features} features, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            raise NonFiniteInput("inputs must be finite")
        return np.ascontiguousarray(X)

    def apply(self, X) -> np.ndarray:
        """Leaf ids, shape ``(n_rows, n_trees)``."""
        X = self._check(X)
        return np.column_stack([t.apply(X) for t in self.trees])

    def predict(self, X) -> np.ndarray:
        X = self._check(X)
        total = np.zeros(X.shape[0])
        for t in self.trees:
            total += t.predict(X)
        return total / self.n_trees

    def kernel(self, A, B) -> np.ndarray:
        """Forest kernel matrix: share of trees in which ``A[i]`` and ``B[j]`` share a leaf."""
        return kernel_from_leaves(self.apply(A), self.apply(B))


def kernel_from_leaves(leaves_a: np.ndarray, leaves_b: np.ndarray) -> np.ndarray:
    M = leaves_a.shape[1]
    counts = np.zeros((leaves_a.shape[0], leaves_b.shape[0]), dtype=np.int64)
    for m in range(M):
        counts += leaves_a[:, m, None] == leaves_b[None, :, m]
    return counts / M


def _validate(X, y):
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] == 0:
        raise EmptyDataset(f"need a non-empty 2-d design, got shape {X.shape}")
    if y.shape != (X.shape[0],):
        raise DimensionMismatch(f"y has shape {y.shape}, expected ({X.shape[0]},)")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise NonFiniteInput("training data must be finite")
    return X, y


def fit_forest(X, y, params: FitParams = FitParams(), n_trees: int = 500, seed: int = 0,
               workers: int = 1, feature_names=None, target_name=None,
               standardization=None) -> Forest:
    """Fit ``n_trees`` trees on bootstrap resamples of size ``n``.

    Every tree draws from its own stream derived from ``(seed, index)``, so
    the result does not depend on ``workers``.  Tree growing releases the
    GIL, which lets a thread pool use several cores.
    """
    X, y = _validate(X, y)
    if X.shape[0] < 2:
        raise EmptyDataset("need at least two samples")
    if n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    n = X.shape[0]

    def grow(m):
        counts = bootstrap_counts(seed, m, n)
        return counts, fit_tree(X, y, params, np.repeat(np.arange(n), counts))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(grow, range(n_trees)))
    else:
        results = [grow(m) for m in range(n_trees)]

    inbag = np.vstack([c for c, _ in results]).astype(np.int32)
    return Forest(
        trees=[t for _, t in results],
        inbag=inbag,
        params=params,
        seed=seed,
        n_features=X.shape[1],
        fingerprint=fingerprint(X, y),
        feature_names=list(feature_names) if feature_names is not None else None,
        target_name=target_name,
        standardization=standardization,
    )


def kernel_weights(forest: Forest, x0, X_train) -> np.ndarray:
    """Weight of every training row for the query ``x0``."""
    return forest.kernel(np.atleast_2d(np.asarray(x0, dtype=np.float64)), X_train)[0]


def oob_mse(forest: Forest, X, y) -> float:
    """Out-of-bag MSE averaged over the trees that have OOB rows."""
    X, y = _validate(X, y)
    errs = []
    for m, t in enumerate(forest.trees):
        oob = forest.inbag[m] == 0
        if oob.any():
            errs.append(np.mean((t.predict(X[oob]) - y[oob]) ** 2))
    if not errs:
        raise NoOobSamples("no tree has out-of-bag samples")
    return float(np.mean(errs))


def permutation_importance(forest: Forest, X, y, seed: int = 0,
                           repeats: int = DEFAULT_IMPORTANCE_REPEATS) -> np.ndarray:
    """Out-of-bag permutation importance.

    For each tree and feature, the feature is shuffled among that tree's
    OOB rows and the rise in OOB MSE is recorded.  Results are averaged
    over ``repeats`` shuffles and then over trees.  Trees without OOB rows
    are skipped.
    """
    X, y = _validate(X, y)
    if X.shape[0] != forest.inbag.shape[1] or X.shape[1] != forest.n_features:
        raise DimensionMismatch("data does not match the forest's training set shape")
    p = X.shape[1]
    per_tree = []
    for m, t in enumerate(forest.trees):
        oob = np.flatnonzero(forest.inbag[m] == 0)
        if oob.size == 0:
            continue
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(m,)))
        Xo, yo = X[oob], y[oob]
        base = np.mean((t.predict(Xo) - yo) ** 2)
        inc = np.zeros(p)
        for j in range(p):
            for _ in range(repeats):
                Xp = Xo.copy()
                Xp[:, j] = Xo[rng.permutation(oob.size), j]
                inc[j] += np.mean((t.predict(Xp) - yo) ** 2) - base
        per_tree.append(inc / repeats)
    if not per_tree:
        raise NoOobSamples("no tree has out-of-bag samples")
    return np.mean(per_tree, axis=0)
