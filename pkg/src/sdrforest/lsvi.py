"""Local subspace variable importance.

At a query point the forest kernel weights the training rows; the
direction of least weighted spread around the query is the local
direction along which the regression function changes most.  Only its
span is meaningful.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateKernel, RankCollapseWarning
from .forest import Forest, kernel_from_leaves
from .sdr import _canonicalize

# relative eigen-gap below which the smallest eigenvalue counts as repeated
COLLAPSE_RTOL = 1e-9


@dataclass(frozen=True)
class LocalImportance:
    query: np.ndarray
    direction: np.ndarray
    min_eigenvalue: float
    weight_mass: float
    rank_collapse: bool = False


def lsvi_from_weights(X, x0, weights) -> LocalImportance:
    """Smallest principal direction of the weighted covariance of ``X - x0``.

    Weights are normalized by their sum, so rescaling them changes nothing.
    """
    X = np.asarray(X, dtype=np.float64)
    x0 = np.asarray(x0, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    n, p = X.shape
    mass = float(w.sum())
    if not mass > 0:
        raise DegenerateKernel("kernel weights sum to zero")
    if np.count_nonzero(w > 0) < p + 1:
        raise DegenerateKernel(
            f"only {np.count_nonzero(w > 0)} rows carry weight; need at least {p + 1}")

    Xt = X - x0
    mu = w @ Xt / mass
    D = Xt - mu
    cov = (D * w[:, None]).T @ D / mass
    evals, evecs = np.linalg.eigh(cov)

    collapse = p > 1 and (evals[1] - evals[0]) < COLLAPSE_RTOL * np.trace(cov)
    if collapse:
        warnings.warn(f"smallest local eigenvalue is not simple at {x0}; "
                      "the returned direction is one of several", RankCollapseWarning,
                      stacklevel=2)
    return LocalImportance(
        query=x0,
        direction=_canonicalize(np.ascontiguousarray(evecs[:, 0])),
        min_eigenvalue=float(max(evals[0], 0.0)),
        weight_mass=mass,
        rank_collapse=bool(collapse),
    )


def compute_lsvi(forest: Forest, X_train, x0, train_leaves=None) -> LocalImportance:
    """Local importance direction at ``x0``.

    ``train_leaves`` (the output of ``forest.apply(X_train)``) may be
    passed to avoid re-routing the training set for every query.
    """
    X_train = np.asarray(X_train, dtype=np.float64)
    if train_leaves is None:
        train_leaves = forest.apply(X_train)
    w = kernel_from_leaves(forest.apply(np.atleast_2d(x0)), train_leaves)[0]
    return lsvi_from_weights(X_train, x0, w)
