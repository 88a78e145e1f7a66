"""Comparison methods: Nadaraya-Watson smoothing, global SDR features and local SIR."""

import numpy as np

from ..sdr import DEFAULT_SLICES, fit_save, fit_sir


def silverman_bandwidth(n: int, p: int) -> float:
    """Normal-reference bandwidth for standardized data."""
    return (4.0 / (p + 2)) ** (1.0 / (p + 4)) * n ** (-1.0 / (p + 4))


def nw_predict(X_train, y_train, X_test, bandwidth: float | None = None) -> np.ndarray:
    """Gaussian-kernel Nadaraya-Watson regression on standardized inputs.

    Inputs are standardized with the training mean and standard deviation.
    Without an explicit ``bandwidth`` the Silverman rule is used.  Weights
    are shifted by each query's nearest distance, so tiny bandwidths
    reproduce the nearest training response instead of underflowing.
    """
    X_train = np.asarray(X_train, dtype=np.float64)
    X_test = np.asarray(X_test, dtype=np.float64)
    y_train = np.asarray(y_train, dtype=np.float64)
    mu = X_train.mean(axis=0)
    sd = X_train.std(axis=0)
    sd[sd == 0] = 1.0
    A = (X_train - mu) / sd
    B = (X_test - mu) / sd
    n, p = A.shape
    h = silverman_bandwidth(n, p) if bandwidth is None else bandwidth

    d2 = (B**2).sum(1)[:, None] + (A**2).sum(1)[None, :] - 2 * B @ A.T
    d2 = np.maximum(d2, 0.0)
    logw = -(d2 - d2.min(axis=1, keepdims=True)) / (2 * h * h)
    W = np.exp(logw)
    return (W @ y_train) / W.sum(axis=1)


def sdr_features(X_train, y_train, method: str, n_slices: int = DEFAULT_SLICES) -> np.ndarray:
    """Directions (columns) of a global SIR or SAVE fit with as many directions as allowed."""
    fit = {"SIR": fit_sir, "SAVE": fit_save}[method.upper()]
    return fit(X_train, y_train, n_slices=n_slices).directions


def nearest_neighbors(X, x0, k: int) -> np.ndarray:
    """Indices of the ``k`` rows closest to ``x0``; equal distances keep the lower index."""
    d = ((np.asarray(X) - np.asarray(x0)) ** 2).sum(axis=1)
    return np.argsort(d, kind="mergesort")[:k]


def local_sir(X, y, x0, k: int, n_slices: int = DEFAULT_SLICES) -> np.ndarray:
    """Leading SIR direction fitted on the ``k`` nearest neighbors of ``x0``."""
    X = np.asarray(X, dtype=np.float64)
    n, p = X.shape
    if k < max(10, p) or k > n:
        raise ValueError(f"k must lie in [max(10, p), n] = [{max(10, p)}, {n}]")
    nb = nearest_neighbors(X, x0, k)
    return fit_sir(X[nb], np.asarray(y)[nb], n_slices=n_slices).leading
