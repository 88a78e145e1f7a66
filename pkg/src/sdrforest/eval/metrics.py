import numpy as np

from ..errors import LengthMismatch, ZeroVariance, ZeroVector


def _pair(y, y_hat):
    y = np.asarray(y, dtype=np.float64).ravel()
    y_hat = np.asarray(y_hat, dtype=np.float64).ravel()
    if y.shape != y_hat.shape or y.size == 0:
        raise LengthMismatch(f"lengths {y.size} and {y_hat.size}")
    return y, y_hat


def mse(y, y_hat) -> float:
    y, y_hat = _pair(y, y_hat)
    return float(np.mean((y - y_hat) ** 2))


def r2(y, y_hat) -> float:
    """``1 - mse / Var(y)`` with the population variance."""
    y, y_hat = _pair(y, y_hat)
    var = float(np.var(y))
    if var == 0.0:
        raise ZeroVariance("r2 is undefined for a constant response")
    return 1.0 - mse(y, y_hat) / var


def trace_correlation(u, v) -> float:
    """Agreement of two one-dimensional spans: ``|cos(angle(u, v))|``.

    This is ``sqrt(tr(P_u P_v) / d)`` with ``d = 1``; it ignores sign and
    length.
    """
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    if u.shape != v.shape:
        raise LengthMismatch(f"lengths {u.size} and {v.size}")
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise ZeroVector("trace correlation needs nonzero vectors")
    return float(min(abs(u @ v) / (nu * nv), 1.0))
