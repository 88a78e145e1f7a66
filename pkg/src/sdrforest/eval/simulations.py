"""Synthetic regression problems with analytic mean and gradient.

Predictive problems (``sim1``-``sim4``, ``friedman1``-``friedman3``) use
their standard noise levels.  Local-importance problems (``lsvi1``-
``lsvi4``) draw covariates from ``U[-3, 3]^p`` and are usually run at a
target signal-to-noise ratio ``Var(m(X)) / sigma^2``.

Extra covariates beyond those a function uses are drawn from the same
distribution as the informative ones (``U[0, 1]`` for the Friedman
boxes) and are inert.
"""

import functools
import zlib
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..errors import UnknownSimulation

# ---------------------------------------------------------------------------
# covariate samplers
# ---------------------------------------------------------------------------


def _uniform(lo, hi):
    def sample(rng, n, p):
        return rng.uniform(lo, hi, size=(n, p))
    return sample


def _ar1_gaussian(rng, n, p):
    idx = np.arange(p)
    cov = 0.5 ** np.abs(idx[:, None] - idx[None, :])
    return rng.standard_normal((n, p)) @ np.linalg.cholesky(cov).T


_FRIEDMAN_BOX = np.array([[0.0, 100.0], [20.0, 280.0], [0.0, 1.0], [1.0, 11.0]])


def _friedman_box(rng, n, p):
    X = rng.uniform(0.0, 1.0, size=(n, p))
    X[:, :4] = _FRIEDMAN_BOX[:, 0] + X[:, :4] * (_FRIEDMAN_BOX[:, 1] - _FRIEDMAN_BOX[:, 0])
    return X


# ---------------------------------------------------------------------------
# mean functions and gradients
# ---------------------------------------------------------------------------


def _pad(X, *cols):
    G = np.zeros_like(X)
    for j, c in enumerate(cols):
        G[:, j] = c
    return G


def _active(stack):
    # index of the largest branch in a max{...} function
    return np.argmax(np.stack(stack), axis=0)


def _three_ridges(X):
    a, b = X[:, 0], X[:, 1]
    return [np.exp(-2 * (a - b) ** 2), 2 * np.exp(-0.5 * (a**2 + b**2)), np.exp(-(a + b) ** 2)]


def three_ridges_mean(X):
    return 20 * np.maximum.reduce(_three_ridges(X))


def three_ridges_grad(X):
    a, b = X[:, 0], X[:, 1]
    br = _three_ridges(X)
    k = _active(br)
    d1 = np.choose(k, [br[0] * -4 * (a - b), br[1] * -a, br[2] * -2 * (a + b)])
    d2 = np.choose(k, [br[0] * 4 * (a - b), br[1] * -b, br[2] * -2 * (a + b)])
    return 20 * _pad(X, d1, d2)


def _cross(X):
    a, b = X[:, 0], X[:, 1]
    return [np.exp(-18 * a**2), np.exp(-18 * b**2),
            1.75 * np.exp(-20 * (a + b) ** 2), 1.75 * np.exp(-20 * (a - b) ** 2)]


def cross_mean(X):
    return 20 * np.maximum.reduce(_cross(X))


def cross_grad(X):
    a, b = X[:, 0], X[:, 1]
    br = _cross(X)
    k = _active(br)
    d1 = np.choose(k, [br[0] * -36 * a, 0 * a, br[2] * -40 * (a + b), br[3] * -40 * (a - b)])
    d2 = np.choose(k, [0 * b, br[1] * -36 * b, br[2] * -40 * (a + b), br[3] * 40 * (a - b)])
    return 20 * _pad(X, d1, d2)


def _coef(values, p):
    v = np.zeros(p)
    v[: len(values)] = values
    return v


def _sim3_betas(p):
    b1 = _coef([1, 1, 1, 1, 1, 1], p) / np.sqrt(6)
    b2 = _coef([1, -1, 1, -1, 1, -1], p) / np.sqrt(6)
    return b1, b2


def sim3_mean(X):
    b1, b2 = _sim3_betas(X.shape[1])
    return (X @ b1) ** 2 + (X @ b2) ** 2


def sim3_grad(X):
    b1, b2 = _sim3_betas(X.shape[1])
    return 2 * np.outer(X @ b1, b1) + 2 * np.outer(X @ b2, b2)


def _sim4_betas(p):
    b1 = _coef([1, 2, 3, 4], p) / np.sqrt(30)
    b2 = _coef([-2, 1, -4, 3, 1, 2], p) / np.sqrt(35)
    b3 = _coef([0, 0, 0, 0, 2, -1, 2, 1, 2, 1], p) / np.sqrt(15)
    b4 = _coef([0, 0, 0, 0, 0, 0, -1, -1, 1, 1], p) / 2
    return b1, b2, b3, b4


def sim4_mean(X):
    b1, b2, b3, b4 = _sim4_betas(X.shape[1])
    return (X @ b1) * (X @ b2) ** 2 + (X @ b3) * (X @ b4)


def sim4_grad(X):
    b1, b2, b3, b4 = _sim4_betas(X.shape[1])
    u1, u2, u3, u4 = X @ b1, X @ b2, X @ b3, X @ b4
    return (np.outer(u2**2, b1) + np.outer(2 * u1 * u2, b2)
            + np.outer(u4, b3) + np.outer(u3, b4))


def friedman1_mean(X):
    return (10 * np.sin(np.pi * X[:, 0] * X[:, 1]) + 20 * (X[:, 2] - 0.5) ** 2
            + 10 * X[:, 3] + 5 * X[:, 4])


def friedman1_grad(X):
    c = 10 * np.pi * np.cos(np.pi * X[:, 0] * X[:, 1])
    one = np.ones(len(X))
    return _pad(X, c * X[:, 1], c * X[:, 0], 40 * (X[:, 2] - 0.5), 10 * one, 5 * one)


def _friedman_inner(X):
    x2, x3, x4 = X[:, 1], X[:, 2], X[:, 3]
    g = x2 * x3 - 1 / (x2 * x4)
    dg = (x3 + 1 / (x2**2 * x4), x2, 1 / (x2 * x4**2))
    return g, dg


def friedman2_mean(X):
    g, _ = _friedman_inner(X)
    return np.sqrt(X[:, 0] ** 2 + g**2)


def friedman2_grad(X):
    g, (d2, d3, d4) = _friedman_inner(X)
    f = np.sqrt(X[:, 0] ** 2 + g**2)
    return _pad(X, X[:, 0] / f, g * d2 / f, g * d3 / f, g * d4 / f)


def friedman3_mean(X):
    g, _ = _friedman_inner(X)
    return np.arctan(g / X[:, 0])


def friedman3_grad(X):
    g, (d2, d3, d4) = _friedman_inner(X)
    x1 = X[:, 0]
    r = x1**2 + g**2
    return _pad(X, -g / r, x1 * d2 / r, x1 * d3 / r, x1 * d4 / r)


def abs_sum_mean(X):
    return np.abs(X[:, 0]) + np.abs(X[:, 1])


def abs_sum_grad(X):
    return _pad(X, np.sign(X[:, 0]), np.sign(X[:, 1]))


def linear_quadratic_mean(X):
    return X[:, 0] + X[:, 1] ** 2


def linear_quadratic_grad(X):
    return _pad(X, np.ones(len(X)), 2 * X[:, 1])


def _axis_bumps(X):
    return [np.exp(-0.25 * X[:, 0] ** 2), np.exp(-0.25 * X[:, 1] ** 2)]


def axis_bumps_mean(X):
    return 5 * np.maximum.reduce(_axis_bumps(X))


def axis_bumps_grad(X):
    br = _axis_bumps(X)
    k = _active(br)
    d1 = np.where(k == 0, br[0] * -0.5 * X[:, 0], 0.0)
    d2 = np.where(k == 1, br[1] * -0.5 * X[:, 1], 0.0)
    return 5 * _pad(X, d1, d2)


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Problem:
    sampler: Callable
    mean: Callable
    grad: Callable
    default_p: int
    min_p: int
    sigma: float | None
    default_snr: float | None = None
    # informative coordinates are iid uniform on this box (enables quadrature)
    box2d: tuple[float, float] | None = None


PROBLEMS: dict[str, _Problem] = {
    "sim1": _Problem(_uniform(-3, 3), three_ridges_mean, three_ridges_grad, 5, 2, 1.0,
                     box2d=(-3, 3)),
    "sim2": _Problem(_uniform(-1, 1), cross_mean, cross_grad, 5, 2, 1.0, box2d=(-1, 1)),
    "sim3": _Problem(_ar1_gaussian, sim3_mean, sim3_grad, 12, 6, 0.5),
    "sim4": _Problem(_ar1_gaussian, sim4_mean, sim4_grad, 10, 10, 0.5),
    "friedman1": _Problem(_uniform(0, 1), friedman1_mean, friedman1_grad, 10, 5, 1.0),
    "friedman2": _Problem(_friedman_box, friedman2_mean, friedman2_grad, 4, 4, 1.0),
    "friedman3": _Problem(_friedman_box, friedman3_mean, friedman3_grad, 4, 4, 1.0),
    "lsvi1": _Problem(_uniform(-3, 3), abs_sum_mean, abs_sum_grad, 10, 2, None, 3.0,
                      box2d=(-3, 3)),
    "lsvi2": _Problem(_uniform(-3, 3), linear_quadratic_mean, linear_quadratic_grad, 10, 2,
                      None, 3.0, box2d=(-3, 3)),
    "lsvi3": _Problem(_uniform(-3, 3), axis_bumps_mean, axis_bumps_grad, 10, 2, None, 3.0,
                      box2d=(-3, 3)),
    "lsvi4": _Problem(_uniform(-3, 3), three_ridges_mean, three_ridges_grad, 10, 2, None, 3.0,
                      box2d=(-3, 3)),
}

PREDICTIVE = ("sim1", "sim2", "sim3", "sim4", "friedman1", "friedman2", "friedman3")
LOCAL = ("lsvi1", "lsvi2", "lsvi3", "lsvi4")

# closed forms for U[-3, 3] covariates
_EXACT_VARIANCE = {"lsvi1": 1.5, "lsvi2": 10.2}


def _problem(name: str) -> _Problem:
    try:
        return PROBLEMS[name]
    except KeyError:
        raise UnknownSimulation(f"unknown simulation {name!r}; choose from {sorted(PROBLEMS)}")


@functools.lru_cache(maxsize=None)
def signal_variance(name: str, p: int | None = None) -> float:
    """``Var(m(X))`` under the simulation's covariate distribution.

    Exact where a closed form is known, midpoint quadrature for functions
    of two uniform coordinates, otherwise a fixed-seed Monte Carlo
    estimate from two million draws.
    """
    prob = _problem(name)
    p = prob.default_p if p is None else p
    if name in _EXACT_VARIANCE:
        return _EXACT_VARIANCE[name]
    if prob.box2d is not None:
        lo, hi = prob.box2d
        k = 2000
        g = lo + (np.arange(k) + 0.5) * (hi - lo) / k
        a, b = np.meshgrid(g, g, indexing="ij")
        # these means only read the first two columns
        m = prob.mean(np.column_stack([a.ravel(), b.ravel()]))
        return float(m.var())
    rng = np.random.default_rng(20210101)
    return float(prob.mean(prob.sampler(rng, 2_000_000, p)).var())


@dataclass(frozen=True)
class SimulationSpec:
    """What to simulate.

    Give at most one of ``sigma`` and ``snr``; with neither, the problem's
    default noise is used.
    """

    name: str
    n: int
    p: int | None = None
    sigma: float | None = None
    snr: float | None = None
    seed: int = 0

    def __post_init__(self):
        prob = _problem(self.name)
        if self.sigma is not None and self.snr is not None:
            raise ValueError("give sigma or snr, not both")
        if self.p is not None and self.p < prob.min_p:
            raise ValueError(f"{self.name} needs p >= {prob.min_p}")
        if self.n < 1:
            raise ValueError("n must be positive")

    @property
    def dim(self) -> int:
        return _problem(self.name).default_p if self.p is None else self.p

    def noise_sd(self) -> float:
        prob = _problem(self.name)
        if self.sigma is not None:
            return float(self.sigma)
        snr = self.snr if self.snr is not None else prob.default_snr
        if snr is None:
            return float(prob.sigma)
        return float(np.sqrt(signal_variance(self.name, self.dim) / snr))


@dataclass(frozen=True)
class Simulation:
    X: np.ndarray
    y: np.ndarray
    mean: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray]
    sigma: float


def stream(seed: int, *keys) -> np.random.Generator:
    """Generator keyed by ``seed`` and a path of ints or strings."""
    path = tuple(zlib.crc32(k.encode()) if isinstance(k, str) else int(k) for k in keys)
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=path))


def gen_simulation(spec: SimulationSpec) -> Simulation:
    prob = _problem(spec.name)
    rng = stream(spec.seed, spec.name)
    X = prob.sampler(rng, spec.n, spec.dim)
    sigma = spec.noise_sd()
    y = prob.mean(X) + sigma * rng.standard_normal(spec.n)
    return Simulation(X=X, y=y, mean=prob.mean, gradient=prob.grad, sigma=sigma)
