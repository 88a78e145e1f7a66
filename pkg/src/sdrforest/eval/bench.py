"""Benchmark drivers for predictive accuracy and local-importance recovery.

Every method is scored by its best test error over a hyperparameter grid,
and predictive results are reported as improvement over the axis-aligned
forest: ``1 - mse_method / mse_rf``.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import DegenerateKernel, SdrForestError
from ..forest import fit_forest, kernel_from_leaves
from ..lsvi import lsvi_from_weights
from ..sdr import DEFAULT_SLICES, fit_save, fit_sir
from ..tree import FitParams, resolve_m_try
from .baselines import local_sir, nw_predict, sdr_features
from .metrics import mse, trace_correlation
from .simulations import LOCAL, PREDICTIVE, SimulationSpec, gen_simulation

logger = logging.getLogger(__name__)

METHODS = ("DRF", "RF", "SIR+RF", "SAVE+RF", "NW", "SIR+NW", "SAVE+NW")
LSVI_METHODS = ("DRF", "SIR", "SAVE", "LocalSIR")


@dataclass(frozen=True)
class PredictiveConfig:
    simulations: tuple[str, ...] = PREDICTIVE
    methods: tuple[str, ...] = METHODS
    n_train: int = 2000
    n_test: int = 1000
    replicates: int = 5
    n_trees: int = 100
    m_try_grid: tuple = ("third", "all")
    n_min_grid: tuple[int, ...] = (1, 5)
    n_slices: int = DEFAULT_SLICES
    seed: int = 0
    workers: int = 1

    @classmethod
    def full(cls, **kw):
        """Full-scale settings: 50 replicates, 500 trees, 12-point grid."""
        base = dict(replicates=50, n_trees=500, m_try_grid=(2, 4, 6, "third", "sqrt", "all"))
        base.update(kw)
        return cls(**base)


@dataclass(frozen=True)
class LsviConfig:
    simulations: tuple[str, ...] = LOCAL
    methods: tuple[str, ...] = LSVI_METHODS
    snrs: tuple[float, ...] = (3.0,)
    p: int = 10
    n: int = 2000
    n_points: int = 100
    replicates: int = 1
    n_trees: int = 100
    m_try: int = 5
    n_min_grid: tuple[int, ...] = (3, 10, 25, 50, 100)
    k_grid: tuple = ("max10p", 25, 50, 100)
    n_slices: int = DEFAULT_SLICES
    seed: int = 0
    workers: int = 1

    @classmethod
    def full(cls, **kw):
        base = dict(snrs=(5.0, 3.0, 1.5, 1.0, 0.75), replicates=50, n_trees=500)
        base.update(kw)
        return cls(**base)


@dataclass
class BenchResult:
    """Raw per-replicate rows plus a per-(simulation, method) summary."""

    rows: list[dict] = field(default_factory=list)

    def summary(self, value: str = "improvement") -> list[dict]:
        groups: dict[tuple, list[float]] = {}
        for r in self.rows:
            key = tuple(r[k] for k in ("suite", "simulation", "method") if k in r)
            groups.setdefault(key, []).append(r[value])
        out = []
        for key, vals in groups.items():
            v = np.asarray(vals, dtype=float)
            v = v[np.isfinite(v)]
            out.append({
                "suite": key[0], "simulation": key[1], "method": key[2], "n": len(v),
                "mean": float(v.mean()) if v.size else math.nan,
                "std": float(v.std(ddof=1)) if v.size > 1 else 0.0,
                "median": float(np.median(v)) if v.size else math.nan,
            })
        return out

    def select(self, **match) -> list[dict]:
        return [r for r in self.rows if all(r.get(k) == v for k, v in match.items())]


def _grid(config, p):
    m_tries = sorted({resolve_m_try(m, p) for m in config.m_try_grid})
    return [(m, n_min) for m in m_tries for n_min in config.n_min_grid]


def _best_forest_mse(X, y, Xt, yt, config, use_sdr, seed):
    best, best_setting = math.inf, None
    for m_try, n_min in _grid(config, X.shape[1]):
        params = FitParams(n_min=n_min, m_try=m_try, n_slices=config.n_slices, use_sdr=use_sdr)
        f = fit_forest(X, y, params, n_trees=config.n_trees, seed=seed, workers=config.workers)
        err = mse(yt, f.predict(Xt))
        if err < best:
            best, best_setting = err, f"m_try={m_try},n_min={n_min}"
    return best, best_setting


def _method_mse(method, X, y, Xt, yt, config, seed):
    if method in ("DRF", "RF"):
        return _best_forest_mse(X, y, Xt, yt, config, method == "DRF", seed)
    base, _, head = method.partition("+")
    if not head:
        return mse(yt, nw_predict(X, y, Xt)), "silverman"
    B = sdr_features(X, y, base, config.n_slices)
    Z, Zt = X @ B, Xt @ B
    if head == "NW":
        return mse(yt, nw_predict(Z, y, Zt)), f"d={B.shape[1]}"
    err, setting = _best_forest_mse(Z, y, Zt, yt, config, False, seed)
    return err, f"d={B.shape[1]},{setting}"


def run_predictive_bench(config: PredictiveConfig = PredictiveConfig()) -> BenchResult:
    """Replicated train/test comparison of all methods on each simulation."""
    unknown = set(config.methods) - set(METHODS)
    if unknown:
        raise ValueError(f"unknown methods {sorted(unknown)}")
    methods = list(config.methods)
    if "RF" not in methods:
        methods.append("RF")
    result = BenchResult()
    for sim in config.simulations:
        for rep in range(config.replicates):
            train = gen_simulation(SimulationSpec(sim, config.n_train, seed=config.seed * 100_003 + 2 * rep))
            test = gen_simulation(SimulationSpec(sim, config.n_test, seed=config.seed * 100_003 + 2 * rep + 1))
            forest_seed = config.seed * 100_003 + rep
            errs = {}
            for method in methods:
                errs[method] = _method_mse(method, train.X, train.y, test.X, test.y, config,
                                           forest_seed)
            for method in config.methods:
                err, setting = errs[method]
                result.rows.append({
                    "suite": "predictive", "simulation": sim, "method": method,
                    "replicate": rep, "mse": err,
                    "improvement": 1.0 - err / errs["RF"][0], "setting": setting,
                })
            logger.info("%s replicate %d: %s", sim, rep,
                        ", ".join(f"{m}={errs[m][0]:.4g}" for m in config.methods))
    return result


def _unit(g):
    nrm = np.linalg.norm(g)
    return g / nrm if nrm > 0 else None


def run_lsvi_bench(config: LsviConfig = LsviConfig()) -> BenchResult:
    """Trace correlation between estimated local directions and true gradients.

    Test points are drawn from the training sample.  DRF and local SIR are
    credited with their best value over their tuning grids at each point,
    which requires the true gradient and is only meaningful here.
    """
    unknown = set(config.methods) - set(LSVI_METHODS)
    if unknown:
        raise ValueError(f"unknown methods {sorted(unknown)}")
    result = BenchResult()
    for sim in config.simulations:
        for snr in config.snrs:
            for rep in range(config.replicates):
                seed = config.seed * 100_003 + rep
                data = gen_simulation(SimulationSpec(sim, config.n, p=config.p, snr=snr, seed=seed))
                X, y = data.X, data.y
                rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(7,)))
                points = np.sort(rng.choice(config.n, size=config.n_points, replace=False))
                grads = data.gradient(X[points])
                scores = {m: np.full(config.n_points, np.nan) for m in config.methods}

                if "DRF" in config.methods:
                    for n_min in config.n_min_grid:
                        params = FitParams(n_min=n_min, m_try=min(config.m_try, config.p),
                                           n_slices=config.n_slices)
                        f = fit_forest(X, y, params, n_trees=config.n_trees, seed=seed,
                                       workers=config.workers)
                        leaves = f.apply(X)
                        W = kernel_from_leaves(leaves[points], leaves)
                        for k, i in enumerate(points):
                            g = _unit(grads[k])
                            if g is None:
                                continue
                            try:
                                d = lsvi_from_weights(X, X[i], W[k]).direction
                            except DegenerateKernel:
                                continue
                            scores["DRF"][k] = np.fmax(scores["DRF"][k], trace_correlation(d, g))

                for name, fit in (("SIR", fit_sir), ("SAVE", fit_save)):
                    if name in config.methods:
                        d = fit(X, y, n_slices=config.n_slices).leading
                        for k in range(config.n_points):
                            g = _unit(grads[k])
                            if g is not None:
                                scores[name][k] = trace_correlation(d, g)

                if "LocalSIR" in config.methods:
                    ks = sorted({max(10, config.p) if k == "max10p" else int(k)
                                 for k in config.k_grid})
                    for k_nb in ks:
                        for k, i in enumerate(points):
                            g = _unit(grads[k])
                            if g is None:
                                continue
                            try:
                                d = local_sir(X, y, X[i], k_nb, config.n_slices)
                            except SdrForestError:
                                continue
                            scores["LocalSIR"][k] = np.fmax(scores["LocalSIR"][k],
                                                            trace_correlation(d, g))

                for method in config.methods:
                    for k, i in enumerate(points):
                        result.rows.append({
                            "suite": "lsvi", "simulation": sim, "method": method,
                            "snr": snr, "replicate": rep, "point": int(i),
                            "trace_correlation": float(scores[method][k]),
                        })
                logger.info("%s snr=%g replicate %d: %s", sim, snr, rep, ", ".join(
                    f"{m} median={np.nanmedian(scores[m]):.3f}" for m in config.methods))
    return result
