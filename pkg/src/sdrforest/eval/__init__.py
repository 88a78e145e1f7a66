from .baselines import local_sir, nw_predict, silverman_bandwidth
from .bench import (BenchResult, LsviConfig, PredictiveConfig, run_lsvi_bench,
                    run_predictive_bench)
from .metrics import mse, r2, trace_correlation
from .simulations import PROBLEMS, Simulation, SimulationSpec, gen_simulation

__all__ = [
    "BenchResult", "LsviConfig", "PROBLEMS", "PredictiveConfig", "Simulation",
    "SimulationSpec", "gen_simulation", "local_sir", "mse", "nw_predict", "r2",
    "run_lsvi_bench", "run_predictive_bench", "silverman_bandwidth", "trace_correlation",
]
