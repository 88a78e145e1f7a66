"""Random forests whose trees split along locally estimated SIR/SAVE directions."""

from .forest import Forest, fit_forest, kernel_weights, oob_mse, permutation_importance
from .lsvi import LocalImportance, compute_lsvi, lsvi_from_weights
from .sdr import SdrResult, fit_save, fit_sir, make_slices, whiten
from .tree import AxisSplit, FitParams, ObliqueSplit, Tree, find_split, fit_tree, route

__version__ = "0.1.0"

__all__ = [
    "AxisSplit", "FitParams", "Forest", "LocalImportance", "ObliqueSplit", "SdrResult", "Tree",
    "compute_lsvi", "find_split", "fit_forest", "fit_save", "fit_sir", "fit_tree",
    "kernel_weights", "lsvi_from_weights", "make_slices", "oob_mse", "permutation_importance",
    "route", "whiten",
]
