"""Exception types raised across the package."""


class SdrForestError(Exception):
    """Base class for all package errors."""


# -- dimension reduction --------------------------------------------------


class RankDeficient(SdrForestError):
    """The centered design is (numerically) rank deficient."""

    def __init__(self, column: int):
        super().__init__(f"design is rank deficient at column {column}")
        self.column = column


class DegenerateSlices(SdrForestError):
    """Fewer than two slices remain after merging tied responses."""


# -- trees and forests ----------------------------------------------------


class NoValidSplit(SdrForestError):
    """Every projected value is identical, so no split separates the node."""


class DimensionMismatch(SdrForestError, ValueError):
    pass


class EmptyDataset(SdrForestError, ValueError):
    pass


class NonFiniteInput(SdrForestError, ValueError):
    pass


class NoOobSamples(SdrForestError):
    """No tree in the forest has an out-of-bag sample."""


class DataMismatch(SdrForestError, ValueError):
    """Data passed alongside a model does not match its training fingerprint."""


# -- local importance -----------------------------------------------------


class DegenerateKernel(SdrForestError):
    """The forest kernel puts too little weight around the query point."""


class RankCollapseWarning(UserWarning):
    """The smallest eigenvalue of the local covariance is not simple."""


# -- evaluation -----------------------------------------------------------


class UnknownSimulation(SdrForestError, KeyError):
    pass


class ZeroVector(SdrForestError, ValueError):
    pass


class LengthMismatch(SdrForestError, ValueError):
    pass


class ZeroVariance(SdrForestError, ValueError):
    pass


# -- io -------------------------------------------------------------------


class ParseError(SdrForestError):
    def __init__(self, message: str, line: int | None = None):
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{message}{where}")
        self.line = line


class MissingTarget(SdrForestError):
    pass


class NonNumericCell(SdrForestError):
    def __init__(self, row: int, col: str, value: str):
        super().__init__(f"non-numeric cell {value!r} at row {row}, column {col!r}")
        self.row = row
        self.col = col
        self.value = value


class ConstantColumn(SdrForestError):
    def __init__(self, column: str):
        super().__init__(f"column {column!r} is constant and cannot be standardized")
        self.column = column


class VersionMismatch(SdrForestError):
    pass


class CorruptModel(SdrForestError):
    def __init__(self, field: str, detail: str = ""):
        msg = f"corrupt model file: {field}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)
        self.field = field
