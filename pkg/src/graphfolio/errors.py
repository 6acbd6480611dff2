"""Exception hierarchy shared by all graphfolio modules."""

from __future__ import annotations


class GraphfolioError(Exception):
    """Base class for all graphfolio errors."""


class GraphfolioWarning(UserWarning):
    """Base class for recoverable data/model warnings."""


class ParameterError(GraphfolioError, ValueError):
    """An argument violates an operation's contract."""


class DataError(GraphfolioError):
    """Input data is malformed or inconsistent.

    ``line`` carries the 1-based line number for file parse errors.
    """

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class EmptyUniverseError(DataError):
    """No stock survived loading/validation."""


class InsufficientHistoryError(DataError):
    """The requested operation needs more trading days than available."""


class EmptyWindowError(DataError):
    """A date window does not intersect the trading calendar."""


class NumericalError(GraphfolioError):
    """A numerical routine hit a non-recoverable state (non-PD matrix, singularity)."""


class ConvergenceError(NumericalError):
    """An iterative solver exhausted its iteration budget.

    ``last`` carries the final iterate (matrix, message pair, ...) for diagnosis.
    """

    def __init__(self, message: str, last=None, n_iter: int | None = None):
        super().__init__(message)
        self.last = last
        self.n_iter = n_iter


class DivergenceError(NumericalError):
    """Training produced a non-finite objective.

    ``epoch`` names the first offending epoch.
    """

    def __init__(self, message: str, epoch: int | None = None):
        super().__init__(message)
        self.epoch = epoch


class InfeasibleTangencyError(GraphfolioError):
    """No asset's expected return exceeds the risk-free rate."""


class DegenerateGraphError(GraphfolioError):
    """The affinity graph carries no usable structure (e.g. all-zero affinities)."""
