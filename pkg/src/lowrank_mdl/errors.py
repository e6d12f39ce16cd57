"""Exception hierarchy shared by the solver, the coders and the CLI."""

from typing import Any, Optional


class LowRankMDLError(Exception):
    """Base class for every error raised by lowrank_mdl."""


class InvalidInputError(LowRankMDLError, ValueError):
    """Non-finite data, shape mismatch or a vector off the unit sphere."""


class DomainError(LowRankMDLError, ValueError):
    """Argument outside the domain of a special function or a coder."""


class EmptyRankError(LowRankMDLError):
    """The matrix has no singular value above the rank tolerance."""


class UnderflowError(LowRankMDLError, ValueError):
    """A singular value rounds to zero at the Sigma quantization precision."""


class ConsistencyError(LowRankMDLError):
    """The described pair does not reproduce the data losslessly."""


class ConfigError(LowRankMDLError, ValueError):
    """Invalid YAML configuration or flag combination."""


class PipelineError(LowRankMDLError):
    """The selection sweep produced no usable candidate."""


class FormatError(LowRankMDLError):
    """A frame or CSV file does not follow the expected format."""

    def __init__(self, message: str, path: Any = None, row: Optional[int] = None, column: Optional[int] = None):
        location = []
        if path is not None:
            location.append(str(path))
        if row is not None:
            location.append(f"row {row}")
        if column is not None:
            location.append(f"column {column}")
        if location:
            message = f"{message} ({', '.join(location)})"
        super().__init__(message)
        self.path = path
        self.row = row
        self.column = column


class ConvergenceError(LowRankMDLError):
    """The ALM iterations did not reach the requested tolerance.

    The last iterate travels with the error so that a sweep can skip the
    candidate and still warm start the next one from it.
    """

    def __init__(self, message: str, last_iterate: Any, residual: float, iterations: int,
                 index: Optional[int] = None, lam: Optional[float] = None):
        if index is not None:
            message = f"lambda #{index} ({lam:.6g}): {message}"
        super().__init__(message)
        self.last_iterate = last_iterate
        self.residual = residual
        self.iterations = iterations
        self.index = index
        self.lam = lam

    def at(self, index: int, lam: float) -> "ConvergenceError":
        """Same error, annotated with its position on a lambda path."""
        return ConvergenceError(str(self), self.last_iterate, self.residual, self.iterations, index=index, lam=lam)
