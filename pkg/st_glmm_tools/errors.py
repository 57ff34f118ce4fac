"""Exceptions raised by st_glmm_tools."""

from st_glmm_tools.const import ExitCode


class StGlmmError(Exception):
    """Base class for all package errors."""

    exit_code: ExitCode = ExitCode.USAGE


class UsageError(StGlmmError, ValueError):
    """Invalid input, flag or configuration."""


class DomainError(UsageError):
    """A value lies outside the domain of an operation."""


class SchemaError(UsageError):
    """A file does not match its documented layout."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NumericalError(StGlmmError, ArithmeticError):
    """A numerical procedure failed."""

    exit_code = ExitCode.NUMERICAL

    def __init__(
        self,
        message: str,
        *,
        min_eigenvalue: float | None = None,
        rank: int | None = None,
        gradient_norm: float | None = None,
        index: int | None = None,
    ):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue
        self.rank = rank
        self.gradient_norm = gradient_norm
        self.index = index


class ChainError(StGlmmError):
    """A sampler component failed at a given iteration."""

    def __init__(self, iteration: int, cause: Exception):
        super().__init__(f"iteration {iteration}: {cause}")
        self.iteration = iteration
        self.cause = cause
        if isinstance(cause, StGlmmError):
            self.exit_code = cause.exit_code


class StageError(StGlmmError):
    """A validation stage failed."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause
        if isinstance(cause, StGlmmError):
            self.exit_code = cause.exit_code
