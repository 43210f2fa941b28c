"""
Exception hierarchy for pmlbound.

Each error carries a human-readable ``detail`` and the process ``exit_code``
the CLI reports for it: 1 for usage problems, 2 for numeric or enumeration
limits.
"""

USAGE_EXIT_CODE = 1
NUMERIC_EXIT_CODE = 2


class PMLBoundError(Exception):
    """Base class for all pmlbound errors."""

    exit_code = NUMERIC_EXIT_CODE

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail

    def diagnostic(self) -> str:
        """One-line, machine-parsable description for the error stream."""
        detail = self.detail.replace('"', "'").replace("\n", " ")
        return f'error kind={type(self).__name__} exit={self.exit_code} detail="{detail}"'


class UsageError(PMLBoundError):
    """Invalid command line or run configuration."""

    exit_code = USAGE_EXIT_CODE


class InvalidParameterError(UsageError, ValueError):
    """A numeric parameter is outside its legal range (b <= 0, alpha > 1/k, ...)."""


class InvalidWorkloadError(UsageError, ValueError):
    """Workload matrix violates its invariants (shape, finiteness, family constraints)."""


class DimensionMismatch(UsageError, ValueError):
    """Two inputs disagree on m or k, or an index is out of range."""


class WorkloadFormatError(UsageError):
    """Workload CSV could not be parsed."""

    def __init__(self, detail: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {detail}")
        self.line = line
        self.column = column


class SubsetExplosion(PMLBoundError):
    """Exact bound requested for more rows than the configured subset cap."""


class EnumerationTooLarge(PMLBoundError):
    """Histogram enumeration would exceed the oracle's state cap."""


class BracketFailure(PMLBoundError):
    """Calibration could not bracket the target within 2^64 of the initial guess."""


class NonMonotoneBracket(PMLBoundError):
    """Bound values increase in b somewhere inside the calibration bracket."""
