"""Exception hierarchy.

Every error carries an ``exit_code`` used by the command-line front end:
2 for usage/configuration problems, 3 for data problems and 4 for numerical
non-convergence.
"""


class DelayLensError(Exception):
    exit_code = 1


class UsageError(DelayLensError, ValueError):
    exit_code = 2


class DataError(DelayLensError, ValueError):
    exit_code = 3


class SchemaError(DataError):
    """A required column is missing from an input file."""

    def __init__(self, column, message=None):
        self.column = column
        super().__init__(message or f"missing required column {column!r}")


class DuplicateKeyError(DataError):
    """The same event id occurs more than once within one release."""

    def __init__(self, ids):
        self.ids = sorted(ids)
        shown = ", ".join(self.ids[:10])
        more = "" if len(self.ids) <= 10 else f" (+{len(self.ids) - 10} more)"
        super().__init__(f"duplicate event ids in release: {shown}{more}")


class RejectError(DataError):
    """Raised in strict mode when any row fails validation."""

    def __init__(self, rejects):
        self.rejects = list(rejects)
        super().__init__(f"{len(self.rejects)} row(s) rejected; first: {self.rejects[0]}")


class OrderingError(DataError):
    """Releases must be appended with strictly increasing dates."""


class ChronologyError(DataError):
    """An event was first seen on or before its occurrence date."""


class MissingReferenceError(DataError):
    """A country or geographic reference needed for a covariate is absent."""


class GeoDomainError(DataError):
    """Coordinates outside [-90, 90] x [-180, 180]."""


class ConvergenceError(DelayLensError, RuntimeError):
    exit_code = 4

    def __init__(self, message, trace=None):
        self.trace = list(trace or [])
        super().__init__(message)
