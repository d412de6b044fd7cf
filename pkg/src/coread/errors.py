"""Exception hierarchy.

Every error raised on bad input derives from :class:`CoreadError`; the CLI maps
the three families below onto exit codes (config 2, data 3, numerical 4).
"""

from __future__ import annotations


class CoreadError(Exception):
    exit_code = 3


class ConfigError(CoreadError, ValueError):
    exit_code = 2


class DataError(CoreadError, ValueError):
    exit_code = 3


class SchemaError(DataError):
    """A row or column does not match the documented CSV schema."""

    def __init__(self, message: str, *, path: str | None = None, row: int | None = None, column: str | None = None):
        where = []
        if path is not None:
            where.append(str(path))
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
        self.path = path
        self.row = row
        self.column = column


class ForeignKeyError(DataError):
    def __init__(self, kind: str, key: str, *, path: str | None = None, row: int | None = None):
        loc = f" ({path}, row {row})" if path is not None and row is not None else ""
        super().__init__(f"unresolvable {kind} reference {key!r}{loc}")
        self.kind = kind
        self.key = key


class DuplicateIdError(DataError):
    def __init__(self, kind: str, key: str, *, path: str | None = None):
        loc = f" in {path}" if path is not None else ""
        super().__init__(f"duplicate {kind} id {key!r}{loc}")
        self.kind = kind
        self.key = key


class IntervalError(DataError):
    """An interval whose start lies after its end."""


class UnknownIdError(DataError, KeyError):
    def __init__(self, kind: str, key: str):
        super().__init__(f"unknown {kind} id {key!r}")
        self.kind = kind
        self.key = key

    def __str__(self) -> str:  # KeyError quotes its message otherwise
        return self.args[0]


class EmptyInputError(DataError):
    pass


class DegenerateInputError(DataError):
    """Input is well formed but admits no defined answer (zero variance, zero mass)."""


class NumericalError(CoreadError, ArithmeticError):
    exit_code = 4


class NonConvergenceError(NumericalError):
    pass


class StageError(CoreadError):
    """A pipeline stage failed; wraps the original cause."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 3)
