"""Exception hierarchy shared by all zmkit modules."""


class ZMKitError(Exception):
    """Base class for every error raised by zmkit."""


class ScoreParseError(ZMKitError):
    """The score is not well-formed XML."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)


class ScoreStructureError(ZMKitError):
    """The XML parses but lacks required MusicXML structure."""


class MappingError(ZMKitError):
    """A yulmyeong token or pitch name cannot be resolved."""


class EmptyDataError(ZMKitError):
    pass


class ScopeError(ZMKitError):
    pass


class InsufficientDataError(ZMKitError):
    pass


class UndefinedR2Error(ZMKitError):
    """Observed log-frequencies have zero variance."""


class DomainError(ZMKitError, ValueError):
    pass


class BudgetError(ZMKitError):
    """A lattice enumeration would exceed its point budget."""
