"""Exception hierarchy shared by every dalmc module."""


class DalmcError(Exception):
    """Base class for all errors raised by dalmc."""


class InvalidInput(DalmcError, ValueError):
    """Non-finite or otherwise unusable numeric input."""


class InvalidShape(DalmcError, ValueError):
    """Matrix dimensions are inconsistent with the operation."""


class InvalidConfig(DalmcError, ValueError):
    """Configuration violates its invariants or does not fit the data."""


class NumericalFailure(DalmcError, ArithmeticError):
    """The solver produced a non-finite objective."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class DataError(DalmcError):
    """Base class for dataset loading problems."""


class DatasetIOError(DataError, OSError):
    """A dataset file is missing or unreadable."""


class FormatError(DataError, ValueError):
    """Declared and actual shapes disagree, or a file header is malformed."""


class ParseError(DataError, ValueError):
    """A cell could not be parsed as a number."""

    def __init__(self, message, row=None, col=None):
        super().__init__(message)
        self.row = row
        self.col = col
