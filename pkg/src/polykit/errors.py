"""Exception types shared across the package.

The CLI maps each of these onto a distinct exit code, so library code
should raise the most specific type that applies.
"""


class PolykitError(Exception):
    """Base class for all package errors."""


class DataError(PolykitError):
    """Unusable input data: unreadable file, empty table, bad schema."""


class MemoryBudgetError(PolykitError):
    """A requested expansion exceeds the configured size budget."""


class TrainingDiverged(PolykitError):
    """Network training produced a non-finite loss."""


class ModelFormatError(PolykitError):
    """A serialized model or weight container could not be parsed."""
