"""Exception types shared across the toolkit.

Every deliberate failure raises one of these, so callers (including the CLI)
can map error classes to exit codes without string matching.
"""


class ToolkitError(Exception):
    """Base class for every error this package raises on purpose."""


class InvalidInput(ToolkitError):
    """An in-memory argument violates a documented precondition."""


class NumericalFailure(ToolkitError):
    """A numerical routine failed to converge or produced garbage."""


class FormatError(ToolkitError):
    """A file exists and is readable but its contents are malformed."""


class InvalidData(ToolkitError):
    """Well-formed data that violates a semantic contract (e.g. NaN vectors)."""


class DimensionError(ToolkitError):
    """Embedding dimensions disagree where they must match."""


class IoError(ToolkitError):
    """A path could not be read or written."""
