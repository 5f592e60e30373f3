"""Error taxonomy for the bridge.

``BridgeError`` is the base for everything the bridge raises on purpose, so
callers can catch one type at the boundary. Subclasses distinguish the cases
the CLI maps to different exit codes.
"""

from __future__ import annotations


class BridgeError(Exception):
    """Base class for all errors raised deliberately by this package."""


class InvalidInput(BridgeError):
    """A caller-supplied argument is unusable (empty prompt, bad flag value)."""


class FormatError(BridgeError):
    """A file exists but its contents violate the expected format."""


class IoError(BridgeError):
    """Reading or writing a file failed at the OS level."""


class EncoderUnavailable(BridgeError):
    """The requested local encoder or pipeline directory is missing or broken."""


class ShapeMismatch(BridgeError):
    """Conditioning embeddings do not fit the pipeline's expected shape."""
