"""Exception types shared across the package."""


class NesgdError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(NesgdError):
    """Invalid configuration value (bad width, bad fraction, bad key)."""


class ShapeError(NesgdError):
    """Array or genome shape does not match what the operation expects."""


class DataError(NesgdError):
    """Invalid dataset contents (empty split, label out of range)."""


class StateError(NesgdError):
    """Operation called on an object in the wrong state."""


class FormatError(NesgdError):
    """Malformed binary file. Carries the byte offset of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class NonFiniteLossError(NesgdError):
    """Training loss became NaN or infinite."""
