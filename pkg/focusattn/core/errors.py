# focusattn/core/errors.py

"""Exception hierarchy. Everything derives from ValueError so callers that
catch bad-input errors generically keep working."""


class FocusAttentionError(ValueError):
    """Root of all focusattn errors."""


class ShapeMismatchError(FocusAttentionError):
    """Operand shapes are incompatible."""


class SupportMismatchError(FocusAttentionError):
    """A sparse structure does not have the support an operation requires."""


class EmptyRowError(FocusAttentionError):
    """An attention row lost every candidate position."""

    def __init__(self, message: str, row: int):
        super().__init__(message)
        self.row = row


class ConfigError(FocusAttentionError):
    """Invalid preset, schedule or run configuration."""


class GeometryError(FocusAttentionError):
    """Window geometry or chain alignment is inconsistent."""


class TensorFormatError(FocusAttentionError):
    """A raw tensor file is malformed."""
