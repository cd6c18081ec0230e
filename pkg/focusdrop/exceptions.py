"""
Exception hierarchy

Library code raises these; the CLI catches FocusdropError, logs it and exits 1.
"""


class FocusdropError(Exception):
    """Base class for all errors raised by focusdrop"""


class ShapeError(FocusdropError, ValueError):
    """Operand shapes do not conform"""


class NonFiniteError(FocusdropError, FloatingPointError):
    """NaN or Inf produced by an op or found in a gradient"""


class ConfigError(FocusdropError, ValueError):
    """Invalid experiment configuration"""


class DatasetFormatError(FocusdropError, ValueError):
    """Dataset file is truncated or does not match its declared format"""


class SnapshotFormatError(FocusdropError, ValueError):
    """Tensor snapshot stream is malformed"""


class ModelSpecError(FocusdropError, ValueError):
    """Unknown architecture, unresolvable insertion point or unsupported head"""
