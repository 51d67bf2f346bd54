"""Exception hierarchy shared by all quantlsh modules."""


class LshError(Exception):
    """Base class for every error raised by quantlsh."""


class InvalidParams(LshError, ValueError):
    """A numeric parameter is outside its admissible domain."""


class ZeroVector(InvalidParams):
    """An all-zero vector cannot be normalized."""


class DimensionMismatch(LshError, ValueError):
    pass


class IndexOutOfRange(LshError, IndexError):
    pass


class CExceedsBound(InvalidParams):
    """Approximation factor larger than sqrt(1 / (1 - rho0))."""


class EmptyDataset(LshError, ValueError):
    pass


class TTooLarge(LshError, ValueError):
    pass


class DatasetFormatError(LshError):
    """A dataset or snapshot file is malformed.

    The message names the byte offset (binary formats) or row (CSV)
    where parsing failed.
    """


class DegenerateGap(InvalidParams):
    """A collision probability is 0 or 1, so the gap log-ratio is undefined."""
