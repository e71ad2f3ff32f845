"""
Exception hierarchy for the sparse recovery bench
"""


class SparseRecoveryError(Exception):
    """Base class for every error raised by this package"""


class ArgumentError(SparseRecoveryError, ValueError):
    """Invalid argument: bad dimensions, indices, empty input or non-positive lambda"""


class UnderdeterminedError(ArgumentError):
    """Batch CPA asked to solve a system with fewer equations (T*N) than atoms (M)"""


class DegeneracyError(SparseRecoveryError, ValueError):
    """Input data is degenerate for the requested operation"""


class NumericalError(SparseRecoveryError, ArithmeticError):
    """A factorization failed"""


class SingularityError(NumericalError):
    """Normal-equation matrix is too ill-conditioned to invert"""


class FormatError(SparseRecoveryError, ValueError):
    """Persisted file has the wrong magic or is truncated"""


class ConfigError(SparseRecoveryError, ValueError):
    """Experiment configuration is invalid"""
