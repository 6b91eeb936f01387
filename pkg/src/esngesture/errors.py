"""Exception types raised across the package."""


class ESNGestureError(Exception):
    """Base class for all package errors."""


class ShapeError(ESNGestureError, ValueError):
    """Array dimensions do not agree."""


class ParameterError(ESNGestureError, ValueError):
    """A configuration value is outside its valid range."""


class NumericalError(ESNGestureError, ArithmeticError):
    """A factorization or iteration broke down."""


class InitializationError(ESNGestureError):
    """Reservoir weights could not be initialized."""


class TrainingError(ESNGestureError):
    """A readout could not be trained on the given data."""


class DatasetError(ESNGestureError):
    """A dataset manifest or payload file is invalid."""


class ProtocolError(ESNGestureError):
    """An evaluation protocol cannot be applied to the given records."""


class ModelFormatError(ESNGestureError):
    """A trained-model file is corrupt or has an unsupported version."""


class ConvergenceWarning(UserWarning):
    """An iterative method hit its iteration limit."""


class EvaluationError(ESNGestureError):
    """An evaluation fold failed."""


class ConfigError(ESNGestureError):
    """A pipeline configuration file is malformed."""
