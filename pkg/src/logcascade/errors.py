"""Exception hierarchy shared by every module of the package."""


class CascadeError(Exception):
    """Base class for all errors raised by :mod:`logcascade`."""


class ParameterError(CascadeError, ValueError):
    """Invalid model parameters, grids or call arguments."""


class InputDataError(CascadeError, ValueError):
    """User supplied data that cannot be used (bad rows, too short series)."""


class SynthesisError(CascadeError, RuntimeError):
    """Gaussian synthesis failed, e.g. a covariance matrix that cannot be factorized."""


class MeasureOverflowError(CascadeError, OverflowError):
    """exp(omega) would overflow while building a measure."""


class EstimationError(CascadeError, ValueError):
    """An estimator was called outside of its domain of validity."""


class QuadratureError(CascadeError, RuntimeError):
    """Adaptive quadrature did not reach the requested tolerance."""
