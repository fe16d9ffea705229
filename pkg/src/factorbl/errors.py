"""Exception hierarchy shared across the engine."""


class Error(Exception):
    """Base class for all factorbl errors."""


class BadInput(Error):
    """Caller passed an argument that violates a precondition."""


class UniverseMismatch(BadInput):
    """A file or spec references factors that are not in the universe."""


class MissingInput(BadInput):
    """An operation needs an input (e.g. market caps) that was not supplied."""


class InsufficientData(Error):
    """Too few observations to carry out the computation."""


class DegenerateSeries(Error):
    """A series has zero variance where positive variance is required."""


class SingularCovariance(Error):
    """Covariance matrix is singular or too ill-conditioned to invert."""


class DegenerateTangency(Error):
    """Tangency normalisation 1' Sigma^-1 mu is non-positive."""


class NonPositiveAversion(Error):
    """Derived or supplied risk aversion is not strictly positive."""


class EmptyChart(Error):
    """Chart spec contains no series to draw."""


class IoError(Error):
    """Output path cannot be written."""
