"""Exception types shared across the package."""


class ManitestError(Exception):
    """Base class for all package errors."""


class InvalidParams(ManitestError):
    """Transformation parameters outside the group's valid range (e.g. scale <= 0)."""


class DimensionMismatch(ManitestError):
    """Two images (or an image and a model) disagree on their dimensions."""


class DegenerateMetric(ManitestError):
    """The pullback metric vanished (trace ~ 0); geodesic distances are meaningless."""


class CorruptMap(ManitestError):
    """A predecessor chain in a distance map does not terminate at the identity."""


class OracleFailure(ManitestError):
    """An external classifier subprocess died, timed out, or replied garbage."""


class EmptyClass(ManitestError):
    """A training set is missing examples for one of its classes."""


class ZeroImage(ManitestError):
    """The input image has zero L2 norm, so the normalized score is undefined."""
