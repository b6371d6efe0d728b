"""Exception types raised across the package."""


class KdvLabError(Exception):
    """Base class for all package errors."""


class ZeroMeanViolation(KdvLabError, ValueError):
    """A mode s = 0 was supplied; fields are zero-mean by construction."""


class ModeOutOfRange(KdvLabError, IndexError):
    """A mode index exceeds the field's cutoff K."""


class NonFinite(KdvLabError, FloatingPointError):
    """The state overflowed, became NaN, or crossed the blowup guard."""

    def __init__(self, message, t=None):
        super().__init__(message if t is None else f"{message} (t={t:.6g})")
        self.t = t


class TruncationError(KdvLabError):
    """The Hill eigenproblem truncation is too small to resolve the requested edges."""


class IndefiniteCovariance(KdvLabError, ValueError):
    """An averaged covariance matrix has a clearly negative eigenvalue."""


class BoundaryWarning(UserWarning):
    """Actions were clamped at zero on more than 1% of the steps."""
