"""Exception types raised by the toolkit."""


class InfoflowError(ValueError):
    """Base class for all errors raised by :mod:`infoflow`."""


class DegeneratePolynomialError(InfoflowError):
    pass


class UnitCirclePoleError(InfoflowError):
    """A pole (open- or closed-loop) sits on, or too close to, the unit circle."""


class InvalidLoopError(InfoflowError):
    """Raised by :func:`infoflow.lti.ensure_valid` with the full violation list."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid feedback loop: " + "; ".join(self.violations))


class LogSingularityError(InfoflowError):
    def __init__(self, theta):
        self.theta = float(theta)
        super().__init__(f"log-singularity at node theta={self.theta:.12g}")


class QuadratureError(InfoflowError):
    pass


class DegenerateCovarianceError(InfoflowError):
    pass


class HorizonTooLargeError(InfoflowError):
    pass


class InsufficientDataError(InfoflowError):
    pass
