"""Exception types raised by the toolkit."""


class SleError(Exception):
    """Base class for all errors raised by sle_rho."""


class DomainError(SleError, ValueError):
    """An argument lies outside the domain of the formula."""


class CoincidentPointError(DomainError):
    """Two marked points (or a marked point and the driving value) coincide."""


class StoppedStateError(SleError):
    """A step was requested on a state that has already stopped."""


class StepRejected(SleError):
    """The collision guard rejected a step; retry with a smaller step."""

    def __init__(self, message, index=None, kind="collision"):
        super().__init__(message)
        self.index = index
        self.kind = kind


class BranchError(SleError):
    """A conformal map left its target domain beyond tolerance."""


class WindowError(DomainError):
    """Quadrature parameters are outside the finiteness window."""


class QuadratureError(SleError):
    """Adaptive quadrature failed to reach the requested tolerance."""


class GridTooCoarse(SleError):
    """Finite-difference grid does not resolve the derivatives."""


class ConfigError(SleError, ValueError):
    """Run configuration failed validation."""
