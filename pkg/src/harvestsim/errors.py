"""Exception types shared across the simulator."""


class ConfigurationError(ValueError):
    """A config object violates one of its invariants."""


class InsufficientDataError(ValueError):
    """Too few points to run the requested fit."""


class FitFailureError(RuntimeError):
    """Model fit produced a degenerate or non-ellipsoid solution."""


class UnreachableError(RuntimeError):
    """Inverse kinematics could not reach the target pose."""


class IllegalTransitionError(ValueError):
    """Event is not legal in the current harvest stage."""


class EmptyTrialError(ValueError):
    """A trial was requested with zero peppers."""


class ComparisonError(ValueError):
    """Report and reference describe different trials."""
