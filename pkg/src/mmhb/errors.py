"""Exception types shared across the package."""


class MMHBError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(MMHBError, ValueError):
    """Point dimensions do not match the game's (n, m)."""


class InvalidRank(MMHBError, ValueError):
    """Requested factor rank is outside [0, dim]."""


class NonFiniteState(MMHBError, FloatingPointError):
    """A single update produced a non-finite state."""


class EmptyTrajectory(MMHBError, ValueError):
    """Operation requires a trajectory with at least one state."""


class ConvergenceFailure(MMHBError, RuntimeError):
    """Dense eigensolver did not converge."""


class AssumptionViolated(MMHBError, RuntimeError):
    """A spectral-theory precondition does not hold for this game."""


class PreconditionViolated(MMHBError, RuntimeError):
    """Structural precondition (rank, distinctness, squareness) failed."""


class ConfigError(MMHBError, ValueError):
    """Bad experiment configuration; carries the offending field path."""

    def __init__(self, message, field=None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class UnknownExperiment(MMHBError, KeyError):
    """Repro name not present in the registry."""


class NotEquilibriumWarning(UserWarning):
    """Jacobian requested at a point that is not a critical point."""
