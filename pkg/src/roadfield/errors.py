"""Exception hierarchy shared by every module.

Solver failures, malformed inputs and degenerate geometry get distinct
types so the command line driver can map them onto exit codes without
string matching.
"""


class RoadFieldError(Exception):
    """Base class for all package errors."""


class DomainError(RoadFieldError, ValueError):
    """Argument outside the mathematical domain of an evaluation."""


class DimensionMismatchError(RoadFieldError, ValueError):
    """Array shapes inconsistent with the grid or system."""


class GridConstructionError(RoadFieldError, ValueError):
    """Grading parameters produce an unusable node set."""


class NonConvergenceError(RoadFieldError, RuntimeError):
    """Newton iteration exhausted its budget without meeting the tolerance."""

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = history or []


class SingularLinearSystemError(RoadFieldError, RuntimeError):
    """Inner linear solve failed or stagnated."""


class NegativeSpeedError(RoadFieldError, RuntimeError):
    """Converged wave speed came out nonpositive."""


class MultipleComponentsError(RoadFieldError, RuntimeError):
    """Level set is not a single bottom-to-road graph."""


class LevelOutOfRangeError(RoadFieldError, ValueError):
    """Requested level lies outside the range of the field."""


class FrontDetachedError(RoadFieldError, RuntimeError):
    """Front polyline does not approach the road closely enough."""


class InsufficientPointsError(RoadFieldError, RuntimeError):
    """Fit window contains too few polyline points."""


class BallTouchesBoundaryError(RoadFieldError, ValueError):
    """Energy ball is not strictly inside the strip."""


class UnconvergedInputError(RoadFieldError, ValueError):
    """A check requiring a converged solution received something else."""


class StabilityViolationError(RoadFieldError, RuntimeError):
    """Time step produced values outside the invariant range."""


class LevelSetEmptyError(RoadFieldError, RuntimeError):
    """No grid row crosses the requested level."""


class NonFiniteDataError(RoadFieldError, ValueError):
    """Plot input contains NaN or infinities."""


class ConfigError(RoadFieldError, ValueError):
    """Problem in a run configuration file or override."""


class UnknownKeyError(ConfigError):
    """Configuration key is not recognised."""


class ConfigTypeError(ConfigError):
    """Configuration value has the wrong type."""


class ConfigRangeError(ConfigError):
    """Configuration value is outside its admissible range."""


class GridResolutionWarning(UserWarning):
    """Near-road spacing does not resolve the regularisation width."""


class ModelAssumptionWarning(UserWarning):
    """Parameter combination outside the range the asymptotics assume."""
