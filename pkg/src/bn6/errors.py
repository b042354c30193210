"""Exception types shared across the solver modules.

Plain precondition violations (bad dimension, empty bracket, unsupported
norm exponent) raise ValueError; the classes here signal numerical
conditions a caller may want to catch and react to.
"""


class BN6Error(Exception):
    """Base class for solver-state errors."""


class NearSingularError(BN6Error):
    """Linear operator has a singular value below the safe threshold."""


class NotConvergedError(BN6Error):
    """An iteration finished without meeting its tolerance."""


class BlowUpBeforeOneError(BN6Error):
    """Shooting trajectory left the trust region before reaching r = 1."""


class NoSignChangeError(BN6Error):
    """Matching function has one sign over the whole bracket."""


class NoRootInBracketError(BN6Error):
    """Root bracket for a scalar equation could not be established."""


class JacobianSingularError(BN6Error):
    """Newton Jacobian is singular at the current iterate."""


class DivergedError(BN6Error):
    """Damped Newton failed to reduce the residual at the smallest step."""


class RadialModeViolationError(BN6Error):
    """A mode index outside the certified angular range was requested."""


class UnderResolvedError(BN6Error):
    """Grid spacing is too coarse for the concentration scale."""


class BranchLostError(BN6Error):
    """Continuation failed to re-bracket the branch at the next amplitude."""


class AllPointsExcludedError(BN6Error):
    """Every tail point was rejected by the limit-extraction filter."""


class ConfigError(BN6Error):
    """Malformed run configuration."""
