"""Exception types shared across the package."""


class AtomwalkError(Exception):
    """Base class for all errors raised by atomwalk."""


class InvalidParamsError(AtomwalkError, ValueError):
    """A parameter set violates its invariants (e.g. omega_r <= 0)."""


class InvalidStateError(AtomwalkError, ValueError):
    """A phase-space state violates its invariants (Bloch norm off unit sphere)."""


class InvariantDriftError(AtomwalkError):
    """A conserved quantity drifted past the abort threshold; the trajectory is
    numerically untrustworthy.  Carries the partial record integrated so far."""

    def __init__(self, message, record=None):
        super().__init__(message)
        self.record = record


class StepUnderflowError(AtomwalkError):
    """The adaptive step size collapsed below the machine-feasible minimum."""

    def __init__(self, message, record=None):
        super().__init__(message)
        self.record = record


class InsufficientSamplesError(AtomwalkError, ValueError):
    """Too few finite exit times to build a meaningful histogram."""


class EmptyWindowError(AtomwalkError, ValueError):
    """A fit window contains too few nonempty bins."""


class SparseTailError(AtomwalkError, ValueError):
    """The requested tail window has bins below the minimum count per bin."""


class InsufficientStatisticsError(AtomwalkError):
    """Too few uncertain points at the largest perturbation size to estimate
    an uncertainty exponent."""


class ResolvedAtZoomLevelError(AtomwalkError):
    """A zoom level no longer contains unresolved structure (expected only in
    regular windows).  Carries the partial ladder and the level index."""

    def __init__(self, level, ladder):
        super().__init__(f"scan structure resolved at zoom level {level}")
        self.level = level
        self.ladder = ladder


class ConfigError(AtomwalkError, ValueError):
    """A run configuration failed to parse or validate."""
