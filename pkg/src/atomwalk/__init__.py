"""atomwalk: chaotic walking and fractal exit-time scattering of two-level
atoms in a tilted optical lattice."""

__version__ = "0.1.0"

from .dynamics import (
    AtomState,
    ControlParams,
    PhysicalParams,
    StateDerivative,
    TangentVector,
    bloch_norm_sq,
    energy,
    jacobian_apply,
    normalize,
    rhs,
)
from .errors import (
    AtomwalkError,
    ConfigError,
    EmptyWindowError,
    InsufficientSamplesError,
    InsufficientStatisticsError,
    InvalidParamsError,
    InvalidStateError,
    InvariantDriftError,
    ResolvedAtZoomLevelError,
    SparseTailError,
    StepUnderflowError,
)
from .integrator import (
    Event,
    EventKind,
    IntegratorSettings,
    TrajectoryRecord,
    integrate,
    integrate_with_tangent,
)

__all__ = [
    "__version__",
    "AtomState",
    "ControlParams",
    "PhysicalParams",
    "StateDerivative",
    "TangentVector",
    "bloch_norm_sq",
    "energy",
    "jacobian_apply",
    "normalize",
    "rhs",
    "AtomwalkError",
    "ConfigError",
    "EmptyWindowError",
    "InsufficientSamplesError",
    "InsufficientStatisticsError",
    "InvalidParamsError",
    "InvalidStateError",
    "InvariantDriftError",
    "ResolvedAtZoomLevelError",
    "SparseTailError",
    "StepUnderflowError",
    "Event",
    "EventKind",
    "IntegratorSettings",
    "TrajectoryRecord",
    "integrate",
    "integrate_with_tangent",
]
