"""State space, control parameters, vector field and integrals of motion.

The model is a point-like two-level atom in a standing laser wave tilted by a
constant force.  In dimensionless variables (position x = k_f X, momentum
p = P / hbar k_f, time tau = Omega t) the equations of motion are

    dx/dtau = omega_r * p
    dp/dtau = -u sin(x) - kappa
    du/dtau = delta * v
    dv/dtau = -delta * u + 2 z cos(x)
    dz/dtau = -2 v cos(x)

where (u, v, z) is the Bloch vector of the internal state.  Without
relaxation the flow conserves the total energy

    H = (omega_r / 2) p^2 + kappa x - u cos(x) - (delta / 2) z

and the Bloch-vector length u^2 + v^2 + z^2 = 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParamsError, InvalidStateError

# Unit-norm tolerance accepted at Bloch-vector construction.  States coming
# out of the integrator may drift beyond this and are built unvalidated, so
# drift stays observable instead of being rejected or renormalized away.
BLOCH_NORM_TOL = 1e-12


@dataclass(frozen=True)
class PhysicalParams:
    """Dimensional atom/field/force parameters (any self-consistent units).

    hbar_kf  -- photon momentum scale hbar * k_f
    kf       -- laser wave number
    m_a      -- atomic mass
    Omega    -- maximal Rabi frequency (rad/s)
    omega_a  -- atomic transition frequency (rad/s)
    omega_f  -- laser frequency (rad/s)
    F        -- static force along the optical axis
    """

    hbar_kf: float
    kf: float
    m_a: float
    Omega: float
    omega_a: float
    omega_f: float
    F: float

    def __post_init__(self):
        if not (self.m_a > 0):
            raise InvalidParamsError(f"m_a must be > 0, got {self.m_a}")
        if not (self.Omega > 0):
            raise InvalidParamsError(f"Omega must be > 0, got {self.Omega}")
        if not (self.kf > 0):
            raise InvalidParamsError(f"kf must be > 0, got {self.kf}")


@dataclass(frozen=True)
class ControlParams:
    """The three dimensionless control parameters.

    omega_r -- normalized recoil frequency, hbar k_f^2 / (m_a Omega)
    delta   -- atom-field detuning, (omega_f - omega_a) / Omega
    kappa   -- applied force, F / (hbar k_f Omega); may be negative
    """

    omega_r: float
    delta: float
    kappa: float

    def __post_init__(self):
        if not (self.omega_r > 0):
            raise InvalidParamsError(f"omega_r must be > 0, got {self.omega_r}")
        for name in ("omega_r", "delta", "kappa"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidParamsError(f"{name} must be finite")


def normalize(phys: PhysicalParams) -> ControlParams:
    """Reduce dimensional parameters to the three dimensionless controls."""
    hbar = phys.hbar_kf / phys.kf
    return ControlParams(
        omega_r=hbar * phys.kf**2 / (phys.m_a * phys.Omega),
        delta=(phys.omega_f - phys.omega_a) / phys.Omega,
        kappa=phys.F / (phys.hbar_kf * phys.Omega),
    )


@dataclass(frozen=True)
class AtomState:
    """A point of the 5-dimensional phase space (x, p, u, v, z).

    Construction validates |u^2 + v^2 + z^2 - 1| <= BLOCH_NORM_TOL.  There is
    no silent renormalization: an off-sphere Bloch vector is rejected.
    """

    x: float
    p: float
    u: float
    v: float
    z: float

    def __post_init__(self):
        values = (self.x, self.p, self.u, self.v, self.z)
        if not all(math.isfinite(c) for c in values):
            raise InvalidStateError(f"state components must be finite, got {values}")
        norm_sq = self.u**2 + self.v**2 + self.z**2
        if abs(norm_sq - 1.0) > BLOCH_NORM_TOL:
            raise InvalidStateError(
                f"Bloch vector off the unit sphere: u^2+v^2+z^2 = {norm_sq!r}"
            )

    @classmethod
    def ground(cls, x: float = 0.0, p: float = 0.0) -> "AtomState":
        """Atom in the internal ground state u = v = 0, z = -1."""
        return cls(x=x, p=p, u=0.0, v=0.0, z=-1.0)

    @classmethod
    def _raw(cls, x, p, u, v, z) -> "AtomState":
        # Unvalidated constructor for integrator output, where the Bloch norm
        # may carry (observable) numerical drift beyond BLOCH_NORM_TOL.
        s = object.__new__(cls)
        object.__setattr__(s, "x", float(x))
        object.__setattr__(s, "p", float(p))
        object.__setattr__(s, "u", float(u))
        object.__setattr__(s, "v", float(v))
        object.__setattr__(s, "z", float(z))
        return s

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.p, self.u, self.v, self.z])


@dataclass(frozen=True)
class StateDerivative:
    """Time derivative of an AtomState per dimensionless time tau."""

    dx: float
    dp: float
    du: float
    dv: float
    dz: float

    def as_array(self) -> np.ndarray:
        return np.array([self.dx, self.dp, self.du, self.dv, self.dz])


@dataclass(frozen=True)
class TangentVector:
    """Element of the tangent space; components pair with AtomState fields."""

    x: float
    p: float
    u: float
    v: float
    z: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.p, self.u, self.v, self.z])

    @classmethod
    def from_array(cls, a) -> "TangentVector":
        return cls(*(float(c) for c in a))

    def norm(self) -> float:
        return math.sqrt(self.x**2 + self.p**2 + self.u**2 + self.v**2 + self.z**2)


def rhs(s: AtomState, c: ControlParams) -> StateDerivative:
    """Vector field of the tilted-lattice Bloch-Hamilton equations."""
    sinx = math.sin(s.x)
    cosx = math.cos(s.x)
    return StateDerivative(
        dx=c.omega_r * s.p,
        dp=-s.u * sinx - c.kappa,
        du=c.delta * s.v,
        dv=-c.delta * s.u + 2.0 * s.z * cosx,
        dz=-2.0 * s.v * cosx,
    )


def jacobian_apply(s: AtomState, t: TangentVector, c: ControlParams) -> TangentVector:
    """Apply the analytic Jacobian of the vector field at s to a tangent vector."""
    sinx = math.sin(s.x)
    cosx = math.cos(s.x)
    return TangentVector(
        x=c.omega_r * t.p,
        p=-s.u * cosx * t.x - sinx * t.u,
        u=c.delta * t.v,
        v=-2.0 * s.z * sinx * t.x - c.delta * t.u + 2.0 * cosx * t.z,
        z=2.0 * s.v * sinx * t.x - 2.0 * cosx * t.v,
    )


def energy(s: AtomState, c: ControlParams) -> float:
    """Total energy, the first integral of the flow."""
    return (
        0.5 * c.omega_r * s.p**2
        + c.kappa * s.x
        - s.u * math.cos(s.x)
        - 0.5 * c.delta * s.z
    )


def bloch_norm_sq(s: AtomState) -> float:
    """Squared length of the Bloch vector, the second integral of the flow."""
    return s.u**2 + s.v**2 + s.z**2
