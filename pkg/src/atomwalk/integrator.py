"""High-accuracy adaptive time integration with event records.

Wraps the compiled Dormand-Prince 5(4) core.  Each call owns its workspace,
so integrations are safe to run concurrently from a thread pool (the core
releases the GIL).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import _rk
from .dynamics import AtomState, ControlParams, TangentVector
from .errors import InvalidParamsError, InvariantDriftError, StepUnderflowError

TRAJECTORY_CSV_HEADER = "tau,x,p,u,v,z"
EVENTS_CSV_HEADER = "tau,kind,x,p,u,v,z"

# Hard cap on stored samples per trajectory, to catch absurd cadence choices.
MAX_SAMPLES = 50_000_000


class EventKind(str, enum.Enum):
    NODE_CROSSING = "node_crossing"
    EXIT_CROSSING = "exit_crossing"
    INVARIANT_DRIFT = "invariant_drift"
    HORIZON_REACHED = "horizon_reached"


_EVENT_KIND_FROM_CODE = {
    _rk.EV_NODE: EventKind.NODE_CROSSING,
    _rk.EV_EXIT: EventKind.EXIT_CROSSING,
    _rk.EV_INVARIANT: EventKind.INVARIANT_DRIFT,
    _rk.EV_HORIZON: EventKind.HORIZON_REACHED,
}


@dataclass(frozen=True)
class IntegratorSettings:
    """Tolerances and horizons for the adaptive integrator.

    rel_tol / abs_tol          -- per-step error control (tight by default:
                                  exit-time fractals need trajectory fidelity
                                  far beyond plotting accuracy, and the
                                  conserved quantities must hold 1e-8 drift
                                  over tau = 1e4)
    max_step                   -- upper bound on the step in tau
    invariant_abort_threshold  -- max tolerated drift of the Bloch norm and of
                                  the scaled energy before aborting
    t_max                      -- integration horizon in tau
    sample_interval            -- output cadence for stored samples
    """

    rel_tol: float = 1e-12
    abs_tol: float = 1e-14
    max_step: float = 1.0
    invariant_abort_threshold: float = 1e-6
    t_max: float = 1e4
    sample_interval: float = 1.0

    def __post_init__(self):
        for name in (
            "rel_tol",
            "abs_tol",
            "max_step",
            "invariant_abort_threshold",
            "t_max",
            "sample_interval",
        ):
            value = getattr(self, name)
            if not (value > 0) or not math.isfinite(value):
                raise InvalidParamsError(f"{name} must be positive and finite, got {value}")
        if self.t_max / self.sample_interval > MAX_SAMPLES:
            raise InvalidParamsError(
                f"sample_interval {self.sample_interval} stores more than "
                f"{MAX_SAMPLES} samples over t_max {self.t_max}"
            )


@dataclass(frozen=True)
class Event:
    """A localized event along a trajectory."""

    kind: EventKind
    tau: float
    state: AtomState


@dataclass
class TrajectoryRecord:
    """Sampled trajectory plus localized events.

    taus/states hold the raw sample arrays (states columns: x, p, u, v, z);
    the `samples` property exposes them as (tau, AtomState) pairs.
    max_energy_drift is |H - H0| / max(|H0|, 1) and max_bloch_drift is
    |n^2 - n0^2|, both maximized over every accepted step.
    """

    taus: np.ndarray
    states: np.ndarray
    events: list[Event]
    final_state: AtomState
    termination: EventKind | None
    max_energy_drift: float
    max_bloch_drift: float

    @property
    def samples(self) -> list[tuple[float, AtomState]]:
        return [
            (float(t), AtomState._raw(*row)) for t, row in zip(self.taus, self.states)
        ]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(TRAJECTORY_CSV_HEADER + "\n")
            for t, row in zip(self.taus, self.states):
                fh.write(
                    ",".join([repr(float(t))] + [repr(float(c)) for c in row]) + "\n"
                )

    def events_to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(EVENTS_CSV_HEADER + "\n")
            for ev in self.events:
                s = ev.state
                cells = [repr(float(ev.tau)), ev.kind.value] + [
                    repr(float(c)) for c in (s.x, s.p, s.u, s.v, s.z)
                ]
                fh.write(",".join(cells) + "\n")


def _raw_integrate(
    y0: np.ndarray,
    c: ControlParams,
    cfg: IntegratorSettings,
    stop_on_exit: bool,
    record_nodes: bool,
    renorm_interval: float,
    time_direction: int,
):
    """Thin typed bridge into the compiled core."""
    return _rk.integrate_dp5(
        y0,
        c.omega_r,
        c.delta,
        c.kappa,
        cfg.rel_tol,
        cfg.abs_tol,
        cfg.max_step,
        cfg.invariant_abort_threshold,
        cfg.t_max,
        cfg.sample_interval,
        renorm_interval,
        stop_on_exit,
        record_nodes,
        1.0 if time_direction >= 0 else -1.0,
    )


def _build_record(raw) -> tuple[int, TrajectoryRecord]:
    (
        status,
        t_end,
        y_end,
        taus,
        states,
        ev_tau,
        ev_kind,
        ev_state,
        _logsum,
        _renorms,
        max_e,
        max_b,
    ) = raw
    events = [
        Event(
            kind=_EVENT_KIND_FROM_CODE[int(k)],
            tau=float(tt),
            state=AtomState._raw(*row),
        )
        for tt, k, row in zip(ev_tau, ev_kind, ev_state)
    ]
    termination = {
        _rk.STATUS_HORIZON: EventKind.HORIZON_REACHED,
        _rk.STATUS_EXIT: EventKind.EXIT_CROSSING,
        _rk.STATUS_INVARIANT: EventKind.INVARIANT_DRIFT,
        _rk.STATUS_UNDERFLOW: None,
    }[int(status)]
    record = TrajectoryRecord(
        taus=taus,
        states=states,
        events=events,
        final_state=AtomState._raw(*y_end[:5]),
        termination=termination,
        max_energy_drift=float(max_e),
        max_bloch_drift=float(max_b),
    )
    return int(status), record


def integrate(
    s0: AtomState,
    c: ControlParams,
    cfg: IntegratorSettings | None = None,
    *,
    stop_on_exit: bool = False,
    record_nodes: bool = True,
    time_direction: int = 1,
) -> TrajectoryRecord:
    """Integrate the 5-dimensional flow from s0.

    Records a node-crossing event at every sign change of cos(x) and an
    exit-crossing event at every downward crossing of x = 0 with p < 0.
    With stop_on_exit the first exit crossing (tau > 0) ends the integration;
    otherwise it runs to cfg.t_max.  time_direction=-1 integrates the
    time-reversed vector field.

    Raises InvariantDriftError / StepUnderflowError with the partial record
    attached when the trajectory becomes numerically untrustworthy.
    """
    cfg = cfg or IntegratorSettings()
    raw = _raw_integrate(
        s0.as_array(), c, cfg, stop_on_exit, record_nodes, cfg.t_max + 1.0, time_direction
    )
    status, record = _build_record(raw)
    if status == _rk.STATUS_INVARIANT:
        raise InvariantDriftError(
            f"conserved-quantity drift exceeded {cfg.invariant_abort_threshold} "
            f"at tau={record.events[-1].tau}",
            record=record,
        )
    if status == _rk.STATUS_UNDERFLOW:
        raise StepUnderflowError("adaptive step size underflowed", record=record)
    return record


def integrate_with_tangent(
    s0: AtomState,
    t0: TangentVector,
    c: ControlParams,
    cfg: IntegratorSettings | None = None,
    renorm_interval: float = 1.0,
) -> tuple[TrajectoryRecord, float, int]:
    """Co-integrate the tangent-linear system dt/dtau = J(s) t.

    The tangent is rescaled to unit length every renorm_interval and the log
    norms accumulate.  Returns (record, accumulated log-growth, renorm count);
    the log-growth includes the final partial interval, so it equals
    ln(|t(t_end)| / |t(0)|) plus the sum over all renormalizations.
    """
    cfg = cfg or IntegratorSettings()
    if not (renorm_interval > 0):
        raise InvalidParamsError(f"renorm_interval must be > 0, got {renorm_interval}")
    t_arr = t0.as_array()
    t_norm = float(np.sqrt((t_arr**2).sum()))
    if t_norm == 0.0:
        raise InvalidParamsError("initial tangent vector must be nonzero")
    y0 = np.concatenate([s0.as_array(), t_arr / t_norm])
    raw = _raw_integrate(y0, c, cfg, False, False, renorm_interval, 1)
    status, record = _build_record(raw)
    logsum = float(raw[8])
    renorms = int(raw[9])
    y_end = raw[2]
    tail = float(np.sqrt((y_end[5:] ** 2).sum()))
    if tail > 0.0:
        logsum += math.log(tail)
    if status == _rk.STATUS_INVARIANT:
        raise InvariantDriftError(
            f"conserved-quantity drift exceeded {cfg.invariant_abort_threshold}",
            record=record,
        )
    if status == _rk.STATUS_UNDERFLOW:
        raise StepUnderflowError("adaptive step size underflowed", record=record)
    return record, logsum, renorms
