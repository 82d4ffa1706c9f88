import math

import numpy as np
import pytest

from atomwalk import (
    AtomState,
    ControlParams,
    EventKind,
    IntegratorSettings,
    InvalidParamsError,
    InvariantDriftError,
    StepUnderflowError,
    TangentVector,
    energy,
    integrate,
    integrate_with_tangent,
)
from atomwalk.integrator import _raw_integrate


def exit_record(params, p0=10.0, t_max=5000.0, **kw):
    s0 = AtomState.ground(x=0.0, p=p0)
    cfg = IntegratorSettings(t_max=t_max, sample_interval=t_max, **kw)
    return integrate(s0, params, cfg, stop_on_exit=True)


class TestResonanceOracle:
    """delta = 0 with a ground-state start has the closed form
    x(tau) = omega_r (p0 tau - kappa tau^2 / 2), so the exit happens at
    tau = 2 p0 / kappa with reversed momentum."""

    def test_exit_time_and_momentum(self, resonant_params):
        rec = exit_record(resonant_params)
        assert rec.termination is EventKind.EXIT_CROSSING
        T = rec.taus[-1]
        assert abs(T - 2000.0) / 2000.0 < 1e-6
        assert abs(rec.final_state.p + 10.0) < 1e-6

    def test_tolerance_halving_stays_within_error_bound(self, resonant_params):
        t_default = exit_record(resonant_params).taus[-1]
        t_tight = exit_record(resonant_params, rel_tol=5e-13, abs_tol=5e-15).taus[-1]
        assert abs(t_tight - t_default) / 2000.0 < 1e-6


class TestEvents:
    def test_node_events_localized(self, chaotic_params, fast_settings):
        s0 = AtomState.ground(x=0.0, p=10.0)
        cfg = IntegratorSettings(
            rel_tol=fast_settings.rel_tol,
            abs_tol=fast_settings.abs_tol,
            t_max=2000.0,
            sample_interval=2000.0,
        )
        rec = integrate(s0, chaotic_params, cfg)
        nodes = [e for e in rec.events if e.kind is EventKind.NODE_CROSSING]
        assert len(nodes) >= 3
        for ev in nodes:
            assert abs(math.cos(ev.state.x)) < 1e-9

    def test_exit_event_localized_with_negative_momentum(self, chaotic_params):
        rec = exit_record(chaotic_params, t_max=2e4)
        assert rec.termination is EventKind.EXIT_CROSSING
        ev = rec.events[-1]
        assert ev.kind is EventKind.EXIT_CROSSING
        assert abs(ev.state.x) < 1e-9
        assert ev.state.p < 0.0

    def test_trivial_crossing_at_start_excluded(self, chaotic_params):
        # x0 = 0 moving forward: the tau = 0 touch of x = 0 is not an exit.
        rec = exit_record(chaotic_params, t_max=500.0)
        for ev in rec.events:
            if ev.kind is EventKind.EXIT_CROSSING:
                assert ev.tau > 0.0

    def test_event_and_sample_times_strictly_increasing(self, chaotic_params, fast_settings):
        s0 = AtomState.ground(x=0.0, p=10.0)
        cfg = IntegratorSettings(
            rel_tol=fast_settings.rel_tol,
            abs_tol=fast_settings.abs_tol,
            t_max=3000.0,
            sample_interval=7.0,
        )
        rec = integrate(s0, chaotic_params, cfg)
        assert np.all(np.diff(rec.taus) > 0)
        ev_taus = [e.tau for e in rec.events]
        assert all(b > a for a, b in zip(ev_taus, ev_taus[1:]))

    def test_horizon_termination(self, regular_params, fast_settings):
        s0 = AtomState.ground(x=0.0, p=10.0)
        cfg = IntegratorSettings(
            rel_tol=fast_settings.rel_tol,
            abs_tol=fast_settings.abs_tol,
            t_max=100.0,
            sample_interval=10.0,
        )
        rec = integrate(s0, regular_params, cfg)
        assert rec.termination is EventKind.HORIZON_REACHED
        assert rec.events[-1].kind is EventKind.HORIZON_REACHED
        assert rec.taus[-1] == 100.0


class TestRegimes:
    def test_chaotic_walking_reverses_momentum_repeatedly(self, chaotic_params, fast_settings):
        s0 = AtomState.ground(x=0.0, p=10.0)
        cfg = IntegratorSettings(
            rel_tol=fast_settings.rel_tol,
            abs_tol=fast_settings.abs_tol,
            t_max=1e4,
            sample_interval=5.0,
        )
        rec = integrate(s0, chaotic_params, cfg)
        p = rec.states[:, 1]
        sign_changes = int(np.sum(np.diff(np.sign(p[p != 0])) != 0))
        assert sign_changes >= 3

    def test_regular_regime_turns_and_stays_negative(self, regular_params, fast_settings):
        s0 = AtomState.ground(x=0.0, p=10.0)
        cfg = IntegratorSettings(
            rel_tol=fast_settings.rel_tol,
            abs_tol=fast_settings.abs_tol,
            t_max=1e4,
            sample_interval=5.0,
        )
        rec = integrate(s0, regular_params, cfg)
        p = rec.states[:, 1]
        assert p[0] > 0.0
        below = np.nonzero(p < -1.0)[0]
        assert below.size > 0
        first = below[0]
        assert np.all(p[first:] < 0.0)
        # slight modulation on top of steady acceleration, not wild reversals
        tail = p[rec.taus >= rec.taus[-1] / 2]
        assert np.max(tail) < 0.0


class TestNodeJumps:
    def test_u_jumps_concentrate_at_node_crossings(self, chaotic_params):
        # Between nodes u oscillates shallowly; crossing a node kicks it.
        # Compare the u range in equal-width windows centered on each node
        # crossing against windows centered mid-gap.
        s0 = AtomState.ground(x=0.0, p=10.0)
        cfg = IntegratorSettings(
            rel_tol=1e-10, abs_tol=1e-12, t_max=4000.0, sample_interval=0.5
        )
        rec = integrate(s0, chaotic_params, cfg)
        nodes = [e.tau for e in rec.events if e.kind is EventKind.NODE_CROSSING]
        taus, u = rec.taus, rec.states[:, 2]
        near, mid = [], []
        for a, b in zip(nodes, nodes[1:]):
            gap = b - a
            if gap <= 60.0:
                continue
            w = min(gap / 6.0, 25.0)
            m_near = (taus >= a - w) & (taus <= a + w)
            m_mid = (taus >= a + gap / 2 - w) & (taus <= a + gap / 2 + w)
            if m_near.sum() > 3 and m_mid.sum() > 3:
                near.append(np.ptp(u[m_near]))
                mid.append(np.ptp(u[m_mid]))
        near, mid = np.array(near), np.array(mid)
        assert len(near) >= 10
        assert np.median(near) > 3.0 * np.median(mid)
        assert np.mean(near > 2.0 * mid) > 0.6


class TestConservation:
    def test_invariant_drift_abort_carries_partial_record(self, chaotic_params):
        s0 = AtomState.ground(x=0.0, p=10.0)
        cfg = IntegratorSettings(
            rel_tol=1e-6,
            abs_tol=1e-8,
            invariant_abort_threshold=1e-12,
            t_max=1000.0,
            sample_interval=1000.0,
        )
        with pytest.raises(InvariantDriftError) as info:
            integrate(s0, chaotic_params, cfg)
        rec = info.value.record
        assert rec is not None
        assert rec.termination is EventKind.INVARIANT_DRIFT
        assert rec.events[-1].kind is EventKind.INVARIANT_DRIFT

    def test_step_underflow(self, chaotic_params):
        s0 = AtomState.ground(x=0.0, p=10.0)
        cfg = IntegratorSettings(
            rel_tol=1e-300,
            abs_tol=1e-300,
            t_max=10.0,
            sample_interval=10.0,
        )
        with pytest.raises(StepUnderflowError):
            integrate(s0, chaotic_params, cfg)

    def test_drift_tracked_along_run(self, chaotic_params):
        s0 = AtomState.ground(x=0.0, p=10.0)
        cfg = IntegratorSettings(t_max=1000.0, sample_interval=1000.0)
        rec = integrate(s0, chaotic_params, cfg)
        assert 0.0 <= rec.max_bloch_drift < 1e-8
        assert 0.0 <= rec.max_energy_drift < 1e-8
        h0 = energy(s0, chaotic_params)
        h1 = energy(rec.final_state, chaotic_params)
        assert abs(h1 - h0) <= rec.max_energy_drift * max(abs(h0), 1.0) + 1e-15


class TestReversibility:
    """Forward then time-reversed integration must return to the start.

    In the chaotic regime errors grow like exp(2 lambda tau); with
    lambda ~ 0.025 a tau = 1e3 round trip amplifies machine noise beyond any
    useful bound, so the chaotic check runs over tau = 1e2 (amplification
    ~ e^5) and the tau = 1e3 round trip is checked in the regular regime."""

    @pytest.mark.parametrize("delta,horizon", [(0.15, 100.0), (1.0, 1000.0)])
    def test_round_trip(self, delta, horizon):
        c = ControlParams(omega_r=1e-3, delta=delta, kappa=0.01)
        s0 = AtomState.ground(x=0.0, p=10.0)
        cfg = IntegratorSettings(t_max=horizon, sample_interval=horizon)
        fwd = integrate(s0, c, cfg)
        back = integrate(fwd.final_state, c, cfg, time_direction=-1)
        assert back.final_state.as_array() == pytest.approx(
            s0.as_array(), abs=1e-6
        )


class TestTangent:
    def test_requires_nonzero_tangent(self, chaotic_params):
        s0 = AtomState.ground(x=0.0, p=10.0)
        with pytest.raises(InvalidParamsError):
            integrate_with_tangent(
                s0, TangentVector(0, 0, 0, 0, 0), chaotic_params
            )

    def test_renormalization_count(self, chaotic_params):
        s0 = AtomState.ground(x=0.0, p=10.0)
        cfg = IntegratorSettings(t_max=100.0, sample_interval=100.0)
        _, _, renorms = integrate_with_tangent(
            s0, TangentVector(1, 0, 0, 0, 0), chaotic_params, cfg, renorm_interval=1.0
        )
        assert renorms == 100

    def test_norm_preserving_subsystem_has_zero_growth(self, resonant_params):
        # delta = 0, u0 = 0, tangent confined to the (v, z) plane: the
        # tangent flow is a pure rotation.
        s0 = AtomState.ground(x=0.0, p=10.0)
        cfg = IntegratorSettings(t_max=1000.0, sample_interval=1000.0)
        _, log_growth, _ = integrate_with_tangent(
            s0, TangentVector(0.0, 0.0, 0.0, 0.8, 0.6), resonant_params, cfg
        )
        assert abs(log_growth) < 1e-5

    def test_matches_two_trajectory_separation_estimate(self, chaotic_params):
        # Independent oracle: two nearby trajectories, renormalizing the
        # separation back to d0 every unit of tau.
        s0 = AtomState.ground(x=0.0, p=10.0)
        horizon = 8000.0
        cfg = IntegratorSettings(
            rel_tol=1e-10, abs_tol=1e-12, t_max=horizon, sample_interval=horizon
        )
        _, log_growth, _ = integrate_with_tangent(
            s0, TangentVector(*(1 / math.sqrt(5),) * 5), chaotic_params, cfg
        )
        lam_tangent = log_growth / horizon

        d0 = 1e-8
        step_cfg = IntegratorSettings(
            rel_tol=1e-10, abs_tol=1e-12, t_max=1.0, sample_interval=1.0
        )
        offset = np.full(5, 1.0 / math.sqrt(5.0))
        ya = s0.as_array()
        yb = ya + d0 * offset
        logsum = 0.0
        for _ in range(int(horizon)):
            ya = np.asarray(
                _raw_integrate(ya, chaotic_params, step_cfg, False, False, 2.0, 1)[2]
            )
            yb = np.asarray(
                _raw_integrate(yb, chaotic_params, step_cfg, False, False, 2.0, 1)[2]
            )
            d = float(np.sqrt(((ya - yb) ** 2).sum()))
            logsum += math.log(d / d0)
            yb = ya + (yb - ya) * (d0 / d)
        lam_sep = logsum / horizon
        assert abs(lam_sep - lam_tangent) <= 0.2 * abs(lam_tangent)


class TestSerialization:
    def test_trajectory_csv_schema_and_roundtrip(self, chaotic_params, fast_settings, tmp_path):
        s0 = AtomState.ground(x=0.0, p=10.0)
        cfg = IntegratorSettings(
            rel_tol=fast_settings.rel_tol,
            abs_tol=fast_settings.abs_tol,
            t_max=50.0,
            sample_interval=5.0,
        )
        rec = integrate(s0, chaotic_params, cfg)
        path = tmp_path / "trajectory.csv"
        rec.to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "tau,x,p,u,v,z"
        assert len(lines) == len(rec.taus) + 1
        # shortest-repr floats round-trip exactly
        row = lines[3].split(",")
        assert float(row[0]) == rec.taus[2]
        assert [float(c) for c in row[1:]] == list(rec.states[2])

    def test_events_csv_schema(self, chaotic_params, fast_settings, tmp_path):
        s0 = AtomState.ground(x=0.0, p=10.0)
        cfg = IntegratorSettings(
            rel_tol=fast_settings.rel_tol,
            abs_tol=fast_settings.abs_tol,
            t_max=800.0,
            sample_interval=800.0,
        )
        rec = integrate(s0, chaotic_params, cfg)
        path = tmp_path / "events.csv"
        rec.events_to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "tau,kind,x,p,u,v,z"
        kinds = {line.split(",")[1] for line in lines[1:]}
        assert kinds <= {
            "node_crossing",
            "exit_crossing",
            "invariant_drift",
            "horizon_reached",
        }
        assert len(lines) == len(rec.events) + 1

    def test_rerun_reproduces_bitwise(self, chaotic_params):
        s0 = AtomState.ground(x=0.0, p=10.0)
        cfg = IntegratorSettings(t_max=300.0, sample_interval=10.0)
        a = integrate(s0, chaotic_params, cfg)
        b = integrate(s0, chaotic_params, cfg)
        assert np.array_equal(a.taus, b.taus)
        assert np.array_equal(a.states, b.states)
        assert a.final_state == b.final_state
