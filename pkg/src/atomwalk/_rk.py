"""Adaptive Dormand-Prince 5(4) core with dense output and event localization.

Compiled with numba (nogil) so trajectory ensembles stay cheap on a thread
pool.  The state vector is (x, p, u, v, z), optionally extended by a tangent
vector (tx, tp, tu, tv, tz) co-integrated with the analytic Jacobian.

Events are located on the quartic dense-output interpolant by bisection:
  * node crossing:  cos(x) changes sign
  * exit crossing:  x crosses 0 downward (p < 0 at the crossing)
Conserved quantities (energy, Bloch norm) are monitored at every accepted
step; exceeding the abort threshold ends the integration.
"""
import math

import numpy as np
from numba import njit

# --- Dormand-Prince 5(4) tableau -------------------------------------------
A21 = 1.0 / 5.0
A31, A32 = 3.0 / 40.0, 9.0 / 40.0
A41, A42, A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
A51, A52, A53, A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
A61, A62, A63, A64, A65 = (
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
)
B0, B2, B3, B4, B5 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
E0, E2, E3, E4, E5, E6 = (
    -71.0 / 57600.0,
    71.0 / 16695.0,
    -71.0 / 1920.0,
    17253.0 / 339200.0,
    -22.0 / 525.0,
    1.0 / 40.0,
)
# Shampine dense-output coefficients (quartic interpolant), row per stage.
P_DENSE = np.array(
    [
        [1.0, -8048581381.0 / 2820520608.0, 8663915743.0 / 2820520608.0, -12715105075.0 / 11282082432.0],
        [0.0, 0.0, 0.0, 0.0],
        [0.0, 131558114200.0 / 32700410799.0, -68118460800.0 / 10900136933.0, 87487479700.0 / 32700410799.0],
        [0.0, -1754552775.0 / 470086768.0, 14199869525.0 / 1410260304.0, -10690763975.0 / 1880347072.0],
        [0.0, 127303824393.0 / 49829197408.0, -318862633887.0 / 49829197408.0, 701980252875.0 / 199316789632.0],
        [0.0, -282668133.0 / 205662961.0, 2019193451.0 / 616988883.0, -1453857185.0 / 822651844.0],
        [0.0, 40617522.0 / 29380423.0, -110615467.0 / 29380423.0, 69997945.0 / 29380423.0],
    ]
)

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0

# Absolute bisection tolerance for event times (in tau).
TAU_LOC_TOL = 1e-12

# Status / termination codes shared with the wrapper layer.
STATUS_HORIZON = 0
STATUS_EXIT = 1
STATUS_INVARIANT = 2
STATUS_UNDERFLOW = 3

EV_NODE = 0
EV_EXIT = 1
EV_INVARIANT = 2
EV_HORIZON = 3

# Subdivision count for steps that sweep a wide range of x.
N_SUB = 16


@njit(cache=True, nogil=True)
def _rhs(y, out, d, omega_r, delta, kappa, sign):
    sinx = math.sin(y[0])
    cosx = math.cos(y[0])
    out[0] = sign * (omega_r * y[1])
    out[1] = sign * (-y[2] * sinx - kappa)
    out[2] = sign * (delta * y[3])
    out[3] = sign * (-delta * y[2] + 2.0 * y[4] * cosx)
    out[4] = sign * (-2.0 * y[3] * cosx)
    if d == 10:
        out[5] = sign * (omega_r * y[6])
        out[6] = sign * (-y[2] * cosx * y[5] - sinx * y[7])
        out[7] = sign * (delta * y[8])
        out[8] = sign * (-2.0 * y[4] * sinx * y[5] - delta * y[7] + 2.0 * cosx * y[9])
        out[9] = sign * (2.0 * y[3] * sinx * y[5] - 2.0 * cosx * y[8])


@njit(cache=True, nogil=True)
def _energy(y, omega_r, delta, kappa):
    return 0.5 * omega_r * y[1] * y[1] + kappa * y[0] - y[2] * math.cos(y[0]) - 0.5 * delta * y[4]


@njit(cache=True, nogil=True)
def _bloch_sq(y):
    return y[2] * y[2] + y[3] * y[3] + y[4] * y[4]


@njit(cache=True, nogil=True)
def _dense_x(y0x, h, Q, th):
    return y0x + h * th * (Q[0, 0] + th * (Q[0, 1] + th * (Q[0, 2] + th * Q[0, 3])))


@njit(cache=True, nogil=True)
def _dense_full(y_old, h, Q, th, out, d):
    for i in range(d):
        out[i] = y_old[i] + h * th * (Q[i, 0] + th * (Q[i, 1] + th * (Q[i, 2] + th * Q[i, 3])))


@njit(cache=True, nogil=True)
def _fill_dense_coeffs(K, Q, d):
    # Q = K.T @ P_DENSE; P column 0 is e_1, so Q[:, 0] = K[0].
    for i in range(d):
        q1 = 0.0
        q2 = 0.0
        q3 = 0.0
        for s in range(7):
            k = K[s, i]
            q1 += k * P_DENSE[s, 1]
            q2 += k * P_DENSE[s, 2]
            q3 += k * P_DENSE[s, 3]
        Q[i, 0] = K[0, i]
        Q[i, 1] = q1
        Q[i, 2] = q2
        Q[i, 3] = q3


@njit(cache=True, nogil=True)
def _bisect_event(y0x, h, Q, ta, tb, ga, mode):
    """Bisect theta in [ta, tb] for a sign change of the event function.

    mode 0: g = cos(x(theta)); mode 1: g = x(theta).
    The returned theta resolves the event time to TAU_LOC_TOL in tau."""
    a = ta
    b = tb
    fa = ga
    tol_theta = TAU_LOC_TOL / h if h > TAU_LOC_TOL else 1e-3
    while (b - a) > tol_theta:
        m = 0.5 * (a + b)
        xm = _dense_x(y0x, h, Q, m)
        gm = math.cos(xm) if mode == 0 else xm
        if gm == 0.0:
            return m
        if (fa > 0.0) == (gm > 0.0):
            a = m
            fa = gm
        else:
            b = m
    return 0.5 * (a + b)


@njit(cache=True, nogil=True)
def integrate_dp5(
    y0,
    omega_r,
    delta,
    kappa,
    rel_tol,
    abs_tol,
    max_step,
    inv_thr,
    t_max,
    sample_dt,
    renorm_dt,
    stop_on_exit,
    record_nodes,
    sign,
):
    """Integrate from tau = 0 to t_max (or an earlier terminal event).

    y0 has 5 entries (state) or 10 (state + tangent, renormalized every
    renorm_dt).  Returns
      (status, t_end, y_end,
       taus[:ns], states[:ns, :5],
       ev_tau[:ne], ev_kind[:ne], ev_state[:ne, :5],
       logsum, renorms, max_e_drift, max_b_drift)
    """
    d = y0.shape[0]
    with_tangent = d == 10

    y = y0.copy()
    t = 0.0
    K = np.zeros((7, d))
    yt = np.empty(d)
    ynew = np.empty(d)
    Q = np.empty((d, 4))
    ydense = np.empty(d)
    yexit = np.empty(d)
    loc_theta = np.empty(N_SUB + 4)
    loc_kind = np.empty(N_SUB + 4, dtype=np.int64)

    _rhs(y, K[0], d, omega_r, delta, kappa, sign)

    # Hairer-style initial step guess.
    d0 = 0.0
    d1 = 0.0
    for i in range(d):
        sc = abs_tol + rel_tol * abs(y[i])
        d0 += (y[i] / sc) ** 2
        d1 += (K[0, i] / sc) ** 2
    d0 = math.sqrt(d0 / d)
    d1 = math.sqrt(d1 / d)
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    for i in range(d):
        yt[i] = y[i] + h0 * K[0, i]
    _rhs(yt, ynew, d, omega_r, delta, kappa, sign)
    d2 = 0.0
    for i in range(d):
        sc = abs_tol + rel_tol * abs(y[i])
        d2 += ((ynew[i] - K[0, i]) / sc) ** 2
    d2 = math.sqrt(d2 / d) / h0
    dm = max(d1, d2)
    h1 = (0.01 / dm) ** 0.2 if dm > 1e-15 else max(1e-6, h0 * 1e-3)
    h = min(100.0 * h0, h1, max_step, t_max)
    if not (h > 0.0 and math.isfinite(h)):  # degenerate scales (e.g. tiny tolerances)
        h = min(1e-6, max_step, t_max)

    # Conserved-quantity references.
    e0 = _energy(y, omega_r, delta, kappa)
    e_scale = max(abs(e0), 1.0)
    b0 = _bloch_sq(y)
    max_e_drift = 0.0
    max_b_drift = 0.0

    # Output buffers.
    n_sample_cap = int(t_max / sample_dt) + 3
    taus = np.empty(n_sample_cap)
    states = np.empty((n_sample_cap, 5))
    taus[0] = 0.0
    for i in range(5):
        states[0, i] = y[i]
    ns = 1
    sample_k = 1

    ev_cap = 256
    ev_tau = np.empty(ev_cap)
    ev_kind = np.empty(ev_cap, dtype=np.int64)
    ev_state = np.empty((ev_cap, 5))
    ne = 0

    logsum = 0.0
    renorms = 0
    renorm_k = 1

    status = STATUS_HORIZON

    while t < t_max:
        # --- one accepted step ---------------------------------------------
        accepted = False
        t_new = t
        h_eff = h
        while not accepted:
            t_target = t + h
            if t_target >= t_max:
                t_target = t_max
            if with_tangent:
                next_renorm = renorm_k * renorm_dt
                if t_target >= next_renorm:
                    t_target = next_renorm
            h_eff = t_target - t

            for i in range(d):
                yt[i] = y[i] + h_eff * (A21 * K[0, i])
            _rhs(yt, K[1], d, omega_r, delta, kappa, sign)
            for i in range(d):
                yt[i] = y[i] + h_eff * (A31 * K[0, i] + A32 * K[1, i])
            _rhs(yt, K[2], d, omega_r, delta, kappa, sign)
            for i in range(d):
                yt[i] = y[i] + h_eff * (A41 * K[0, i] + A42 * K[1, i] + A43 * K[2, i])
            _rhs(yt, K[3], d, omega_r, delta, kappa, sign)
            for i in range(d):
                yt[i] = y[i] + h_eff * (
                    A51 * K[0, i] + A52 * K[1, i] + A53 * K[2, i] + A54 * K[3, i]
                )
            _rhs(yt, K[4], d, omega_r, delta, kappa, sign)
            for i in range(d):
                yt[i] = y[i] + h_eff * (
                    A61 * K[0, i] + A62 * K[1, i] + A63 * K[2, i] + A64 * K[3, i] + A65 * K[4, i]
                )
            _rhs(yt, K[5], d, omega_r, delta, kappa, sign)
            for i in range(d):
                ynew[i] = y[i] + h_eff * (
                    B0 * K[0, i] + B2 * K[2, i] + B3 * K[3, i] + B4 * K[4, i] + B5 * K[5, i]
                )
            _rhs(ynew, K[6], d, omega_r, delta, kappa, sign)

            err = 0.0
            for i in range(d):
                e_i = h_eff * (
                    E0 * K[0, i]
                    + E2 * K[2, i]
                    + E3 * K[3, i]
                    + E4 * K[4, i]
                    + E5 * K[5, i]
                    + E6 * K[6, i]
                )
                sc = abs_tol + rel_tol * max(abs(y[i]), abs(ynew[i]))
                err += (e_i / sc) ** 2
            err = math.sqrt(err / d)

            if err <= 1.0:
                accepted = True
                t_new = t_target
                factor = MAX_FACTOR if err == 0.0 else min(MAX_FACTOR, SAFETY * err**-0.2)
                h = min(max_step, h_eff * factor)
            else:
                # err may be inf/nan when tolerances underflow the data scale;
                # any non-finite controller state collapses the step.
                factor = SAFETY * err**-0.2
                if not (factor > MIN_FACTOR):
                    factor = MIN_FACTOR
                h = h_eff * factor
                if not (h >= 2.3e-12 * max(1.0, abs(t))) or not math.isfinite(h):
                    status = STATUS_UNDERFLOW
                    break
        if status == STATUS_UNDERFLOW:
            break

        h_eff = t_new - t

        # --- event detection on [t, t_new] ----------------------------------
        x_old = y[0]
        x_new = ynew[0]
        cos_old = math.cos(x_old)
        cos_new = math.cos(x_new)

        wide_step = abs(x_new - x_old) > 2.0
        node_hit = record_nodes and (
            cos_old * cos_new < 0.0 or (cos_new == 0.0 and cos_old != 0.0) or wide_step
        )
        exit_hit = (x_old > 0.0 and x_new <= 0.0) or (wide_step and x_old > 0.0)
        sample_due = sample_k * sample_dt <= t_new
        if node_hit or exit_hit or sample_due:
            _fill_dense_coeffs(K, Q, d)

        # First downward zero crossing of x within the step, if any.
        exit_theta = -1.0
        if exit_hit:
            if not wide_step:
                exit_theta = _bisect_event(y[0], h_eff, Q, 0.0, 1.0, x_old, 1)
            else:
                ga = x_old
                for j in range(N_SUB):
                    tb = (j + 1) / N_SUB
                    gb = _dense_x(y[0], h_eff, Q, tb)
                    if ga > 0.0 and gb <= 0.0:
                        exit_theta = _bisect_event(y[0], h_eff, Q, j / N_SUB, tb, ga, 1)
                        break
                    ga = gb
            if exit_theta >= 0.0:
                _dense_full(y, h_eff, Q, exit_theta, yexit, d)
                if not (yexit[1] < 0.0):  # p < 0 guard at the crossing
                    exit_theta = -1.0

        stopping = stop_on_exit and exit_theta >= 0.0
        cut_theta = exit_theta if stopping else 1.0
        t_cut = t + cut_theta * h_eff

        # Samples due in (t, t_cut].
        while sample_k * sample_dt <= t_cut and ns < n_sample_cap:
            ts = sample_k * sample_dt
            _dense_full(y, h_eff, Q, (ts - t) / h_eff, ydense, d)
            taus[ns] = ts
            for i in range(5):
                states[ns, i] = ydense[i]
            ns += 1
            sample_k += 1

        # Collect step-local events in theta order.
        n_loc = 0
        if node_hit:
            n_sub = N_SUB if wide_step else 1
            ga = cos_old
            for j in range(n_sub):
                tb = (j + 1) / n_sub
                gb = cos_new if n_sub == 1 else math.cos(_dense_x(y[0], h_eff, Q, tb))
                if ga * gb < 0.0 or (gb == 0.0 and ga != 0.0):
                    th = _bisect_event(y[0], h_eff, Q, j / n_sub, tb, ga, 0)
                    if th <= cut_theta:
                        loc_theta[n_loc] = th
                        loc_kind[n_loc] = EV_NODE
                        n_loc += 1
                ga = gb
        if exit_theta >= 0.0:
            # Insert keeping ascending theta.
            pos = n_loc
            while pos > 0 and loc_theta[pos - 1] > exit_theta:
                loc_theta[pos] = loc_theta[pos - 1]
                loc_kind[pos] = loc_kind[pos - 1]
                pos -= 1
            loc_theta[pos] = exit_theta
            loc_kind[pos] = EV_EXIT
            n_loc += 1

        for j in range(n_loc):
            if ne >= ev_cap:
                ev_cap *= 2
                ev_tau2 = np.empty(ev_cap)
                ev_kind2 = np.empty(ev_cap, dtype=np.int64)
                ev_state2 = np.empty((ev_cap, 5))
                ev_tau2[:ne] = ev_tau[:ne]
                ev_kind2[:ne] = ev_kind[:ne]
                ev_state2[:ne] = ev_state[:ne]
                ev_tau = ev_tau2
                ev_kind = ev_kind2
                ev_state = ev_state2
            _dense_full(y, h_eff, Q, loc_theta[j], ydense, d)
            ev_tau[ne] = t + loc_theta[j] * h_eff
            ev_kind[ne] = loc_kind[j]
            for i in range(5):
                ev_state[ne, i] = ydense[i]
            ne += 1

        if stopping:
            t = t + exit_theta * h_eff
            for i in range(d):
                y[i] = yexit[i]
            status = STATUS_EXIT
            break

        # --- invariant monitoring -------------------------------------------
        e_drift = abs(_energy(ynew, omega_r, delta, kappa) - e0) / e_scale
        b_drift = abs(_bloch_sq(ynew) - b0)
        if e_drift > max_e_drift:
            max_e_drift = e_drift
        if b_drift > max_b_drift:
            max_b_drift = b_drift
        if e_drift > inv_thr or b_drift > inv_thr:
            if ne >= ev_cap:
                ev_cap += 1
                ev_tau2 = np.empty(ev_cap)
                ev_kind2 = np.empty(ev_cap, dtype=np.int64)
                ev_state2 = np.empty((ev_cap, 5))
                ev_tau2[:ne] = ev_tau[:ne]
                ev_kind2[:ne] = ev_kind[:ne]
                ev_state2[:ne] = ev_state[:ne]
                ev_tau = ev_tau2
                ev_kind = ev_kind2
                ev_state = ev_state2
            ev_tau[ne] = t_new
            ev_kind[ne] = EV_INVARIANT
            for i in range(5):
                ev_state[ne, i] = ynew[i]
            ne += 1
            t = t_new
            for i in range(d):
                y[i] = ynew[i]
            status = STATUS_INVARIANT
            break

        # Advance (FSAL).
        t = t_new
        for i in range(d):
            y[i] = ynew[i]
            K[0, i] = K[6, i]

        # Tangent renormalization exactly at k * renorm_dt.
        if with_tangent and t == renorm_k * renorm_dt:
            nrm = 0.0
            for i in range(5, 10):
                nrm += y[i] * y[i]
            nrm = math.sqrt(nrm)
            if nrm > 0.0:
                logsum += math.log(nrm)
                inv = 1.0 / nrm
                for i in range(5, 10):
                    y[i] *= inv
                    K[0, i] *= inv  # tangent RHS is linear in the tangent
                renorms += 1
            renorm_k += 1

    if status == STATUS_HORIZON:
        if ne >= ev_cap:
            ev_cap += 1
            ev_tau2 = np.empty(ev_cap)
            ev_kind2 = np.empty(ev_cap, dtype=np.int64)
            ev_state2 = np.empty((ev_cap, 5))
            ev_tau2[:ne] = ev_tau[:ne]
            ev_kind2[:ne] = ev_kind[:ne]
            ev_state2[:ne] = ev_state[:ne]
            ev_tau = ev_tau2
            ev_kind = ev_kind2
            ev_state = ev_state2
        ev_tau[ne] = t
        ev_kind[ne] = EV_HORIZON
        for i in range(5):
            ev_state[ne, i] = y[i]
        ne += 1

    # Final sample at the terminal time.
    if ns < n_sample_cap and taus[ns - 1] < t:
        taus[ns] = t
        for i in range(5):
            states[ns, i] = y[i]
        ns += 1

    return (
        status,
        t,
        y,
        taus[:ns].copy(),
        states[:ns].copy(),
        ev_tau[:ne].copy(),
        ev_kind[:ne].copy(),
        ev_state[:ne].copy(),
        logsum,
        renorms,
        max_e_drift,
        max_b_drift,
    )
