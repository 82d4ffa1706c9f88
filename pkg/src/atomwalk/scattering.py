"""Exit-time scattering functions, recursive magnification, uncertainty exponent.

An atom is launched from a fixed initial condition while one quantity (the
detuning, the initial position, or the initial momentum) is swept.  The exit
time T is the first moment the trajectory crosses x = 0 moving in the
negative direction.  In chaotic windows T varies wildly on every scale; the
zoom ladder and the uncertainty exponent quantify that self-similarity.
"""
from __future__ import annotations

import enum
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import _rk
from .dynamics import AtomState, ControlParams
from .errors import (
    AtomwalkError,
    InsufficientStatisticsError,
    InvalidParamsError,
    ResolvedAtZoomLevelError,
)
from .integrator import IntegratorSettings, _raw_integrate
from .workers import resolve_workers

SCAN_CSV_HEADER = "axis_value,outcome_kind,T"

DEFAULT_SCAN_T_MAX = 2e5

# Self-calibration of the "unresolved" threshold: 10x the median adjacent
# exit-time jump of a regular-regime detuning scan at the same sample count.
UNRESOLVED_FACTOR = 10.0
REGULAR_BASELINE_WINDOW = (0.9, 1.1)

# Fractions outside of which an uncertain fraction is not in the scaling
# regime of f(eps) ~ eps^alpha (zero / saturated) and is excluded from fits.
SATURATION_CUT = 0.9

# Minimum number of uncertain points required at the largest perturbation.
MIN_UNCERTAIN_POINTS = 100


class ScanAxis(str, enum.Enum):
    DETUNING = "delta"
    INITIAL_POSITION = "x0"
    INITIAL_MOMENTUM = "p0"


class OutcomeKind(str, enum.Enum):
    EXIT = "exit"
    TIMEOUT = "timeout"
    IMMEDIATE_EXIT = "immediate_exit"
    FAILED = "failed"


@dataclass(frozen=True)
class Outcome:
    """Result of one exit-time evaluation."""

    kind: OutcomeKind
    T: float | None = None
    error: str | None = None

    @property
    def is_finite(self) -> bool:
        return self.kind in (OutcomeKind.EXIT, OutcomeKind.IMMEDIATE_EXIT)


@dataclass(frozen=True)
class ScanSpec:
    """A one-parameter sweep of the exit-time function.

    axis, lo, hi, n -- swept quantity and its uniformly sampled interval
    params, state   -- the unswept control parameters and initial condition
                       (the swept field of params/state is overridden)
    t_max           -- horizon; reaching it records a Timeout, not an error
    settings        -- optional integrator settings (t_max above wins)
    """

    axis: ScanAxis
    lo: float
    hi: float
    n: int
    params: ControlParams
    state: AtomState
    t_max: float = DEFAULT_SCAN_T_MAX
    settings: IntegratorSettings | None = None

    def __post_init__(self):
        if not self.lo < self.hi:
            raise InvalidParamsError(f"scan interval must have lo < hi, got [{self.lo}, {self.hi}]")
        if self.n < 2:
            raise InvalidParamsError(f"scan needs n >= 2 samples, got {self.n}")
        if not self.t_max > 0:
            raise InvalidParamsError(f"t_max must be > 0, got {self.t_max}")

    def axis_values(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.n)

    def effective_settings(self) -> IntegratorSettings:
        base = self.settings or IntegratorSettings()
        return replace(base, t_max=self.t_max, sample_interval=self.t_max)

    def case(self, value: float) -> tuple[ControlParams, np.ndarray]:
        """Control parameters and raw initial state with the axis applied."""
        p = self.params
        s = self.state
        y0 = np.array([s.x, s.p, s.u, s.v, s.z])
        if self.axis is ScanAxis.DETUNING:
            p = ControlParams(omega_r=p.omega_r, delta=float(value), kappa=p.kappa)
        elif self.axis is ScanAxis.INITIAL_POSITION:
            y0[0] = value
        else:
            y0[1] = value
        return p, y0


@dataclass
class ScanResult:
    """Outcomes of a scan, ordered by strictly increasing axis value."""

    spec: ScanSpec
    values: np.ndarray
    outcomes: list[Outcome]

    def __post_init__(self):
        if len(self.outcomes) != self.spec.n or len(self.values) != self.spec.n:
            raise InvalidParamsError("scan sample count does not match its spec")

    def exit_times(self) -> np.ndarray:
        """Exit times aligned with values; NaN for timeouts and failures."""
        return np.array(
            [o.T if o.is_finite else np.nan for o in self.outcomes], dtype=float
        )

    def finite_exit_times(self) -> np.ndarray:
        t = self.exit_times()
        return t[np.isfinite(t)]

    def timeout_count(self) -> int:
        return sum(1 for o in self.outcomes if o.kind is OutcomeKind.TIMEOUT)

    def median_adjacent_jump(self) -> float:
        """Median |T_{i+1} - T_i| over adjacent pairs with both T finite."""
        t = self.exit_times()
        d = np.abs(np.diff(t))
        d = d[np.isfinite(d)]
        if d.size == 0:
            raise InsufficientStatisticsError(
                "no adjacent finite exit-time pairs in this scan"
            )
        return float(np.median(d))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(SCAN_CSV_HEADER + "\n")
            for v, o in zip(self.values, self.outcomes):
                t_cell = "" if o.T is None else repr(float(o.T))
                fh.write(f"{float(v)!r},{o.kind.value},{t_cell}\n")


@dataclass
class ZoomLadder:
    """Nested scans, each interval 1/magnification the width of the previous."""

    levels: list[ScanResult]
    magnification: float
    unresolved_threshold: float
    centers: list[float]

    def __post_init__(self):
        if not self.magnification > 1:
            raise InvalidParamsError(
                f"magnification must be > 1, got {self.magnification}"
            )
        for prev, nxt in zip(self.levels, self.levels[1:]):
            if not (nxt.spec.lo >= prev.spec.lo and nxt.spec.hi <= prev.spec.hi):
                raise InvalidParamsError("zoom levels must be nested")

    def mean_exit_times(self) -> list[float]:
        return [float(lv.finite_exit_times().mean()) for lv in self.levels]

    def write(self, out_dir, basename: str = "zoom") -> list[str]:
        """One CSV per level plus a JSON manifest; returns written names."""
        import os

        names = []
        level_meta = []
        for k, lv in enumerate(self.levels):
            name = f"{basename}_level_{k}.csv"
            lv.to_csv(os.path.join(out_dir, name))
            names.append(name)
            level_meta.append(
                {
                    "lo": lv.spec.lo,
                    "hi": lv.spec.hi,
                    "n": lv.spec.n,
                    "csv": name,
                    "center": self.centers[k] if k < len(self.centers) else None,
                }
            )
        manifest_name = f"{basename}.json"
        with open(os.path.join(out_dir, manifest_name), "w", newline="") as fh:
            json.dump(
                {
                    "magnification": self.magnification,
                    "unresolved_threshold": self.unresolved_threshold,
                    "levels": level_meta,
                },
                fh,
                indent=2,
                sort_keys=True,
            )
            fh.write("\n")
        names.append(manifest_name)
        return names


def exit_time(value: float, spec: ScanSpec) -> Outcome:
    """Exit time of the single case obtained by applying `value` to the sweep axis.

    An initial condition sitting exactly at x0 = 0 with p0 < 0 is already
    leaving, so it reports an immediate exit with T = 0 (the trivial crossing
    at tau = 0 is otherwise excluded).
    """
    params, y0 = spec.case(value)
    if y0[0] == 0.0 and y0[1] < 0.0:
        return Outcome(kind=OutcomeKind.IMMEDIATE_EXIT, T=0.0)
    cfg = spec.effective_settings()
    try:
        raw = _raw_integrate(y0, params, cfg, True, False, cfg.t_max + 1.0, 1)
    except AtomwalkError as exc:  # defensive: raw path reports via status codes
        return Outcome(kind=OutcomeKind.FAILED, error=str(exc))
    status, t_end = int(raw[0]), float(raw[1])
    if status == _rk.STATUS_EXIT:
        return Outcome(kind=OutcomeKind.EXIT, T=t_end)
    if status == _rk.STATUS_HORIZON:
        return Outcome(kind=OutcomeKind.TIMEOUT)
    if status == _rk.STATUS_INVARIANT:
        return Outcome(kind=OutcomeKind.FAILED, error=f"invariant drift at tau={t_end}")
    return Outcome(kind=OutcomeKind.FAILED, error=f"step underflow at tau={t_end}")


def _evaluate_many(values, spec: ScanSpec, workers: int | None) -> list[Outcome]:
    n_workers = resolve_workers(workers)
    if n_workers == 1 or len(values) == 1:
        return [exit_time(float(v), spec) for v in values]
    with ThreadPoolExecutor(max_workers=n_workers) as pool:
        return list(pool.map(lambda v: exit_time(float(v), spec), values))


def scan(spec: ScanSpec, workers: int | None = None) -> ScanResult:
    """Evaluate the exit time at n uniformly spaced axis values.

    Samples are independent; per-sample failures are recorded in place and do
    not abort the sweep.  Output is a pure function of the spec."""
    values = spec.axis_values()
    outcomes = _evaluate_many(values, spec, workers)
    return ScanResult(spec=spec, values=values, outcomes=outcomes)


_BASELINE_CACHE: dict = {}


def regular_baseline_threshold(
    spec: ScanSpec, workers: int | None = None
) -> float:
    """Unresolved threshold calibrated on a smooth reference scan.

    Runs (and caches) a detuning scan over the regular window at the same
    sample count, horizon and tolerances as `spec`, with the same unswept
    quantities, and returns UNRESOLVED_FACTOR times its median adjacent jump.
    """
    lo, hi = REGULAR_BASELINE_WINDOW
    base_settings = spec.settings or IntegratorSettings()
    key = (
        spec.n,
        spec.t_max,
        spec.params.omega_r,
        spec.params.kappa,
        spec.state,
        base_settings,
    )
    if key not in _BASELINE_CACHE:
        ref = ScanSpec(
            axis=ScanAxis.DETUNING,
            lo=lo,
            hi=hi,
            n=spec.n,
            params=spec.params,
            state=spec.state,
            t_max=spec.t_max,
            settings=spec.settings,
        )
        _BASELINE_CACHE[key] = UNRESOLVED_FACTOR * scan(ref, workers).median_adjacent_jump()
    return _BASELINE_CACHE[key]


def _unresolved_pairs(result: ScanResult, threshold: float) -> np.ndarray:
    """Boolean mask over adjacent pairs: outcome category changes or |dT|
    beyond the threshold."""
    kinds = [o.kind for o in result.outcomes]
    t = result.exit_times()
    out = np.zeros(result.spec.n - 1, dtype=bool)
    for i in range(result.spec.n - 1):
        if kinds[i] is not kinds[i + 1]:
            out[i] = True
        elif np.isfinite(t[i]) and np.isfinite(t[i + 1]):
            out[i] = abs(t[i + 1] - t[i]) > threshold
    return out


def _select_center(result: ScanResult, width: float) -> float:
    """Center of the next zoom window: the candidate subinterval of the given
    width with the largest local variation of T.

    Variation over a window is the total variation (sum of adjacent |dT|) of
    its finite samples, which singles out regions of wild high-amplitude
    oscillation rather than one isolated branch jump; every outcome-category
    boundary inside a window (finite next to timeout) adds the full timeout
    horizon, since it straddles a divergence of the exit time."""
    values = result.values
    t = result.exit_times()
    best_score = -math.inf
    best_center = float(0.5 * (values[0] + values[-1]))
    half = width / 2.0
    jumps = np.abs(np.diff(t))  # NaN across category boundaries
    pair_scores = np.where(np.isfinite(jumps), jumps, result.spec.t_max)
    pair_mid = 0.5 * (values[:-1] + values[1:])
    for i in range(len(values)):
        c = float(values[i])
        sel = (pair_mid >= c - half) & (pair_mid <= c + half)
        if not np.any(sel):
            continue
        score = float(pair_scores[sel].sum())
        if score > best_score:
            best_score = score
            best_center = c
    return best_center


def zoom(
    spec: ScanSpec,
    center: float | None = None,
    magnification: float = 50.0,
    levels: int = 3,
    workers: int | None = None,
    unresolved_threshold: float | None = None,
) -> ZoomLadder:
    """Scan, then recursively magnify the least-resolved subinterval.

    Produces the base scan (level 0) plus `levels` magnified scans, each
    covering an interval exactly 1/magnification the width of the previous
    one, centered on the adjacent-sample pair with the largest local
    variation of T (or on the supplied center for the first magnification).
    Raises ResolvedAtZoomLevelError as soon as a level contains no
    unresolved structure."""
    if not magnification > 1:
        raise InvalidParamsError(f"magnification must be > 1, got {magnification}")
    if levels < 1:
        raise InvalidParamsError(f"levels must be >= 1, got {levels}")
    if center is not None and not (spec.lo <= center <= spec.hi):
        raise InvalidParamsError(
            f"center {center} outside the scan interval [{spec.lo}, {spec.hi}]"
        )
    threshold = (
        unresolved_threshold
        if unresolved_threshold is not None
        else regular_baseline_threshold(spec, workers)
    )

    ladder_levels = [scan(spec, workers)]
    centers: list[float] = []
    current = spec
    for level in range(levels + 1):
        result = ladder_levels[-1]
        unresolved = _unresolved_pairs(result, threshold)
        if not unresolved.any():
            raise ResolvedAtZoomLevelError(
                level,
                ZoomLadder(
                    levels=ladder_levels,
                    magnification=magnification,
                    unresolved_threshold=threshold,
                    centers=centers,
                ),
            )
        if level == levels:
            break
        width = (current.hi - current.lo) / magnification
        if level == 0 and center is not None:
            c = float(center)
        else:
            c = _select_center(result, width)
        lo = c - width / 2.0
        hi = c + width / 2.0
        if lo < current.lo:
            lo, hi = current.lo, current.lo + width
        elif hi > current.hi:
            lo, hi = current.hi - width, current.hi
        centers.append(c)
        current = replace(current, lo=lo, hi=hi)
        ladder_levels.append(scan(current, workers))

    return ZoomLadder(
        levels=ladder_levels,
        magnification=magnification,
        unresolved_threshold=threshold,
        centers=centers,
    )


@dataclass
class UncertaintyFit:
    """Least-squares fit of log f(eps) against log eps.

    exponent    -- the fitted slope (the uncertainty exponent)
    correlation -- Pearson correlation of the fitted points
    eps / fractions / counts -- every probed perturbation size with its
                   uncertain fraction and count
    used        -- mask of points inside the scaling regime (0 < f <=
                   SATURATION_CUT) that entered the fit
    threshold   -- discrepancy threshold used to compare exit times
    """

    exponent: float
    correlation: float
    eps: np.ndarray
    fractions: np.ndarray
    counts: np.ndarray
    used: np.ndarray
    threshold: float

    def to_json(self, path) -> None:
        with open(path, "w", newline="") as fh:
            json.dump(
                {
                    "exponent": self.exponent,
                    "correlation": self.correlation,
                    "eps": [float(e) for e in self.eps],
                    "fractions": [float(f) for f in self.fractions],
                    "counts": [int(c) for c in self.counts],
                    "used": [bool(u) for u in self.used],
                    "threshold": self.threshold,
                },
                fh,
                indent=2,
                sort_keys=True,
            )
            fh.write("\n")


def _uncertain_triple(o_minus: Outcome, o_center: Outcome, o_plus: Outcome, threshold: float) -> bool:
    kinds = (o_minus.kind, o_center.kind, o_plus.kind)
    if not (kinds[0] is kinds[1] and kinds[1] is kinds[2]):
        return True
    if o_center.is_finite:
        ts = (o_minus.T, o_center.T, o_plus.T)
        return max(ts) - min(ts) > threshold
    return False


def uncertainty_exponent_fn(
    outcome_fn,
    values: np.ndarray,
    base_outcomes: list[Outcome],
    eps_list,
    threshold: float,
) -> UncertaintyFit:
    """Core estimator over an arbitrary outcome function (used directly by
    synthetic oracles; `uncertainty_exponent` binds it to a ScanSpec).

    A sample is eps-uncertain when the outcome category or the exit time
    (beyond the discrepancy threshold) changes under perturbation +-eps.
    The fit uses only fractions inside the scaling regime: zero and
    near-saturated fractions carry no scaling information."""
    eps_arr = np.asarray(sorted(float(e) for e in eps_list))
    if eps_arr.size < 4:
        raise InvalidParamsError("need at least 4 epsilon values")
    if eps_arr[-1] / eps_arr[0] < 100.0:
        raise InvalidParamsError("epsilon values must span at least two decades")

    n = len(values)
    fractions = np.empty(eps_arr.size)
    counts = np.empty(eps_arr.size, dtype=int)
    for k, eps in enumerate(eps_arr):
        count = 0
        minus = [outcome_fn(v - eps) for v in values]
        plus = [outcome_fn(v + eps) for v in values]
        for om, oc, op in zip(minus, base_outcomes, plus):
            if _uncertain_triple(om, oc, op, threshold):
                count += 1
        counts[k] = count
        fractions[k] = count / n

    if counts[-1] < MIN_UNCERTAIN_POINTS:
        raise InsufficientStatisticsError(
            f"only {counts[-1]} uncertain points at the largest epsilon "
            f"(need {MIN_UNCERTAIN_POINTS}); enlarge n or the epsilon range"
        )

    used = (fractions > 0.0) & (fractions <= SATURATION_CUT)
    if used.sum() < 2:
        raise InsufficientStatisticsError(
            "fewer than 2 epsilon values in the scaling regime "
            f"(0 < f <= {SATURATION_CUT}); adjust the epsilon list"
        )
    lx = np.log(eps_arr[used])
    ly = np.log(fractions[used])
    slope, _ = np.polyfit(lx, ly, 1)
    if used.sum() >= 3 and np.std(ly) > 0:
        corr = float(np.corrcoef(lx, ly)[0, 1])
    else:
        corr = 1.0
    return UncertaintyFit(
        exponent=float(slope),
        correlation=corr,
        eps=eps_arr,
        fractions=fractions,
        counts=counts,
        used=used,
        threshold=threshold,
    )


def uncertainty_exponent(
    spec: ScanSpec,
    eps_list,
    threshold: float | None = None,
    workers: int | None = None,
    base: ScanResult | None = None,
) -> UncertaintyFit:
    """Uncertainty exponent of the exit-time function over the scan interval.

    For each epsilon the scan's sample points are re-evaluated at +-epsilon;
    f(eps) is the fraction whose outcome changes (category, or exit time by
    more than the discrepancy threshold).  The default threshold is
    calibrated once against the smooth regular-regime baseline (the same
    calibration the zoom ladder uses), so it is fixed across every epsilon of
    one estimate.  Fractality shows up as f(eps) ~ eps^alpha with alpha < 1."""
    base = base or scan(spec, workers)
    thr = threshold if threshold is not None else regular_baseline_threshold(spec, workers)

    values = base.values
    n_workers = resolve_workers(workers)

    eps_arr = np.asarray(sorted(float(e) for e in eps_list))

    def outcomes_at(offset_values) -> list[Outcome]:
        if n_workers == 1:
            return [exit_time(float(v), spec) for v in offset_values]
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            return list(pool.map(lambda v: exit_time(float(v), spec), offset_values))

    # Evaluate all perturbed points through the same estimator core.
    cache: dict[float, Outcome] = {}

    def cached_outcome(v: float) -> Outcome:
        return cache[v]

    for eps in eps_arr:
        for side in (-eps, eps):
            offs = [float(v + side) for v in values]
            outs = outcomes_at(offs)
            for v, o in zip(offs, outs):
                cache[v] = o

    return uncertainty_exponent_fn(cached_outcome, values, base.outcomes, eps_arr, thr)
