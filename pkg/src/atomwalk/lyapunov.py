"""Maximal finite-time Lyapunov exponents over the control plane.

The exponent is computed by the tangent-linear (variational) single-vector
method: one tangent vector is co-integrated with the trajectory and
renormalized periodically; the exponent is the accumulated log-growth per
unit time.  Over long horizons the vector aligns with the dominant direction,
so the estimate converges to the maximal exponent.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .dynamics import AtomState, ControlParams, TangentVector
from .errors import AtomwalkError, InvalidParamsError
from .integrator import IntegratorSettings, integrate_with_tangent
from .workers import resolve_workers

FTLE_CSV_HEADER = "delta,kappa,lambda"

DEFAULT_HORIZON = 1e4
DEFAULT_RENORM_INTERVAL = 1.0

# Reference (regular) detuning and seed for the self-calibrated threshold.
REFERENCE_DELTA = 1.0
THRESHOLD_RUNS = 10
THRESHOLD_SEED = 20250809

_EQUAL_TANGENT = TangentVector(*(1.0 / math.sqrt(5.0),) * 5)


def _ftle_settings(settings: IntegratorSettings | None, horizon: float) -> IntegratorSettings:
    base = settings or IntegratorSettings()
    return replace(base, t_max=horizon, sample_interval=horizon)


@dataclass(frozen=True)
class FtleResult:
    """Maximal finite-time Lyapunov exponent per unit tau."""

    lam: float
    horizon: float
    params: ControlParams
    initial_state: AtomState


@dataclass
class FtleMap:
    """Exponent sampled over a (delta, kappa) grid; values[i, j] pairs
    delta_axis[i] with kappa_axis[j].  Failed cells hold NaN."""

    delta_axis: np.ndarray
    kappa_axis: np.ndarray
    values: np.ndarray
    horizon: float
    threshold: float | None = None
    failures: list = None

    def __post_init__(self):
        if self.values.shape != (len(self.delta_axis), len(self.kappa_axis)):
            raise InvalidParamsError(
                f"values shape {self.values.shape} does not match axes "
                f"({len(self.delta_axis)}, {len(self.kappa_axis)})"
            )
        if self.failures is None:
            self.failures = []

    def positive_cells(self) -> np.ndarray:
        if self.threshold is None:
            raise InvalidParamsError("no positive threshold set on this map")
        with np.errstate(invalid="ignore"):
            return self.values > self.threshold

    def positive_bounding_box(self):
        """(delta_min, delta_max, kappa_min, kappa_max) over positive cells,
        or None when no cell classifies as positive."""
        mask = self.positive_cells()
        if not mask.any():
            return None
        ii, jj = np.nonzero(mask)
        return (
            float(self.delta_axis[ii.min()]),
            float(self.delta_axis[ii.max()]),
            float(self.kappa_axis[jj.min()]),
            float(self.kappa_axis[jj.max()]),
        )

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(FTLE_CSV_HEADER + "\n")
            for i, d in enumerate(self.delta_axis):
                for j, k in enumerate(self.kappa_axis):
                    fh.write(
                        f"{float(d)!r},{float(k)!r},{float(self.values[i, j])!r}\n"
                    )

    def summary(self) -> dict:
        bbox = self.positive_bounding_box() if self.threshold is not None else None
        return {
            "grid": {
                "delta_lo": float(self.delta_axis[0]),
                "delta_hi": float(self.delta_axis[-1]),
                "n_delta": len(self.delta_axis),
                "kappa_lo": float(self.kappa_axis[0]),
                "kappa_hi": float(self.kappa_axis[-1]),
                "n_kappa": len(self.kappa_axis),
            },
            "horizon": self.horizon,
            "threshold": self.threshold,
            "positive_bounding_box": None
            if bbox is None
            else {
                "delta_min": bbox[0],
                "delta_max": bbox[1],
                "kappa_min": bbox[2],
                "kappa_max": bbox[3],
            },
            "failure_count": len(self.failures),
        }

    def to_json(self, path) -> None:
        with open(path, "w", newline="") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def ftle(
    s0: AtomState,
    c: ControlParams,
    horizon: float = DEFAULT_HORIZON,
    renorm_interval: float = DEFAULT_RENORM_INTERVAL,
    settings: IntegratorSettings | None = None,
    tangent: TangentVector | None = None,
) -> FtleResult:
    """Maximal finite-time Lyapunov exponent from one long tangent run.

    The horizon must cover at least 100 renormalization intervals so the
    running average settles.  The default initial tangent is the unit vector
    with equal components; the long-horizon estimate is insensitive to this
    choice because the tangent aligns with the dominant direction.
    """
    if not horizon >= 100.0 * renorm_interval:
        raise InvalidParamsError(
            f"horizon {horizon} must be >= 100 renormalization intervals "
            f"({100.0 * renorm_interval})"
        )
    cfg = _ftle_settings(settings, horizon)
    _, log_growth, _ = integrate_with_tangent(
        s0, tangent or _EQUAL_TANGENT, c, cfg, renorm_interval
    )
    return FtleResult(lam=log_growth / horizon, horizon=horizon, params=c, initial_state=s0)


def positive_threshold(
    s0: AtomState,
    omega_r: float,
    kappa: float,
    horizon: float = DEFAULT_HORIZON,
    renorm_interval: float = DEFAULT_RENORM_INTERVAL,
    settings: IntegratorSettings | None = None,
    reference_delta: float = REFERENCE_DELTA,
    n_runs: int = THRESHOLD_RUNS,
    seed: int = THRESHOLD_SEED,
) -> float:
    """Self-calibrated threshold for classifying an exponent as positive.

    Runs the exponent n_runs times in the regular reference regime
    (delta = reference_delta) with seeded random initial tangent directions
    and returns mean + 3 sigma of the resulting finite-time exponents.
    """
    rng = np.random.default_rng(seed)
    c = ControlParams(omega_r=omega_r, delta=reference_delta, kappa=kappa)
    lams = []
    for _ in range(n_runs):
        vec = rng.normal(size=5)
        vec /= np.sqrt((vec**2).sum())
        lams.append(
            ftle(
                s0,
                c,
                horizon=horizon,
                renorm_interval=renorm_interval,
                settings=settings,
                tangent=TangentVector.from_array(vec),
            ).lam
        )
    lams = np.asarray(lams)
    return float(lams.mean() + 3.0 * lams.std(ddof=1))


def ftle_map(
    delta_axis,
    kappa_axis,
    s0: AtomState,
    omega_r: float,
    horizon: float = DEFAULT_HORIZON,
    renorm_interval: float = DEFAULT_RENORM_INTERVAL,
    settings: IntegratorSettings | None = None,
    threshold: float | None = None,
    workers: int | None = None,
) -> FtleMap:
    """Exponent map over the control plane, cells computed independently.

    Cells are distributed over a thread pool and written back by grid index,
    so the result is identical for any worker count.  A cell whose
    integration fails is recorded as NaN plus an entry in map.failures.
    """
    delta_axis = np.asarray(delta_axis, dtype=float)
    kappa_axis = np.asarray(kappa_axis, dtype=float)
    if delta_axis.size == 0 or kappa_axis.size == 0:
        raise InvalidParamsError("ftle_map grid must be nonempty")
    values = np.full((delta_axis.size, kappa_axis.size), np.nan)
    failures = []

    def cell(idx):
        i, j = idx
        c = ControlParams(omega_r=omega_r, delta=float(delta_axis[i]), kappa=float(kappa_axis[j]))
        return ftle(
            s0, c, horizon=horizon, renorm_interval=renorm_interval, settings=settings
        ).lam

    indices = [(i, j) for i in range(delta_axis.size) for j in range(kappa_axis.size)]
    n_workers = resolve_workers(workers)
    with ThreadPoolExecutor(max_workers=n_workers) as pool:
        results = list(pool.map(_guard(cell), indices))
    for (i, j), res in zip(indices, results):
        if isinstance(res, AtomwalkError):
            failures.append((i, j, str(res)))
        else:
            values[i, j] = res

    return FtleMap(
        delta_axis=delta_axis,
        kappa_axis=kappa_axis,
        values=values,
        horizon=horizon,
        threshold=threshold,
        failures=failures,
    )


def _guard(fn):
    def wrapped(arg):
        try:
            return fn(arg)
        except AtomwalkError as exc:
            return exc

    return wrapped
