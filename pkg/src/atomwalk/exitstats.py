"""Exit-time ensembles: histogram construction and decay-law fits.

The distribution of exit times from a chaotic window decays exponentially in
its middle part but crosses over to a power-law tail, the signature of
trajectories sticking to stability-island borders.  Both laws are fitted as
straight lines in the appropriate transformed coordinates, matching how the
slopes are read off log plots; the reported parameter is the signed slope.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    EmptyWindowError,
    InsufficientSamplesError,
    InvalidParamsError,
    SparseTailError,
)

PDF_CSV_HEADER = "bin_lo,bin_hi,density,count"

MIN_FINITE_SAMPLES = 1000

# Default fit windows (percentiles of the finite exit times).
EXP_WINDOW_PERCENTILES = (40.0, 80.0)
TAIL_WINDOW_PERCENTILES = (90.0, 99.5)
TAIL_MIN_COUNT_PER_BIN = 10
MIN_FIT_BINS = 5


class BinKind(str, enum.Enum):
    LINEAR = "linear"
    LOG = "log"


@dataclass(frozen=True)
class BinningSpec:
    """Histogram binning: linear bins suit the exponential middle, logarithmic
    bins the power-law tail."""

    kind: BinKind = BinKind.LINEAR
    n_bins: int = 60

    def __post_init__(self):
        if self.n_bins < 2:
            raise InvalidParamsError(f"need at least 2 bins, got {self.n_bins}")


@dataclass
class ExitTimePDF:
    """Normalized exit-time histogram.

    Densities integrate to (sample_count - timeout_count) / sample_count:
    timeouts are excluded from the histogram but counted in the denominator,
    so the missing tail mass stays visible.
    """

    bin_edges: np.ndarray
    densities: np.ndarray
    counts: np.ndarray
    sample_count: int
    timeout_count: int

    def __post_init__(self):
        if np.any(self.densities < 0):
            raise InvalidParamsError("densities must be nonnegative")

    @property
    def bin_centers(self) -> np.ndarray:
        lo = self.bin_edges[:-1]
        hi = self.bin_edges[1:]
        if self._is_geometric():
            return np.sqrt(lo * hi)
        return 0.5 * (lo + hi)

    def _is_geometric(self) -> bool:
        e = self.bin_edges
        if np.any(e <= 0):
            return False
        ratios = e[1:] / e[:-1]
        return float(np.ptp(ratios)) < 1e-9 * float(ratios[0]) and float(ratios[0]) > 1.0 + 1e-12

    def quantile(self, q: float) -> float:
        """Exit time at cumulative fraction q of the binned samples."""
        if not 0.0 <= q <= 1.0:
            raise InvalidParamsError(f"quantile must be in [0, 1], got {q}")
        total = self.counts.sum()
        cum = np.concatenate([[0.0], np.cumsum(self.counts)]) / total
        return float(np.interp(q, cum, self.bin_edges))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(PDF_CSV_HEADER + "\n")
            for lo, hi, dens, cnt in zip(
                self.bin_edges[:-1], self.bin_edges[1:], self.densities, self.counts
            ):
                fh.write(f"{float(lo)!r},{float(hi)!r},{float(dens)!r},{int(cnt)}\n")


def build_pdf(
    exit_times, binning: BinningSpec | None = None, timeout_count: int = 0
) -> ExitTimePDF:
    """Histogram an ensemble of finite exit times.

    exit_times must be finite; pass the number of timed-out samples
    separately so the normalization accounts for them."""
    binning = binning or BinningSpec()
    times = np.asarray(exit_times, dtype=float)
    if times.size and not np.all(np.isfinite(times)):
        raise InvalidParamsError("exit_times must be finite; pass timeouts via timeout_count")
    if times.size < MIN_FINITE_SAMPLES:
        raise InsufficientSamplesError(
            f"need at least {MIN_FINITE_SAMPLES} finite exit times, got {times.size}"
        )
    t_lo = float(times.min())
    t_hi = float(times.max())
    if t_hi <= t_lo:
        raise InvalidParamsError("exit times are all identical; nothing to bin")
    if binning.kind is BinKind.LOG:
        if t_lo <= 0.0:
            raise InvalidParamsError("logarithmic binning needs strictly positive exit times")
        edges = np.geomspace(t_lo, t_hi, binning.n_bins + 1)
    else:
        edges = np.linspace(t_lo, t_hi, binning.n_bins + 1)
    counts, _ = np.histogram(times, bins=edges)
    sample_count = int(times.size + timeout_count)
    widths = np.diff(edges)
    densities = counts / (sample_count * widths)
    return ExitTimePDF(
        bin_edges=edges,
        densities=densities,
        counts=counts,
        sample_count=sample_count,
        timeout_count=int(timeout_count),
    )


def default_linear_bins(exit_times) -> int:
    """Linear bin count sized for the middle-range analysis.

    Heavy tails stretch the histogram range, so a fixed coarse bin count
    would leave the exponential-fit window with too few bins.  Size the bins
    to resolve the central percentile window instead."""
    times = np.asarray(exit_times, dtype=float)
    q40, q80 = np.percentile(times, [EXP_WINDOW_PERCENTILES[0], EXP_WINDOW_PERCENTILES[1]])
    if q80 <= q40:
        return 60
    width = (q80 - q40) / 12.0
    n = int(math.ceil((times.max() - times.min()) / width))
    return int(min(max(n, 60), 5000))


class FitModel(str, enum.Enum):
    EXPONENTIAL_MIDDLE = "exponential_middle"
    POWERLAW_TAIL = "powerlaw_tail"


@dataclass(frozen=True)
class FitReport:
    """Straight-line fit on transformed histogram coordinates.

    parameter is the signed slope: ln P against T for the exponential model
    (a decaying middle has parameter < 0), ln P against ln T for the
    power-law model (a decaying tail has parameter < 0)."""

    model: FitModel
    parameter: float
    fit_window: tuple[float, float]
    residual: float
    point_count: int
    stderr: float

    def __post_init__(self):
        if self.point_count < MIN_FIT_BINS:
            raise InvalidParamsError(
                f"fit used {self.point_count} bins, need >= {MIN_FIT_BINS}"
            )

    def to_json(self, path) -> None:
        with open(path, "w", newline="") as fh:
            json.dump(
                {
                    "model": self.model.value,
                    "parameter": self.parameter,
                    "window": [self.fit_window[0], self.fit_window[1]],
                    "residual": self.residual,
                    "point_count": self.point_count,
                    "stderr": self.stderr,
                },
                fh,
                indent=2,
                sort_keys=True,
            )
            fh.write("\n")


def _line_fit(x: np.ndarray, y: np.ndarray):
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    rmse = float(np.sqrt(np.mean(resid**2)))
    n = x.size
    sxx = float(np.sum((x - x.mean()) ** 2))
    stderr = math.sqrt(np.sum(resid**2) / max(n - 2, 1) / sxx) if sxx > 0 else math.inf
    return float(slope), rmse, stderr


def _window_bins(pdf: ExitTimePDF, window, min_count: int = 1):
    lo, hi = window
    centers = pdf.bin_centers
    mask = (centers >= lo) & (centers <= hi) & (pdf.counts >= min_count)
    return centers[mask], pdf.densities[mask]


def fit_exponential_middle(pdf: ExitTimePDF, window=None) -> FitReport:
    """Least-squares line on (T, ln P) over the middle of the distribution.

    The default window spans the 40th-80th percentile of the binned samples."""
    if window is None:
        window = (
            pdf.quantile(EXP_WINDOW_PERCENTILES[0] / 100.0),
            pdf.quantile(EXP_WINDOW_PERCENTILES[1] / 100.0),
        )
    centers, dens = _window_bins(pdf, window)
    if centers.size < MIN_FIT_BINS:
        raise EmptyWindowError(
            f"exponential-fit window {window} holds {centers.size} nonempty bins, "
            f"need >= {MIN_FIT_BINS}"
        )
    slope, rmse, stderr = _line_fit(centers, np.log(dens))
    return FitReport(
        model=FitModel.EXPONENTIAL_MIDDLE,
        parameter=slope,
        fit_window=(float(window[0]), float(window[1])),
        residual=rmse,
        point_count=int(centers.size),
        stderr=stderr,
    )


def fit_powerlaw_tail(
    pdf: ExitTimePDF, window=None, min_count_per_bin: int = TAIL_MIN_COUNT_PER_BIN
) -> FitReport:
    """Least-squares line on (ln T, ln P) over the tail.

    The default window spans the 90th-99.5th percentile, which excludes the
    extreme tail where single events dominate; bins thinner than
    min_count_per_bin are dropped for the same reason."""
    if window is None:
        window = (
            pdf.quantile(TAIL_WINDOW_PERCENTILES[0] / 100.0),
            pdf.quantile(TAIL_WINDOW_PERCENTILES[1] / 100.0),
        )
    centers_all, _ = _window_bins(pdf, window)
    if centers_all.size < MIN_FIT_BINS:
        raise EmptyWindowError(
            f"power-law window {window} holds {centers_all.size} nonempty bins, "
            f"need >= {MIN_FIT_BINS}"
        )
    centers, dens = _window_bins(pdf, window, min_count=min_count_per_bin)
    if centers.size < MIN_FIT_BINS:
        raise SparseTailError(
            f"power-law window {window} holds {centers.size} bins with >= "
            f"{min_count_per_bin} events, need >= {MIN_FIT_BINS}"
        )
    if np.any(centers <= 0):
        raise InvalidParamsError("power-law fit needs strictly positive exit times")
    slope, rmse, stderr = _line_fit(np.log(centers), np.log(dens))
    return FitReport(
        model=FitModel.POWERLAW_TAIL,
        parameter=slope,
        fit_window=(float(window[0]), float(window[1])),
        residual=rmse,
        point_count=int(centers.size),
        stderr=stderr,
    )
