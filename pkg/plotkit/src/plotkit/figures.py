"""Figure builders: read-only views of the simulator's data files.

No numerics happen here beyond axis transforms and anchoring annotation
lines; the numerical truth lives in the data files.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .readers import (
    SchemaError,
    read_fit_report,
    read_ftle_map,
    read_pdf,
    read_scan,
    read_trajectory,
    read_zoom_manifest,
)


class FigureKind(str, enum.Enum):
    PHASE_PLANE = "phase-plane"
    BLOCH_SERIES = "bloch-series"
    FRACTAL_PANELS = "fractal-panels"
    PDF_SEMILOG = "pdf-semilog"
    PDF_LOGLOG = "pdf-loglog"
    FTLE_HEATMAP = "ftle-heatmap"


@dataclass
class FigureSpec:
    """One figure: kind, input data files, output image path."""

    kind: FigureKind
    inputs: list
    output: str
    title: str | None = None

    def __post_init__(self):
        self.inputs = [Path(p) for p in self.inputs]
        for p in self.inputs:
            if not p.exists():
                raise SchemaError(f"input file not found: {p}")
        if not self.inputs:
            raise SchemaError("figure needs at least one input file")


def _new_axes(title):
    fig, ax = plt.subplots(figsize=(6.0, 4.5), constrained_layout=True)
    if title:
        ax.set_title(title)
    return fig, ax


def build_phase_plane(spec: FigureSpec):
    traj = read_trajectory(spec.inputs[0])
    fig, ax = _new_axes(spec.title)
    ax.plot(traj.x, traj.p, lw=0.4, color="tab:blue")
    ax.set_xlabel("x")
    ax.set_ylabel("p")
    return fig


def build_bloch_series(spec: FigureSpec):
    traj = read_trajectory(spec.inputs[0])
    fig, axes = plt.subplots(3, 1, sharex=True, figsize=(6.0, 6.5), constrained_layout=True)
    for ax, name, series in zip(axes, ("u", "v", "z"), (traj.u, traj.v, traj.z)):
        ax.plot(traj.tau, series, lw=0.4, color="tab:blue")
        ax.set_ylabel(name)
        ax.set_ylim(-1.05, 1.05)
    axes[-1].set_xlabel("tau")
    if spec.title:
        axes[0].set_title(spec.title)
    return fig


def _zoom_level_paths(spec: FigureSpec):
    if len(spec.inputs) == 1 and spec.inputs[0].suffix == ".json":
        manifest = read_zoom_manifest(spec.inputs[0])
        return [manifest.base_dir / level["csv"] for level in manifest.levels]
    return spec.inputs


def build_fractal_panels(spec: FigureSpec):
    paths = _zoom_level_paths(spec)
    fig, axes = plt.subplots(
        len(paths), 1, figsize=(6.0, 2.2 * len(paths)), constrained_layout=True, squeeze=False
    )
    for ax, path in zip(axes[:, 0], paths):
        scan = read_scan(path)
        ax.plot(scan.axis_value, scan.T, lw=0.5, color="tab:blue")
        mask = ~np.isfinite(scan.T)
        if mask.any():
            y0 = np.nanmax(scan.T) if np.isfinite(scan.T).any() else 1.0
            ax.plot(scan.axis_value[mask], np.full(mask.sum(), y0), "r|", ms=4)
        ax.set_ylabel("T")
        if scan.axis_value.size:
            lo, hi = scan.axis_value[0], scan.axis_value[-1]
            if hi > lo:
                ax.set_xlim(lo, hi)
            ax.set_title(f"[{lo:.10g}, {hi:.10g}]", fontsize=8)
    axes[-1, 0].set_xlabel("swept value")
    if spec.title:
        fig.suptitle(spec.title)
    return fig


def _pdf_points(hist):
    lo = hist.bin_lo
    hi = hist.bin_hi
    keep = hist.density > 0
    centers = 0.5 * (lo + hi)
    log_kind = np.all(lo[keep] > 0)
    if log_kind and keep.any():
        centers = np.sqrt(lo * hi)
    return centers[keep], hist.density[keep]


def _anchor_line(ax, centers, density, fit, loglog):
    """Overlay a straight annotation line with the report's slope, anchored
    to the plotted points inside the fit window (least-squares intercept)."""
    lo, hi = fit.window
    sel = (centers >= lo) & (centers <= hi) & (density > 0)
    if not sel.any():
        return
    if loglog:
        xs = np.log(centers[sel])
        anchor = np.mean(np.log(density[sel]) - fit.parameter * xs)
        tt = np.geomspace(max(lo, centers[sel].min()), hi, 64)
        ax.plot(tt, np.exp(anchor) * tt**fit.parameter, "k-", lw=1.8)
        label = f"slope = {fit.parameter:.6g}"
    else:
        xs = centers[sel]
        anchor = np.mean(np.log(density[sel]) - fit.parameter * xs)
        tt = np.linspace(lo, hi, 64)
        ax.plot(tt, np.exp(anchor + fit.parameter * tt), "k-", lw=1.8)
        label = f"slope = {fit.parameter:.6g}"
    ax.annotate(
        label,
        xy=(0.97, 0.9),
        xycoords="axes fraction",
        ha="right",
        fontsize=9,
    )


def build_pdf_semilog(spec: FigureSpec):
    hist = read_pdf(spec.inputs[0])
    fig, ax = _new_axes(spec.title)
    centers, density = _pdf_points(hist)
    ax.semilogy(centers, density, ".", ms=3, color="tab:blue")
    if len(spec.inputs) > 1:
        _anchor_line(ax, centers, density, read_fit_report(spec.inputs[1]), loglog=False)
    ax.set_xlabel("T")
    ax.set_ylabel("P(T)")
    return fig


def build_pdf_loglog(spec: FigureSpec):
    hist = read_pdf(spec.inputs[0])
    fig, ax = _new_axes(spec.title)
    centers, density = _pdf_points(hist)
    ax.loglog(centers, density, ".", ms=3, color="tab:blue")
    if len(spec.inputs) > 1:
        _anchor_line(ax, centers, density, read_fit_report(spec.inputs[1]), loglog=True)
    ax.set_xlabel("T")
    ax.set_ylabel("P(T)")
    return fig


def build_ftle_heatmap(spec: FigureSpec):
    grid = read_ftle_map(spec.inputs[0])
    fig, ax = _new_axes(spec.title)
    if grid.delta.size and grid.kappa.size:
        mesh = ax.pcolormesh(grid.kappa, grid.delta, grid.lam, shading="nearest", cmap="magma")
        fig.colorbar(mesh, ax=ax, label="lambda")
    ax.set_xlabel("kappa")
    ax.set_ylabel("delta")
    return fig


_BUILDERS = {
    FigureKind.PHASE_PLANE: build_phase_plane,
    FigureKind.BLOCH_SERIES: build_bloch_series,
    FigureKind.FRACTAL_PANELS: build_fractal_panels,
    FigureKind.PDF_SEMILOG: build_pdf_semilog,
    FigureKind.PDF_LOGLOG: build_pdf_loglog,
    FigureKind.FTLE_HEATMAP: build_ftle_heatmap,
}


def build(spec: FigureSpec):
    """Build and return the matplotlib Figure (not yet saved)."""
    return _BUILDERS[spec.kind](spec)


def render(spec: FigureSpec) -> str:
    """Build the figure and write the image file; returns the output path."""
    fig = build(spec)
    try:
        fig.savefig(spec.output)
    finally:
        plt.close(fig)
    return spec.output
