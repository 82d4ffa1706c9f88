"""Command dispatch, output serialization, and run manifests.

Every command writes plot-ready CSV/JSON data files plus run_manifest.json
with a full config echo and a sha256 digest of each data file.  All sweeps
are index-addressed, so reruns of the same config produce byte-identical
data files for any worker count.
"""
from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig
from .errors import ConfigError
from .exitstats import (
    BinKind,
    BinningSpec,
    build_pdf,
    default_linear_bins,
    fit_exponential_middle,
    fit_powerlaw_tail,
)
from .integrator import integrate
from .lyapunov import ftle_map, positive_threshold
from .scattering import ScanSpec, scan, uncertainty_exponent, zoom

MANIFEST_NAME = "run_manifest.json"


@dataclass
class RunManifest:
    """Inventory of one command execution."""

    config: dict
    version: str
    started_utc: str
    finished_utc: str
    outputs: dict[str, str]  # file name -> sha256 hex digest

    def to_json(self, path) -> None:
        with open(path, "w", newline="") as fh:
            json.dump(
                {
                    "config": self.config,
                    "version": self.version,
                    "started_utc": self.started_utc,
                    "finished_utc": self.finished_utc,
                    "outputs": self.outputs,
                },
                fh,
                indent=2,
                sort_keys=True,
            )
            fh.write("\n")


def _digest(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _utc_stamp() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())


def _scan_spec(cfg: RunConfig) -> ScanSpec:
    return ScanSpec(
        axis=cfg.scan_axis,
        lo=cfg.scan_lo,
        hi=cfg.scan_hi,
        n=cfg.scan_n,
        params=cfg.control,
        state=cfg.initial,
        t_max=cfg.settings.t_max,
        settings=cfg.settings,
    )


def _run_trajectory(cfg: RunConfig, out: Path) -> list[str]:
    record = integrate(cfg.initial, cfg.control, cfg.settings)
    record.to_csv(out / "trajectory.csv")
    record.events_to_csv(out / "events.csv")
    return ["trajectory.csv", "events.csv"]


def _run_lyapunov_map(cfg: RunConfig, out: Path) -> list[str]:
    threshold = positive_threshold(
        cfg.initial,
        omega_r=cfg.control.omega_r,
        kappa=cfg.control.kappa,
        horizon=cfg.horizon,
        renorm_interval=cfg.renorm_interval,
    )
    grid = cfg.grid
    m = ftle_map(
        np.linspace(grid.delta_lo, grid.delta_hi, grid.n_delta),
        np.linspace(grid.kappa_lo, grid.kappa_hi, grid.n_kappa),
        cfg.initial,
        cfg.control.omega_r,
        horizon=cfg.horizon,
        renorm_interval=cfg.renorm_interval,
        threshold=threshold,
        workers=cfg.workers,
    )
    m.to_csv(out / "ftle_map.csv")
    m.to_json(out / "ftle_map.json")
    return ["ftle_map.csv", "ftle_map.json"]


def _run_scan(cfg: RunConfig, out: Path) -> list[str]:
    spec = _scan_spec(cfg)
    result = scan(spec, workers=cfg.workers)
    result.to_csv(out / "scan.csv")
    names = ["scan.csv"]
    if cfg.eps_list:
        fit = uncertainty_exponent(
            spec,
            cfg.eps_list,
            threshold=cfg.uncertainty_threshold,
            workers=cfg.workers,
            base=result,
        )
        fit.to_json(out / "uncertainty.json")
        names.append("uncertainty.json")
    return names


def _run_zoom(cfg: RunConfig, out: Path) -> list[str]:
    ladder = zoom(
        _scan_spec(cfg),
        center=cfg.center,
        magnification=cfg.mag,
        levels=cfg.levels,
        workers=cfg.workers,
    )
    return ladder.write(out, basename="zoom")


def _run_pdf(cfg: RunConfig, out: Path) -> list[str]:
    spec = _scan_spec(cfg)
    result = scan(spec, workers=cfg.workers)
    result.to_csv(out / "scan.csv")
    times = result.finite_exit_times()
    timeouts = result.timeout_count()
    # cfg.bins sets the logarithmic (tail) histogram; the linear histogram is
    # auto-sized so the central fit window keeps enough bins.
    pdf_lin = build_pdf(
        times, BinningSpec(BinKind.LINEAR, default_linear_bins(times)), timeout_count=timeouts
    )
    pdf_log = build_pdf(times, BinningSpec(BinKind.LOG, cfg.bins), timeout_count=timeouts)
    pdf_lin.to_csv(out / "pdf_linear.csv")
    pdf_log.to_csv(out / "pdf_log.csv")
    fit_exponential_middle(pdf_lin).to_json(out / "fit_exponential.json")
    fit_powerlaw_tail(pdf_log).to_json(out / "fit_powerlaw.json")
    return ["scan.csv", "pdf_linear.csv", "pdf_log.csv", "fit_exponential.json", "fit_powerlaw.json"]


_DISPATCH = {
    "trajectory": _run_trajectory,
    "bloch": _run_trajectory,  # same data product; defaults differ (denser, shorter)
    "lyapunov-map": _run_lyapunov_map,
    "scan": _run_scan,
    "zoom": _run_zoom,
    "pdf": _run_pdf,
}


def run(cfg: RunConfig) -> RunManifest:
    """Execute one command and write its outputs plus the run manifest.

    Data files are byte-identical across reruns with the same config; the
    manifest echoes the config and records wall times and file digests."""
    if cfg.command not in _DISPATCH:
        raise ConfigError(f"unknown command {cfg.command!r}")
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = _utc_stamp()
    names = _DISPATCH[cfg.command](cfg, out)
    manifest = RunManifest(
        config=cfg.echo(),
        version=__version__,
        started_utc=started,
        finished_utc=_utc_stamp(),
        outputs={name: _digest(out / name) for name in names},
    )
    manifest.to_json(out / MANIFEST_NAME)
    return manifest
