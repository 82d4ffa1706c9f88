"""Readers for the simulator's documented CSV/JSON schemas.

Strict by design: a header that deviates from the documented schema names the
offending column instead of guessing.  Values are plain floats; empty exit
cells (timeouts, failures) read as NaN.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

TRAJECTORY_COLUMNS = ["tau", "x", "p", "u", "v", "z"]
EVENTS_COLUMNS = ["tau", "kind", "x", "p", "u", "v", "z"]
SCAN_COLUMNS = ["axis_value", "outcome_kind", "T"]
PDF_COLUMNS = ["bin_lo", "bin_hi", "density", "count"]
FTLE_COLUMNS = ["delta", "kappa", "lambda"]


class SchemaError(ValueError):
    """An input file does not match its documented schema."""


def _check_header(path, header, expected) -> None:
    if header is None:
        raise SchemaError(f"{path}: empty file, expected header {','.join(expected)}")
    if header != expected:
        for got, want in zip(header, expected):
            if got != want:
                raise SchemaError(
                    f"{path}: expected column '{want}', found '{got}'"
                )
        raise SchemaError(
            f"{path}: expected {len(expected)} columns {','.join(expected)}, "
            f"found {len(header)}"
        )


def _read_rows(path, expected):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        _check_header(path, header, expected)
        return list(reader)


def _column(path, rows, expected, name):
    idx = expected.index(name)
    out = np.empty(len(rows))
    for i, row in enumerate(rows):
        cell = row[idx]
        try:
            out[i] = float(cell) if cell != "" else math.nan
        except ValueError:
            raise SchemaError(
                f"{path}: row {i + 2}, column '{name}': not a number: {cell!r}"
            ) from None
    return out


@dataclass
class Trajectory:
    tau: np.ndarray
    x: np.ndarray
    p: np.ndarray
    u: np.ndarray
    v: np.ndarray
    z: np.ndarray


def read_trajectory(path) -> Trajectory:
    rows = _read_rows(path, TRAJECTORY_COLUMNS)
    cols = {
        name: _column(path, rows, TRAJECTORY_COLUMNS, name) for name in TRAJECTORY_COLUMNS
    }
    return Trajectory(**{k if k != "tau" else "tau": v for k, v in cols.items()})


@dataclass
class Scan:
    axis_value: np.ndarray
    outcome_kind: list[str]
    T: np.ndarray


def read_scan(path) -> Scan:
    rows = _read_rows(path, SCAN_COLUMNS)
    kinds = [row[1] for row in rows]
    return Scan(
        axis_value=_column(path, rows, SCAN_COLUMNS, "axis_value"),
        outcome_kind=kinds,
        T=_column(path, rows, SCAN_COLUMNS, "T"),
    )


@dataclass
class Histogram:
    bin_lo: np.ndarray
    bin_hi: np.ndarray
    density: np.ndarray
    count: np.ndarray


def read_pdf(path) -> Histogram:
    rows = _read_rows(path, PDF_COLUMNS)
    return Histogram(
        bin_lo=_column(path, rows, PDF_COLUMNS, "bin_lo"),
        bin_hi=_column(path, rows, PDF_COLUMNS, "bin_hi"),
        density=_column(path, rows, PDF_COLUMNS, "density"),
        count=_column(path, rows, PDF_COLUMNS, "count"),
    )


@dataclass
class FtleGrid:
    delta: np.ndarray
    kappa: np.ndarray
    lam: np.ndarray  # shape (n_delta, n_kappa)


def read_ftle_map(path) -> FtleGrid:
    rows = _read_rows(path, FTLE_COLUMNS)
    d = _column(path, rows, FTLE_COLUMNS, "delta")
    k = _column(path, rows, FTLE_COLUMNS, "kappa")
    lam = _column(path, rows, FTLE_COLUMNS, "lambda")
    deltas = np.unique(d)
    kappas = np.unique(k)
    grid = np.full((deltas.size, kappas.size), np.nan)
    for dv, kv, lv in zip(d, k, lam):
        i = int(np.searchsorted(deltas, dv))
        j = int(np.searchsorted(kappas, kv))
        grid[i, j] = lv
    return FtleGrid(delta=deltas, kappa=kappas, lam=grid)


@dataclass
class FitLine:
    model: str
    parameter: float
    window: tuple[float, float]


def read_fit_report(path) -> FitLine:
    with open(path) as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: invalid JSON: {exc}") from None
    for key in ("model", "parameter", "window"):
        if key not in payload:
            raise SchemaError(f"{path}: fit report missing key '{key}'")
    window = payload["window"]
    if not (isinstance(window, list) and len(window) == 2):
        raise SchemaError(f"{path}: fit report 'window' must be [lo, hi]")
    return FitLine(
        model=str(payload["model"]),
        parameter=float(payload["parameter"]),
        window=(float(window[0]), float(window[1])),
    )


@dataclass
class ZoomManifest:
    magnification: float
    levels: list[dict]
    base_dir: Path


def read_zoom_manifest(path) -> ZoomManifest:
    path = Path(path)
    with open(path) as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: invalid JSON: {exc}") from None
    for key in ("magnification", "levels"):
        if key not in payload:
            raise SchemaError(f"{path}: zoom manifest missing key '{key}'")
    return ZoomManifest(
        magnification=float(payload["magnification"]),
        levels=list(payload["levels"]),
        base_dir=path.parent,
    )
