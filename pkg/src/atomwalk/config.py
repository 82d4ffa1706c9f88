"""Run configuration: declarative INI-style files plus flag overrides.

The schema is strict: unknown sections or keys are rejected outright, since a
silently ignored typo in a control parameter would corrupt a fractal study.
Defaults follow the standard operating point (omega_r = 1e-3, kappa = 0.01,
ground-state atom launched from x0 = 0 with p0 = 10).
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields
from pathlib import Path

from .dynamics import AtomState, ControlParams
from .errors import ConfigError, InvalidParamsError, InvalidStateError
from .integrator import IntegratorSettings
from .scattering import ScanAxis
from .workers import resolve_workers

COMMANDS = ("trajectory", "bloch", "lyapunov-map", "scan", "zoom", "pdf")

# Horizons differ by command: figure-style trajectories are short, scattering
# sweeps need room for long exits.
COMMAND_T_MAX = {
    "trajectory": 1e4,
    "bloch": 1e3,
    "lyapunov-map": 2e5,  # per-trajectory horizon unused; scans use their own
    "scan": 2e5,
    "zoom": 2e5,
    "pdf": 2e5,
}
COMMAND_SAMPLE_INTERVAL = {"trajectory": 1.0, "bloch": 0.1}

DEFAULT_CONTROL = {"omega_r": 1e-3, "delta": 0.15, "kappa": 0.01}
DEFAULT_INITIAL = {"x0": 0.0, "p0": 10.0, "u0": 0.0, "v0": 0.0, "z0": -1.0}

# section -> key -> parser
_SCHEMA = {
    "control": {"omega_r": float, "delta": float, "kappa": float},
    "initial": {"x0": float, "p0": float, "u0": float, "v0": float, "z0": float},
    "integrator": {
        "rel_tol": float,
        "abs_tol": float,
        "max_step": float,
        "invariant_abort_threshold": float,
        "t_max": float,
        "sample_interval": float,
    },
    "run": {"workers": int, "out": str},
    "scan": {"axis": str, "lo": float, "hi": float, "n": int},
    "zoom": {"mag": float, "levels": int, "center": float},
    "lyapunov": {
        "delta_lo": float,
        "delta_hi": float,
        "n_delta": int,
        "kappa_lo": float,
        "kappa_hi": float,
        "n_kappa": int,
        "horizon": float,
        "renorm_interval": float,
    },
    "pdf": {"bins": int},
    "uncertainty": {"eps_list": str, "threshold": float},
}


@dataclass(frozen=True)
class GridSpec:
    """Rectangular (delta, kappa) grid for exponent maps."""

    delta_lo: float = -0.6
    delta_hi: float = 0.6
    n_delta: int = 11
    kappa_lo: float = -0.3
    kappa_hi: float = 0.65
    n_kappa: int = 11

    def __post_init__(self):
        if self.n_delta < 1 or self.n_kappa < 1:
            raise ConfigError("grid sample counts must be >= 1")
        if self.n_delta > 1 and not self.delta_lo < self.delta_hi:
            raise ConfigError("grid needs delta_lo < delta_hi")
        if self.n_kappa > 1 and not self.kappa_lo < self.kappa_hi:
            raise ConfigError("grid needs kappa_lo < kappa_hi")


@dataclass
class RunConfig:
    """Everything one command execution needs."""

    command: str
    control: ControlParams
    initial: AtomState
    settings: IntegratorSettings
    workers: int
    out_dir: Path
    scan_axis: ScanAxis = ScanAxis.DETUNING
    scan_lo: float = 0.1
    scan_hi: float = 0.2
    scan_n: int = 512
    grid: GridSpec = field(default_factory=GridSpec)
    horizon: float = 1e4
    renorm_interval: float = 1.0
    mag: float = 50.0
    levels: int = 3
    center: float | None = None
    eps_list: list[float] | None = None
    uncertainty_threshold: float | None = None
    bins: int = 60

    def echo(self) -> dict:
        """Plain-dict snapshot for the run manifest."""
        return {
            "command": self.command,
            "control": {
                "omega_r": self.control.omega_r,
                "delta": self.control.delta,
                "kappa": self.control.kappa,
            },
            "initial": {
                "x0": self.initial.x,
                "p0": self.initial.p,
                "u0": self.initial.u,
                "v0": self.initial.v,
                "z0": self.initial.z,
            },
            "integrator": {
                f.name: getattr(self.settings, f.name) for f in fields(self.settings)
            },
            "workers": self.workers,
            "out": str(self.out_dir),
            "scan": {
                "axis": self.scan_axis.value,
                "lo": self.scan_lo,
                "hi": self.scan_hi,
                "n": self.scan_n,
            },
            "grid": {f.name: getattr(self.grid, f.name) for f in fields(self.grid)},
            "horizon": self.horizon,
            "renorm_interval": self.renorm_interval,
            "zoom": {"mag": self.mag, "levels": self.levels, "center": self.center},
            "eps_list": self.eps_list,
            "uncertainty_threshold": self.uncertainty_threshold,
            "bins": self.bins,
        }


def _parse_eps_list(text: str) -> list[float]:
    try:
        values = [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigError(f"uncertainty.eps_list: {exc}") from None
    if not values:
        raise ConfigError("uncertainty.eps_list is empty")
    return values


def parse_config_file(path) -> dict:
    """Parse and validate an INI config file into {section: {key: value}}."""
    parser = configparser.ConfigParser(interpolation=None)
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path) as fh:
            parser.read_file(fh, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"config parse error: {exc}") from None

    values: dict = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(
                f"{path}: unknown section [{section}]; known sections: "
                + ", ".join(sorted(_SCHEMA))
            )
        values[section] = {}
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(
                    f"{path}: unknown key '{key}' in section [{section}]; known keys: "
                    + ", ".join(sorted(_SCHEMA[section]))
                )
            caster = _SCHEMA[section][key]
            try:
                values[section][key] = caster(raw)
            except ValueError:
                raise ConfigError(
                    f"{path}: [{section}] {key} = {raw!r} is not a valid "
                    f"{caster.__name__}"
                ) from None
    return values


def build_config(command: str, file_values: dict | None = None, overrides: dict | None = None) -> RunConfig:
    """Assemble a RunConfig: defaults, then file values, then flag overrides."""
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}; expected one of {COMMANDS}")
    file_values = file_values or {}
    overrides = overrides or {}

    def pick(section: str, key: str, default):
        flat = f"{section}.{key}"
        if flat in overrides and overrides[flat] is not None:
            return overrides[flat]
        return file_values.get(section, {}).get(key, default)

    try:
        control = ControlParams(
            omega_r=pick("control", "omega_r", DEFAULT_CONTROL["omega_r"]),
            delta=pick("control", "delta", DEFAULT_CONTROL["delta"]),
            kappa=pick("control", "kappa", DEFAULT_CONTROL["kappa"]),
        )
    except InvalidParamsError as exc:
        raise ConfigError(f"[control]: {exc}") from None
    try:
        initial = AtomState(
            x=pick("initial", "x0", DEFAULT_INITIAL["x0"]),
            p=pick("initial", "p0", DEFAULT_INITIAL["p0"]),
            u=pick("initial", "u0", DEFAULT_INITIAL["u0"]),
            v=pick("initial", "v0", DEFAULT_INITIAL["v0"]),
            z=pick("initial", "z0", DEFAULT_INITIAL["z0"]),
        )
    except InvalidStateError as exc:
        raise ConfigError(f"[initial]: {exc}") from None

    defaults = IntegratorSettings()
    try:
        settings = IntegratorSettings(
            rel_tol=pick("integrator", "rel_tol", defaults.rel_tol),
            abs_tol=pick("integrator", "abs_tol", defaults.abs_tol),
            max_step=pick("integrator", "max_step", defaults.max_step),
            invariant_abort_threshold=pick(
                "integrator", "invariant_abort_threshold", defaults.invariant_abort_threshold
            ),
            t_max=pick("integrator", "t_max", COMMAND_T_MAX[command]),
            sample_interval=pick(
                "integrator", "sample_interval", COMMAND_SAMPLE_INTERVAL.get(command, 1.0)
            ),
        )
    except InvalidParamsError as exc:
        raise ConfigError(f"[integrator]: {exc}") from None

    workers = pick("run", "workers", None)
    try:
        workers = resolve_workers(workers)
    except ValueError as exc:
        raise ConfigError(f"[run] workers: {exc}") from None

    axis_raw = pick("scan", "axis", ScanAxis.DETUNING.value)
    try:
        scan_axis = ScanAxis(axis_raw)
    except ValueError:
        raise ConfigError(
            f"[scan] axis must be one of {[a.value for a in ScanAxis]}, got {axis_raw!r}"
        ) from None

    eps_raw = pick("uncertainty", "eps_list", None)
    if isinstance(eps_raw, str):
        eps_list = _parse_eps_list(eps_raw)
    else:
        eps_list = eps_raw

    try:
        grid = GridSpec(
            delta_lo=pick("lyapunov", "delta_lo", GridSpec.delta_lo),
            delta_hi=pick("lyapunov", "delta_hi", GridSpec.delta_hi),
            n_delta=pick("lyapunov", "n_delta", GridSpec.n_delta),
            kappa_lo=pick("lyapunov", "kappa_lo", GridSpec.kappa_lo),
            kappa_hi=pick("lyapunov", "kappa_hi", GridSpec.kappa_hi),
            n_kappa=pick("lyapunov", "n_kappa", GridSpec.n_kappa),
        )
    except ConfigError:
        raise
    except InvalidParamsError as exc:
        raise ConfigError(f"[lyapunov]: {exc}") from None

    cfg = RunConfig(
        command=command,
        control=control,
        initial=initial,
        settings=settings,
        workers=workers,
        out_dir=Path(pick("run", "out", ".")),
        scan_axis=scan_axis,
        scan_lo=pick("scan", "lo", 0.1),
        scan_hi=pick("scan", "hi", 0.2),
        scan_n=pick("scan", "n", 512),
        grid=grid,
        horizon=pick("lyapunov", "horizon", 1e4),
        renorm_interval=pick("lyapunov", "renorm_interval", 1.0),
        mag=pick("zoom", "mag", 50.0),
        levels=pick("zoom", "levels", 3),
        center=pick("zoom", "center", None),
        eps_list=eps_list,
        uncertainty_threshold=pick("uncertainty", "threshold", None),
        bins=pick("pdf", "bins", 60),
    )
    _validate_config(cfg)
    return cfg


def _validate_config(cfg: RunConfig) -> None:
    if cfg.command in ("scan", "zoom", "pdf") and not cfg.scan_lo < cfg.scan_hi:
        raise ConfigError(f"[scan] needs lo < hi, got [{cfg.scan_lo}, {cfg.scan_hi}]")
    if cfg.command in ("scan", "zoom", "pdf") and cfg.scan_n < 2:
        raise ConfigError(f"[scan] n must be >= 2, got {cfg.scan_n}")
    if cfg.command == "zoom":
        if not cfg.mag > 1:
            raise ConfigError(f"[zoom] mag must be > 1, got {cfg.mag}")
        if cfg.levels < 1:
            raise ConfigError(f"[zoom] levels must be >= 1, got {cfg.levels}")
    if cfg.command == "lyapunov-map":
        if not cfg.horizon >= 100 * cfg.renorm_interval:
            raise ConfigError(
                "[lyapunov] horizon must cover at least 100 renormalization intervals"
            )
    if cfg.command == "pdf" and cfg.bins < 2:
        raise ConfigError(f"[pdf] bins must be >= 2, got {cfg.bins}")


def load_config(path, command: str = "trajectory", overrides: dict | None = None) -> RunConfig:
    """Parse a config file and apply flag overrides (flags win over the file)."""
    return build_config(command, parse_config_file(path), overrides)
