"""Command-line interface.

    atomwalk <command> [--config FILE] [--delta X] [--kappa X] [--omega-r X]
             [--p0 X] [--x0 X] [--t-max X] [--workers N] [--out DIR] ...

Exit code 0 on success; on failure a machine-readable JSON error object is
written to stderr and the exit code is nonzero.
"""
from __future__ import annotations

import argparse
import json
import sys

from .config import build_config, parse_config_file
from .errors import AtomwalkError, ConfigError
from .orchestrator import run


class _Parser(argparse.ArgumentParser):
    # Route argparse's own failures through the JSON error channel.
    def error(self, message):
        raise ConfigError(message)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI config file; flags override its values")
    p.add_argument("--delta", type=float, help="atom-field detuning")
    p.add_argument("--kappa", type=float, help="applied force")
    p.add_argument("--omega-r", type=float, dest="omega_r", help="recoil frequency")
    p.add_argument("--x0", type=float, help="initial position")
    p.add_argument("--p0", type=float, help="initial momentum")
    p.add_argument("--t-max", type=float, dest="t_max", help="integration horizon")
    p.add_argument("--workers", type=int, help="worker count (default: ATOMWALK_WORKERS or CPU count)")
    p.add_argument("--out", help="output directory (default: current directory)")


def _parse_interval(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(tok) for tok in text.split(":"))
    except ValueError:
        raise ConfigError(f"--interval expects LO:HI, got {text!r}") from None
    return lo, hi


def _parse_grid(text: str):
    try:
        dpart, kpart = text.split(",")
        dlo, dhi, nd = dpart.split(":")
        klo, khi, nk = kpart.split(":")
        return float(dlo), float(dhi), int(nd), float(klo), float(khi), int(nk)
    except ValueError:
        raise ConfigError(
            f"--grid expects DLO:DHI:ND,KLO:KHI:NK, got {text!r}"
        ) from None


def _parse_eps(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise ConfigError(f"--eps-list expects comma-separated floats, got {text!r}") from None


def build_parser() -> _Parser:
    parser = _Parser(prog="atomwalk", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    for name in ("trajectory", "bloch"):
        p = sub.add_parser(name)
        _add_common(p)

    p = sub.add_parser("lyapunov-map")
    _add_common(p)
    p.add_argument("--grid", help="DLO:DHI:ND,KLO:KHI:NK")
    p.add_argument("--horizon", type=float, help="exponent horizon in tau")

    p = sub.add_parser("scan")
    _add_common(p)
    p.add_argument("--interval", help="LO:HI for the swept axis")
    p.add_argument("--n", type=int, help="sample count")
    p.add_argument("--axis", choices=["delta", "x0", "p0"], help="swept quantity")
    p.add_argument("--eps-list", dest="eps_list", help="comma-separated perturbations; adds an uncertainty-exponent estimate")

    p = sub.add_parser("zoom")
    _add_common(p)
    p.add_argument("--interval", help="LO:HI for the swept axis")
    p.add_argument("--n", type=int, help="sample count per level")
    p.add_argument("--axis", choices=["delta", "x0", "p0"], help="swept quantity")
    p.add_argument("--mag", type=float, help="magnification per level")
    p.add_argument("--levels", type=int, help="number of magnified levels")
    p.add_argument("--center", type=float, help="center of the first magnification")

    p = sub.add_parser("pdf")
    _add_common(p)
    p.add_argument("--interval", help="LO:HI for the swept axis")
    p.add_argument("--n", type=int, help="ensemble size")
    p.add_argument("--axis", choices=["delta", "x0", "p0"], help="swept quantity")
    p.add_argument("--bins", type=int, help="histogram bin count")

    return parser


def _overrides_from_args(args: argparse.Namespace) -> dict:
    over = {
        "control.delta": getattr(args, "delta", None),
        "control.kappa": getattr(args, "kappa", None),
        "control.omega_r": getattr(args, "omega_r", None),
        "initial.x0": getattr(args, "x0", None),
        "initial.p0": getattr(args, "p0", None),
        "integrator.t_max": getattr(args, "t_max", None),
        "run.workers": getattr(args, "workers", None),
        "run.out": getattr(args, "out", None),
        "scan.n": getattr(args, "n", None),
        "scan.axis": getattr(args, "axis", None),
        "zoom.mag": getattr(args, "mag", None),
        "zoom.levels": getattr(args, "levels", None),
        "zoom.center": getattr(args, "center", None),
        "lyapunov.horizon": getattr(args, "horizon", None),
        "pdf.bins": getattr(args, "bins", None),
    }
    if getattr(args, "interval", None):
        lo, hi = _parse_interval(args.interval)
        over["scan.lo"] = lo
        over["scan.hi"] = hi
    if getattr(args, "grid", None):
        dlo, dhi, nd, klo, khi, nk = _parse_grid(args.grid)
        over.update(
            {
                "lyapunov.delta_lo": dlo,
                "lyapunov.delta_hi": dhi,
                "lyapunov.n_delta": nd,
                "lyapunov.kappa_lo": klo,
                "lyapunov.kappa_hi": khi,
                "lyapunov.n_kappa": nk,
            }
        )
    if getattr(args, "eps_list", None):
        over["uncertainty.eps_list"] = _parse_eps(args.eps_list)
    return over


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        file_values = parse_config_file(args.config) if args.config else {}
        cfg = build_config(args.command, file_values, _overrides_from_args(args))
        manifest = run(cfg)
    except AtomwalkError as exc:
        json.dump(
            {"error": type(exc).__name__, "message": str(exc)},
            sys.stderr,
        )
        sys.stderr.write("\n")
        return 1
    print(json.dumps({"out": str(cfg.out_dir), "outputs": sorted(manifest.outputs)}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
