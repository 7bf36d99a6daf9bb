"""Command line front end.

Data goes to stdout or to ``--out``; errors go to stderr as one JSON line
``{"error": CODE, "message": ...}``. Exit status: 0 success, 2 validation
error, 3 numerical failure, 4 threshold breach.
"""
from __future__ import annotations

import argparse
import json
import os
import sys as _sys
from pathlib import Path

from . import __version__, units
from .config import build, parse_config
from .errors import ConfigError, OmitError, ThresholdBreach
from .model import FixedDelta, critical_power, solve_operating_point
from .response import DegeneratePoleError, poles, residues
from .sweep import (
    DEFAULT_N_POINTS,
    DEFAULT_X_SPAN,
    ORACLE_FRACTIONS,
    ORACLE_N_DELTA,
    ORACLE_PROBE_RATIO,
    ORACLE_THRESHOLD,
    ORACLE_X_SPAN,
    PRESETS,
    SweepSpec,
    dump_json,
    preset_spectrum,
    run_oracle_check,
    run_power_sweep,
    run_spectrum_command,
)


def _overrides(args) -> dict:
    out = {}
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        out[key.strip()] = value.strip()
    if getattr(args, "pump_power_mw", None) is not None:
        out["pump_power_mw"] = repr(args.pump_power_mw)
    return out


def _config(args):
    return parse_config(args.config, _overrides(args))


def _manifest_path(args):
    if args.manifest:
        return args.manifest
    if args.out:
        return str(args.out) + ".manifest.json"
    return None


def _emit(args, result):
    if not args.out:
        _sys.stdout.write(result.text)


def cmd_spectrum(args):
    cfg = _config(args)
    spec = SweepSpec("x", args.lo, args.hi, args.n, args.evaluator,
                     pole_parts=args.pole_parts, baseline=args.baseline)
    _emit(args, run_spectrum_command(cfg, spec, args.out, _manifest_path(args)))
    return 0


def cmd_preset(args):
    cfg = _config(args)
    _emit(args, preset_spectrum(cfg, args.command, args.evaluator, args.n, args.span,
                                args.out, _manifest_path(args)))
    return 0


def cmd_poles(args):
    cfg = _config(args)
    op = solve_operating_point(cfg.sys, cfg.drive, cfg.mode)
    try:
        p = residues(cfg.sys, op)
    except DegeneratePoleError:
        p = poles(cfg.sys, op)

    def pair(z):
        return None if z is None else [z.real, z.imag]

    payload = {
        "pump_power_w": cfg.drive.power_c,
        "beta": op.beta,
        "beta_over_kappa_sq": op.beta / cfg.sys.kappa ** 2,
        "Delta": op.Delta,
        "regime": op.regime.value,
        "x_plus": pair(p.x_plus),
        "x_minus": pair(p.x_minus),
        "A_plus": pair(p.A_plus),
        "A_minus": pair(p.A_minus),
    }
    text = dump_json(payload)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        _sys.stdout.write(text)
    return 0


def cmd_critical_power(args):
    cfg = _config(args)
    delta = cfg.mode.Delta if isinstance(cfg.mode, FixedDelta) else cfg.sys.omega_m
    pc = critical_power(cfg.sys, delta, omega_c=cfg.drive.omega_c)
    text = dump_json({"critical_power_w": pc, "critical_power_mw": units.w_to_mw(pc), "Delta": delta})
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        _sys.stdout.write(text)
    return 0


def cmd_power_sweep(args):
    cfg = _config(args)
    spec = SweepSpec("power", args.lo_mw, args.hi_mw, args.n, args.evaluator, metrics=True)
    _emit(args, run_power_sweep(cfg, spec, args.out, _manifest_path(args), jobs=args.jobs))
    return 0


def cmd_oracle_check(args):
    cfg = None
    if args.experimental_params or args.config or args.set:
        cfg = _config(args)
    fractions = [float(f) for f in args.fractions.split(",")] if args.fractions else list(ORACLE_FRACTIONS)
    result = run_oracle_check(cfg, fractions, args.n_delta, args.x_span, args.threshold,
                              args.probe_ratio, args.out, jobs=args.jobs)
    _emit(args, result)
    summary = result.data["summary"]
    if not summary["complete"]:
        raise OmitError("oracle run incomplete; see failures in the report")
    if not summary["passed"]:
        raise ThresholdBreach(
            f"max relative deviation {summary['max_rel_dev']:.3e} exceeds threshold {summary['threshold']:.3e}"
        )
    return 0


def cmd_rerun(args):
    manifest = json.loads(Path(args.manifest_file).read_text(encoding="utf-8"))
    command = manifest.get("command")
    source = manifest.get("config_source", "<manifest>")
    cfg = build(manifest["config_values"], source)
    sweep = manifest.get("sweep") or {}
    out = args.out or (manifest["outputs"][0] if manifest.get("outputs") else None)
    mpath = str(out) + ".manifest.json" if out else None
    if command == "spectrum":
        result = run_spectrum_command(cfg, SweepSpec(**sweep), out, mpath)
    elif command in PRESETS:
        span = sweep["hi"]
        result = preset_spectrum(cfg, command, sweep["evaluator"], sweep["n_points"], span, out, mpath)
    elif command == "power-sweep":
        result = run_power_sweep(cfg, SweepSpec(**sweep), out, mpath)
    else:
        raise ConfigError(f"cannot rerun command {command!r} from a manifest")
    if not out:
        _sys.stdout.write(result.text)
    return 0


def _common(p, config=True):
    if config:
        p.add_argument("--config", help="key=value parameter file (default: shipped experimental set)")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
        p.add_argument("--pump-power-mw", type=float, help="override pump_power_mw")
    p.add_argument("--out", help="write data here instead of stdout")
    p.add_argument("--manifest", help="manifest path (default: OUT.manifest.json when --out is given)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="omitsim", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", help="probe spectrum over x/omega_m")
    _common(p)
    p.add_argument("--lo", type=float, default=-DEFAULT_X_SPAN, help="lower x/omega_m")
    p.add_argument("--hi", type=float, default=DEFAULT_X_SPAN, help="upper x/omega_m")
    p.add_argument("--n", type=int, default=DEFAULT_N_POINTS)
    p.add_argument("--evaluator", choices=("exact", "sideband"), default="sideband")
    p.add_argument("--baseline", action="store_true", help="include the uncoupled response")
    p.add_argument("--pole-parts", action="store_true", help="include per-pole contributions")
    p.set_defaults(func=cmd_spectrum)

    for name in sorted(PRESETS):
        p = sub.add_parser(name, help=f"figure preset at {PRESETS[name]['power_mw']} mW")
        _common(p)
        p.add_argument("--n", type=int, default=DEFAULT_N_POINTS)
        p.add_argument("--span", type=float, default=DEFAULT_X_SPAN, help="half width in x/omega_m")
        p.add_argument("--evaluator", choices=("exact", "sideband"), default="sideband")
        p.set_defaults(func=cmd_preset)

    p = sub.add_parser("poles", help="poles, residues and regime at the configured pump power")
    _common(p)
    p.set_defaults(func=cmd_poles)

    p = sub.add_parser("critical-power", help="pump power separating the EIT and splitting regimes")
    _common(p)
    p.set_defaults(func=cmd_critical_power)

    p = sub.add_parser("power-sweep", help="regime and dip metrics versus pump power")
    _common(p)
    p.add_argument("--lo-mw", type=float, default=0.1)
    p.add_argument("--hi-mw", type=float, default=10.0)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--evaluator", choices=("exact", "sideband"), default="sideband")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_power_sweep)

    p = sub.add_parser("oracle-check", help="time-domain integration versus the closed form")
    _common(p)
    p.add_argument("--experimental-params", action="store_true",
                   help="use the experimental parameter set instead of the dimensionless one (slow)")
    p.add_argument("--fractions", help="comma-separated pump powers in units of the critical power")
    p.add_argument("--n-delta", type=int, default=ORACLE_N_DELTA)
    p.add_argument("--x-span", type=float, default=ORACLE_X_SPAN, help="half width in x/omega_m")
    p.add_argument("--threshold", type=float, default=ORACLE_THRESHOLD)
    p.add_argument("--probe-ratio", type=float, default=ORACLE_PROBE_RATIO)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_oracle_check)

    p = sub.add_parser("rerun", help="reproduce an output from its manifest")
    p.add_argument("manifest_file")
    p.add_argument("--out")
    p.set_defaults(func=cmd_rerun)
    return ap


def _fail(code, message, status):
    _sys.stderr.write(json.dumps({"error": code, "message": message}) + "\n")
    return status


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except OmitError as exc:
        return _fail(exc.code, str(exc), exc.exit_status)
    except BrokenPipeError:
        # reader went away (e.g. piped into head); stop quietly
        os.dup2(os.open(os.devnull, os.O_WRONLY), _sys.stdout.fileno())
        return 0
    except OSError as exc:
        return _fail("E_IO", str(exc), 2)


if __name__ == "__main__":
    raise SystemExit(main())
