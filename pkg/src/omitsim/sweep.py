"""Sweeps, figure presets and their on-disk outputs (CSV + JSON manifest)."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__, units
from .config import RunConfig, to_config_units
from .errors import DegeneratePoleError, OmitError, ValidationError
from .model import (
    DriveParams,
    FixedDelta,
    SystemParams,
    critical_power,
    scaled_drive,
    scaled_system,
    solve_operating_point,
)
from .oracle import oracle_sweep
from .response import (
    Evaluator,
    compute_spectrum,
    dip_metrics,
    poles,
    response_exact,
)

TOOL = "omitsim"

SPECTRUM_COLUMNS = (
    "x_over_omega_m", "delta_rad_s", "re_epsT", "im_epsT", "vp", "vtp",
    "re_pole_plus", "im_pole_plus", "re_pole_minus", "im_pole_minus",
    "re_baseline", "im_baseline",
)
POWER_COLUMNS = (
    "power_mw", "power_w", "beta", "beta_over_kappa_sq", "regime", "classification",
    "dip_value", "narrow_hwhm", "narrow_hwhm_numeric", "broad_hwhm", "dispersion_slope",
)

PRESETS = {
    "fig2": dict(power_mw=1.0, baseline=True, pole_parts=True),
    "fig3": dict(power_mw=1.0, baseline=True, pole_parts=True),
    "fig4": dict(power_mw=6.9, baseline=False, pole_parts=True),
    "fig5": dict(power_mw=6.9, baseline=False, pole_parts=True),
}

DEFAULT_X_SPAN = 0.5
DEFAULT_N_POINTS = 4001
ORACLE_FRACTIONS = (0.25, 0.5, 0.9, 1.5, 2.0)
ORACLE_N_DELTA = 21
ORACLE_X_SPAN = 0.25
ORACLE_THRESHOLD = 0.01
ORACLE_PROBE_RATIO = 1e-5


@dataclass(frozen=True)
class SweepSpec:
    """One-dimensional sweep.

    ``variable`` is ``"x"`` (bounds in units of omega_m) or ``"power"``
    (bounds in mW).
    """

    variable: str
    lo: float
    hi: float
    n_points: int
    evaluator: str = "sideband"
    pole_parts: bool = False
    baseline: bool = False
    metrics: bool = False

    def __post_init__(self):
        if self.variable not in ("x", "power"):
            raise ValidationError(f"sweep variable must be 'x' or 'power', got {self.variable!r}")
        if not self.lo < self.hi:
            raise ValidationError("sweep needs lo < hi")
        if self.n_points < 2:
            raise ValidationError("sweep needs at least 2 points")
        if self.evaluator not in ("exact", "sideband", "oracle"):
            raise ValidationError(f"unknown evaluator {self.evaluator!r}")

    def values(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.n_points)

    def as_dict(self) -> dict:
        return dict(variable=self.variable, lo=self.lo, hi=self.hi, n_points=self.n_points,
                    evaluator=self.evaluator, pole_parts=self.pole_parts,
                    baseline=self.baseline, metrics=self.metrics)


def _fmt(value) -> str:
    # repr is the shortest string that round-trips an IEEE-754 double
    if isinstance(value, str):
        return value
    return repr(float(value))


def to_csv(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def read_csv(text: str):
    """Header and float columns (strings kept where not numeric)."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    cols = {h: [] for h in header}
    for row in reader:
        for h, v in zip(header, row):
            try:
                cols[h].append(float(v))
            except ValueError:
                cols[h].append(v)
    return header, cols


def spectrum_rows(spectrum):
    n = len(spectrum)
    nan = np.full(n, math.nan)
    total = np.asarray(spectrum.total.value)
    plus = spectrum.pole_plus_part if spectrum.pole_plus_part is not None else nan + 0j
    minus = spectrum.pole_minus_part if spectrum.pole_minus_part is not None else nan + 0j
    base = spectrum.baseline_no_coupling if spectrum.baseline_no_coupling is not None else nan + 0j
    cols = [
        spectrum.x_over_omega_m, spectrum.delta, total.real, total.imag, total.real, total.imag,
        np.real(plus), np.imag(plus), np.real(minus), np.imag(minus), np.real(base), np.imag(base),
    ]
    return [list(r) for r in zip(*cols)]


def params_hash(payload) -> str:
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def resolved_parameters(sys: SystemParams, drive: DriveParams, mode) -> dict:
    mode_d = {"type": type(mode).__name__}
    mode_d.update({k: v for k, v in vars(mode).items()})
    return {"system": sys.as_dict(), "drive": drive.as_dict(), "mode": mode_d}


def build_manifest(cfg: Optional[RunConfig], command: str, resolved: dict, *, sweep: Optional[dict] = None,
                   outputs: Sequence[str] = (), extra: Optional[dict] = None, config_values=None) -> dict:
    manifest = {
        "tool": TOOL,
        "version": __version__,
        "command": command,
        "config_source": cfg.source if cfg else "builtin:scaled",
        "config_values": dict(sorted((config_values if config_values is not None else (cfg.values if cfg else {})).items())),
        "inputs_in_config_units": to_config_units(cfg) if cfg else None,
        "resolved": resolved,
        "params_hash": params_hash(resolved),
        "sweep": sweep,
        "outputs": list(outputs),
    }
    if extra:
        manifest.update(extra)
    return manifest


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


@dataclass
class CommandResult:
    text: str
    manifest: dict
    data: object = None
    extra: dict = field(default_factory=dict)


def _write(path, text):
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")


def run_spectrum_command(cfg: RunConfig, spec: SweepSpec, out_path=None, manifest_path=None,
                         command: str = "spectrum") -> CommandResult:
    """Spectrum CSV over x/omega_m in [spec.lo, spec.hi] plus its manifest."""
    if spec.variable != "x":
        raise ValidationError("spectrum sweeps run over x")
    if spec.evaluator == "oracle":
        raise ValidationError("use oracle-check for time-domain spectra")
    sys, drive, mode = cfg.sys, cfg.drive, cfg.mode
    op = solve_operating_point(sys, drive, mode)
    grid = spec.values() * sys.omega_m
    try:
        spectrum = compute_spectrum(sys, op, grid, Evaluator(spec.evaluator),
                                    include_baseline=spec.baseline, include_pole_parts=spec.pole_parts)
    except DegeneratePoleError as exc:
        raise DegeneratePoleError(f"{exc}; rerun without --pole-parts or move the pump power off the critical value") from exc
    text = to_csv(SPECTRUM_COLUMNS, spectrum_rows(spectrum))
    outputs = [str(out_path)] if out_path else []
    resolved = resolved_parameters(sys, drive, mode)
    manifest = build_manifest(cfg, command, resolved, sweep=spec.as_dict(), outputs=outputs,
                              extra={"operating_point": _op_dict(op)})
    _write(out_path, text)
    _write(manifest_path, dump_json(manifest))
    return CommandResult(text=text, manifest=manifest, data=spectrum)


def preset_spectrum(cfg: RunConfig, name: str, evaluator: str = "sideband",
                    n_points: int = DEFAULT_N_POINTS, span: float = DEFAULT_X_SPAN,
                    out_path=None, manifest_path=None) -> CommandResult:
    """Figure presets: fig2/fig3 at 1 mW with baseline, fig4/fig5 at 6.9 mW."""
    if name not in PRESETS:
        raise ValidationError(f"unknown preset {name!r}")
    p = PRESETS[name]
    cfg = with_overrides(cfg, {"pump_power_mw": repr(p["power_mw"])})
    spec = SweepSpec("x", -span, span, n_points, evaluator, pole_parts=p["pole_parts"], baseline=p["baseline"])
    return run_spectrum_command(cfg, spec, out_path, manifest_path, command=name)


def with_overrides(cfg: RunConfig, overrides: dict) -> RunConfig:
    from .config import build

    values = dict(cfg.values)
    values.update(overrides)
    return build(values, cfg.source)


def _op_dict(op) -> dict:
    return {"Delta": op.Delta, "c0_sq": op.c0_sq, "beta": op.beta, "chi0": op.chi0,
            "regime": op.regime.value, "bare_detuning": op.bare_detuning}


def power_metrics(sys: SystemParams, drive: DriveParams, mode, power_w: float,
                  evaluator: str = "sideband", n_grid: int = 2001, span_widths: float = 20.0) -> list:
    """One power-sweep row; the x grid adapts to the narrow pole width."""
    d = drive.replace(power_c=power_w, power_p=drive.power_p / drive.power_c * power_w if drive.power_c else 0.0)
    op = solve_operating_point(sys, d, mode)
    narrow = abs(poles(sys, op).x_plus.imag)
    grid = np.linspace(-1.0, 1.0, n_grid) * span_widths * narrow
    spectrum = compute_spectrum(sys, op, grid, Evaluator(evaluator), include_baseline=True)
    m = dip_metrics(spectrum, sys, op)
    return [
        units.w_to_mw(power_w), power_w, op.beta, op.beta / sys.kappa ** 2, m.regime.value,
        m.classification.value, m.dip_value, m.narrow_hwhm, m.narrow_hwhm_numeric, m.broad_hwhm,
        m.dispersion_slope_at_center,
    ]


def run_power_sweep(cfg: RunConfig, spec: SweepSpec, out_path=None, manifest_path=None,
                    jobs: int = 1) -> CommandResult:
    """Regime and dip metrics versus pump power (bounds in mW)."""
    if spec.variable != "power":
        raise ValidationError("power sweep needs variable='power'")
    if spec.lo < 0:
        raise ValidationError("pump power must be >= 0")
    if spec.evaluator == "oracle":
        raise ValidationError("power sweep supports the exact and sideband evaluators")
    sys, drive, mode = cfg.sys, cfg.drive, cfg.mode
    powers = [units.mw_to_w(p) for p in spec.values()]

    def row(p):
        return power_metrics(sys, drive, mode, p, spec.evaluator)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(row, powers))
    else:
        rows = [row(p) for p in powers]
    delta_for_pc = mode.Delta if isinstance(mode, FixedDelta) else sys.omega_m
    pc = critical_power(sys, delta_for_pc, omega_c=drive.omega_c)
    text = to_csv(POWER_COLUMNS, rows)
    resolved = resolved_parameters(sys, drive, mode)
    manifest = build_manifest(cfg, "power-sweep", resolved, sweep=spec.as_dict(),
                              outputs=[str(out_path)] if out_path else [],
                              extra={"critical_power_w": pc, "critical_power_mw": units.w_to_mw(pc)})
    _write(out_path, text)
    _write(manifest_path, dump_json(manifest))
    return CommandResult(text=text, manifest=manifest, data=rows, extra={"critical_power_w": pc})


def _oracle_power(args):
    sys, omega_c, fraction, x, probe_ratio, kwargs = args
    drive = _oracle_drive(sys, omega_c, fraction, probe_ratio)
    op = solve_operating_point(sys, drive, FixedDelta(sys.omega_m))
    deltas = x + sys.omega_m
    analytic = response_exact(sys, op, deltas).value
    try:
        sweep = oracle_sweep(sys, drive, deltas, bare_detuning=op.bare_detuning, **kwargs)
    except OmitError as exc:
        return drive.power_c, deltas, analytic, None, f"{exc.code}: {exc}"
    return drive.power_c, deltas, analytic, sweep.responses, None


def _oracle_drive(sys, omega_c, fraction, probe_ratio):
    critical = critical_power(sys, omega_c=omega_c)
    pc = fraction * critical
    pp = probe_ratio * (pc if pc > 0 else critical)
    return DriveParams(omega_c=omega_c, power_c=pc, power_p=pp)


def run_oracle_check(cfg: Optional[RunConfig] = None, fractions: Sequence[float] = ORACLE_FRACTIONS,
                     n_delta: int = ORACLE_N_DELTA, x_span: float = ORACLE_X_SPAN,
                     threshold: float = ORACLE_THRESHOLD, probe_ratio: float = ORACLE_PROBE_RATIO,
                     out_path=None, jobs: int = 1, oracle_kwargs: Optional[dict] = None) -> CommandResult:
    """Compare the time-domain oracle with the exact closed form.

    Pump powers are ``fractions`` of the critical power; the effective
    detuning is held at omega_m. Without ``cfg`` the dimensionless set
    (omega_m = 1, kappa = 0.1, gamma_m = 0.005) is used. The report's
    ``summary.passed`` is False if any point deviates by more than
    ``threshold`` (relative) or failed to integrate.
    """
    if n_delta < 2:
        raise ValidationError("need at least 2 detuning points")
    if cfg is None:
        sys = scaled_system()
        omega_c = scaled_drive(sys, 1.0).omega_c
    else:
        sys, omega_c = cfg.sys, cfg.drive.omega_c
    x = np.linspace(-x_span, x_span, n_delta) * sys.omega_m
    tasks = [(sys, omega_c, float(f), x, probe_ratio, dict(oracle_kwargs or {})) for f in fractions]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_oracle_power, tasks))
    else:
        results = [_oracle_power(t) for t in tasks]

    points, failures = [], []
    for fraction, (power, deltas, analytic, oracle, err) in zip(fractions, results):
        if err is not None:
            failures.append({"pump_fraction": fraction, "pump_power_w": power, "error": err})
            continue
        for d, a, o in zip(deltas, analytic, oracle):
            points.append({
                "pump_fraction": fraction,
                "pump_power_w": power,
                "delta": float(d),
                "analytic_re": float(a.real),
                "analytic_im": float(a.imag),
                "oracle_re": float(o.real),
                "oracle_im": float(o.imag),
                "rel_dev": float(abs(o - a) / abs(a)),
            })
    devs = [p["rel_dev"] for p in points]
    payload = {"system": sys.as_dict(), "omega_c": omega_c, "fractions": list(map(float, fractions)),
               "n_delta": n_delta, "x_span": x_span, "probe_ratio": probe_ratio}
    summary = {
        "max_rel_dev": max(devs) if devs else math.nan,
        "mean_rel_dev": float(np.mean(devs)) if devs else math.nan,
        "params_hash": params_hash(payload),
        "threshold": threshold,
        "n_points": len(points),
        "complete": not failures,
    }
    summary["passed"] = bool(summary["complete"] and devs and summary["max_rel_dev"] <= threshold)
    report = {"points": points, "failures": failures, "summary": summary, "parameters": payload,
              "tool": TOOL, "version": __version__}
    text = dump_json(report)
    _write(out_path, text)
    return CommandResult(text=text, manifest=report, data=report)
