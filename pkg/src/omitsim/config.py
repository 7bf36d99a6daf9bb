"""Plain-text ``key = value`` parameter files.

Units are part of the key name and every rate carries the 2*pi convention,
so ``kappa_khz = 215`` means kappa = 2*pi x 215 kHz. A value may repeat the
unit as a suffix (``215 kHz``); a suffix that disagrees with the key is an
error.
"""
from __future__ import annotations

import re
from importlib import resources
from pathlib import Path
from typing import NamedTuple, Optional, Union

from . import units
from .errors import ConfigError
from .model import (
    DEFAULT_PROBE_RATIO_MAX,
    DriveParams,
    FixedDelta,
    OperatingMode,
    SelfConsistent,
    SystemParams,
)

UNITS = {
    "lambda_nm": "nm",
    "cavity_length_mm": "mm",
    "mass_ng": "ng",
    "kappa_khz": "khz",
    "omega_m_khz": "khz",
    "gamma_m_hz": "hz",
    "pump_power_mw": "mw",
    "probe_ratio": "",
}
REQUIRED = (
    "lambda_nm", "cavity_length_mm", "mass_ng", "kappa_khz",
    "omega_m_khz", "gamma_m_hz", "pump_power_mw",
)
OPTIONAL = {"probe_ratio": "1e-3", "delta_mode": "fixed", "detuning_mode": "omega_m"}
KNOWN = set(REQUIRED) | set(OPTIONAL)

_VALUE = re.compile(r"^\s*([-+0-9.eE]+)\s*([A-Za-z]*)\s*$")


class RunConfig(NamedTuple):
    sys: SystemParams
    drive: DriveParams
    mode: OperatingMode
    values: dict
    source: str


def default_config_path():
    return resources.files("omitsim").joinpath("data/experiment.cfg")


def read_values(path) -> dict:
    """Raw key/value strings, comments and blank lines dropped."""
    try:
        text = (Path(path) if isinstance(path, str) else path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in values:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        values[key] = value
    return values


def _number(key, raw):
    m = _VALUE.match(raw)
    if not m:
        raise ConfigError(f"{key}: not a number: {raw!r}")
    try:
        value = float(m.group(1))
    except ValueError:
        raise ConfigError(f"{key}: not a number: {raw!r}") from None
    suffix = m.group(2).lower()
    if suffix and suffix != UNITS.get(key, ""):
        raise ConfigError(f"{key}: unit suffix {m.group(2)!r} does not match expected {UNITS.get(key) or 'dimensionless'}")
    return value


def build(values: dict, source: str = "<dict>") -> RunConfig:
    """Validate raw values and convert to SI parameter objects."""
    unknown = sorted(set(values) - KNOWN)
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    missing = [k for k in REQUIRED if k not in values]
    if missing:
        raise ConfigError(f"missing config key(s): {', '.join(missing)}")
    merged = dict(OPTIONAL)
    merged.update(values)

    num = {k: _number(k, merged[k]) for k in UNITS}
    omega_c = units.wavelength_to_angular_frequency(units.nm_to_m(num["lambda_nm"]))
    omega_m = units.khz_to_rad_s(num["omega_m_khz"])

    delta_mode = merged["delta_mode"].strip().lower()
    if delta_mode not in ("fixed", "self_consistent"):
        raise ConfigError(f"delta_mode must be 'fixed' or 'self_consistent', got {merged['delta_mode']!r}")
    det_raw = merged["detuning_mode"].strip()
    if det_raw.lower() == "omega_m":
        detuning = omega_m
    else:
        m = _VALUE.match(det_raw)
        if not m or m.group(2).lower() not in ("", "khz"):
            raise ConfigError(f"detuning_mode must be 'omega_m' or a value in kHz, got {det_raw!r}")
        detuning = units.khz_to_rad_s(float(m.group(1)))

    if delta_mode == "fixed":
        mode = FixedDelta(detuning)
        omega0 = omega_c
    else:
        mode = SelfConsistent(detuning)
        omega0 = omega_c + detuning

    if num["probe_ratio"] < 0:
        raise ConfigError("probe_ratio must be >= 0")
    try:
        sys = SystemParams(
            omega0=omega0,
            L=units.mm_to_m(num["cavity_length_mm"]),
            kappa=units.khz_to_rad_s(num["kappa_khz"]),
            mass=units.ng_to_kg(num["mass_ng"]),
            omega_m=omega_m,
            gamma_m=units.hz_to_rad_s(num["gamma_m_hz"]),
        )
        power_c = units.mw_to_w(num["pump_power_mw"])
        drive = DriveParams(
            omega_c=omega_c,
            power_c=power_c,
            power_p=num["probe_ratio"] * power_c,
            probe_ratio_max=DEFAULT_PROBE_RATIO_MAX,
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return RunConfig(sys, drive, mode, dict(values), source)


def parse_config(path: Optional[Union[str, Path]] = None, overrides: Optional[dict] = None) -> RunConfig:
    """Load a config file (the shipped experimental set if ``path`` is None)."""
    if path is None:
        src = default_config_path()
        values = read_values(src)
        source = "default:experiment.cfg"
    else:
        values = read_values(Path(path))
        source = str(path)
    if overrides:
        values.update({k: str(v) for k, v in overrides.items()})
    return build(values, source)


def to_config_units(cfg: RunConfig) -> dict:
    """SI parameters expressed back in config units (for manifests)."""
    s, d = cfg.sys, cfg.drive
    out = {
        "lambda_nm": units.m_to_nm(units.angular_frequency_to_wavelength(d.omega_c)),
        "cavity_length_mm": units.m_to_mm(s.L),
        "mass_ng": units.kg_to_ng(s.mass),
        "kappa_khz": units.rad_s_to_khz(s.kappa),
        "omega_m_khz": units.rad_s_to_khz(s.omega_m),
        "gamma_m_hz": units.rad_s_to_hz(s.gamma_m),
        "pump_power_mw": units.w_to_mw(d.power_c),
        "probe_ratio": d.power_p / d.power_c if d.power_c > 0 else _number("probe_ratio", cfg.values.get("probe_ratio", OPTIONAL["probe_ratio"])),
    }
    return out
