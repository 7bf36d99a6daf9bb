"""Physical parameters and the steady-state operating point of a pumped
optomechanical cavity.

All quantities are SI; rates and frequencies are angular (rad/s).
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from . import units
from .errors import BistabilityError, ConvergenceError, ValidationError
from .units import HBAR

DEFAULT_PROBE_RATIO_MAX = 1e-3
SOLVER_RTOL = 1e-12
SOLVER_MAX_ITER = 200
CRITICAL_RTOL = 1e-9


class Regime(str, enum.Enum):
    EIT_REGION = "EIT_REGION"
    CRITICAL = "CRITICAL"
    SPLITTING_REGION = "SPLITTING_REGION"


@dataclass(frozen=True)
class SystemParams:
    """Cavity plus mechanical oscillator.

    Attributes
    ----------
    omega0 : float
        Cavity resonance [rad/s].
    L : float
        Cavity length [m].
    kappa : float
        Cavity amplitude decay rate [rad/s].
    mass : float
        Effective mirror mass [kg].
    omega_m : float
        Mechanical resonance [rad/s].
    gamma_m : float
        Mechanical damping rate [rad/s].
    """

    omega0: float
    L: float
    kappa: float
    mass: float
    omega_m: float
    gamma_m: float

    def __post_init__(self):
        for name in ("omega0", "L", "mass", "omega_m"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValidationError(f"{name} must be finite and > 0, got {value!r}")
        # zero damping is accepted so that the undamped limit can be probed
        for name in ("kappa", "gamma_m"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ValidationError(f"{name} must be finite and >= 0, got {value!r}")
        if self.kappa == 0 or self.gamma_m == 0:
            warnings.warn("undamped system: kappa or gamma_m is zero", RuntimeWarning, stacklevel=3)
        elif self.gamma_m >= self.kappa:
            warnings.warn(
                f"gamma_m ({self.gamma_m:g}) >= kappa ({self.kappa:g}); "
                "no narrow transparency window expected",
                RuntimeWarning,
                stacklevel=3,
            )

    @property
    def Q(self) -> float:
        """Mechanical quality factor omega_m / gamma_m."""
        if self.gamma_m == 0:
            return math.inf
        return self.omega_m / self.gamma_m

    @property
    def chi0(self) -> float:
        return coupling_constant(self.omega0, self.L)

    def replace(self, **changes) -> "SystemParams":
        values = {k: getattr(self, k) for k in ("omega0", "L", "kappa", "mass", "omega_m", "gamma_m")}
        values.update(changes)
        return SystemParams(**values)

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("omega0", "L", "kappa", "mass", "omega_m", "gamma_m")}


@dataclass(frozen=True)
class DriveParams:
    """Pump and probe lasers.

    ``delta`` is the probe-pump detuning omega_p - omega_c [rad/s]; powers in W.
    """

    omega_c: float
    power_c: float
    power_p: float = 0.0
    delta: float = 0.0
    probe_ratio_max: float = DEFAULT_PROBE_RATIO_MAX

    def __post_init__(self):
        if not (math.isfinite(self.omega_c) and self.omega_c > 0):
            raise ValidationError(f"omega_c must be finite and > 0, got {self.omega_c!r}")
        for name in ("power_c", "power_p"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ValidationError(f"{name} must be finite and >= 0, got {value!r}")
        if not math.isfinite(self.delta):
            raise ValidationError("delta must be finite")
        if self.omega_c + self.delta <= 0:
            raise ValidationError("probe frequency omega_c + delta must be positive")

    @property
    def omega_p(self) -> float:
        return self.omega_c + self.delta

    @property
    def weak_probe(self) -> bool:
        """True when the probe is weak enough for the linearized response."""
        return self.power_p <= self.probe_ratio_max * self.power_c

    def replace(self, **changes) -> "DriveParams":
        values = dict(
            omega_c=self.omega_c,
            power_c=self.power_c,
            power_p=self.power_p,
            delta=self.delta,
            probe_ratio_max=self.probe_ratio_max,
        )
        values.update(changes)
        return DriveParams(**values)

    def as_dict(self) -> dict:
        return dict(
            omega_c=self.omega_c,
            power_c=self.power_c,
            power_p=self.power_p,
            delta=self.delta,
            probe_ratio_max=self.probe_ratio_max,
        )


@dataclass(frozen=True)
class FixedDelta:
    """Effective detuning imposed directly."""

    Delta: float


@dataclass(frozen=True)
class SelfConsistent:
    """Effective detuning found from the bare detuning omega0 - omega_c.

    The bare detuning is carried explicitly rather than formed by subtracting
    two optical frequencies, which would cancel most significant digits.
    """

    bare_detuning: float
    branch: Optional[str] = None


OperatingMode = Union[FixedDelta, SelfConsistent]


@dataclass(frozen=True)
class OperatingPoint:
    Delta: float
    c0_sq: float
    beta: float
    chi0: float
    regime: Regime
    bare_detuning: Optional[float] = None
    residual: float = 0.0
    roots: tuple = field(default=())

    def decoupled(self) -> "OperatingPoint":
        """Same detuning with the optomechanical coupling switched off."""
        return OperatingPoint(
            Delta=self.Delta,
            c0_sq=0.0,
            beta=0.0,
            chi0=self.chi0,
            regime=Regime.EIT_REGION,
            bare_detuning=self.Delta,
        )


def field_amplitude_from_power(power, carrier_frequency, kappa):
    """Intracavity drive amplitude sqrt(2 kappa P / (hbar omega)) in 1/s."""
    if not carrier_frequency > 0:
        raise ValidationError(f"carrier frequency must be > 0, got {carrier_frequency!r}")
    if not kappa > 0:
        raise ValidationError(f"kappa must be > 0, got {kappa!r}")
    if power < 0:
        raise ValidationError(f"power must be >= 0, got {power!r}")
    return math.sqrt(2.0 * kappa * power / (HBAR * carrier_frequency))


def coupling_constant(omega0, L):
    """Radiation-pressure force per photon, hbar * omega0 / L [N]."""
    if not L > 0:
        raise ValidationError(f"cavity length must be > 0, got {L!r}")
    if omega0 < 0:
        raise ValidationError(f"omega0 must be >= 0, got {omega0!r}")
    if omega0 == 0:
        warnings.warn("omega0 = 0 gives zero optomechanical coupling", RuntimeWarning, stacklevel=2)
    return HBAR * omega0 / L


def pump_amplitude(sys: SystemParams, drive: DriveParams) -> float:
    if drive.power_c == 0:
        return 0.0
    return field_amplitude_from_power(drive.power_c, drive.omega_c, sys.kappa)


def probe_amplitude(sys: SystemParams, drive: DriveParams) -> float:
    if drive.power_p == 0:
        return 0.0
    return field_amplitude_from_power(drive.power_p, drive.omega_p, sys.kappa)


def frequency_shift_coefficient(sys: SystemParams) -> float:
    """Static cavity shift per intracavity photon, chi0^2 / (m hbar omega_m^2) [rad/s]."""
    return sys.chi0 ** 2 / (sys.mass * HBAR * sys.omega_m ** 2)


def optomechanical_rate(sys: SystemParams) -> float:
    """chi0^2 / (m hbar): couples photon number into the mirror's frequency-shift coordinate."""
    return sys.chi0 ** 2 / (sys.mass * HBAR)


def beta_from_photon_number(sys: SystemParams, c0_sq: float) -> float:
    return sys.chi0 ** 2 * c0_sq / (2.0 * sys.mass * HBAR * sys.omega_m)


def classify_regime(sys: SystemParams, op_or_beta, rtol: float = CRITICAL_RTOL) -> Regime:
    """Compare 4*beta with (kappa - gamma_m/2)^2.

    Accepts an OperatingPoint or a bare beta value.
    """
    beta = op_or_beta.beta if isinstance(op_or_beta, OperatingPoint) else float(op_or_beta)
    threshold = (sys.kappa - sys.gamma_m / 2.0) ** 2
    scale = max(threshold, 4.0 * beta)
    diff = 4.0 * beta - threshold
    if scale == 0 or abs(diff) <= rtol * scale:
        return Regime.CRITICAL
    return Regime.SPLITTING_REGION if diff > 0 else Regime.EIT_REGION


def _cubic_residual(n, eps2, kappa, bare, s):
    return n * (kappa ** 2 + (bare - s * n) ** 2) - eps2


def _cubic_real_roots(eps2, kappa, bare, s):
    coeffs = [s * s, -2.0 * s * bare, kappa ** 2 + bare ** 2, -eps2]
    if s == 0:
        return [eps2 / (kappa ** 2 + bare ** 2)]
    raw = np.roots(coeffs)
    scale = max(abs(bare) / s, eps2 / max(kappa ** 2 + bare ** 2, 1e-300), 1.0)
    roots = sorted(r.real for r in raw if abs(r.imag) <= 1e-7 * scale and r.real >= 0)
    polished = [_newton(r, eps2, kappa, bare, s)[0] for r in roots]
    distinct = []
    for r in sorted(polished):
        if not distinct or abs(r - distinct[-1]) > 1e-9 * max(abs(r), 1.0):
            distinct.append(r)
    return distinct


def _newton(n, eps2, kappa, bare, s, rtol=SOLVER_RTOL, max_iter=SOLVER_MAX_ITER):
    """Damped Newton on n (kappa^2 + (bare - s n)^2) = eps2."""
    f = _cubic_residual(n, eps2, kappa, bare, s)
    for it in range(max_iter):
        if abs(f) <= rtol * eps2:
            return n, it, True
        shifted = bare - s * n
        df = kappa ** 2 + shifted ** 2 - 2.0 * s * n * shifted
        if df == 0:
            break
        step = f / df
        lam = 1.0
        while True:
            trial = max(n - lam * step, 0.0)
            ft = _cubic_residual(trial, eps2, kappa, bare, s)
            if abs(ft) < abs(f) or lam < 1e-6:
                break
            lam *= 0.5
        if trial == n:
            break
        n, f = trial, ft
    return n, max_iter, abs(f) <= rtol * eps2 * 10


def solve_operating_point(
    sys: SystemParams,
    drive: DriveParams,
    mode: Optional[OperatingMode] = None,
    *,
    rtol: float = SOLVER_RTOL,
    max_iter: int = SOLVER_MAX_ITER,
) -> OperatingPoint:
    """Steady state of the pumped cavity.

    Parameters
    ----------
    sys, drive
        Physical parameters.
    mode
        ``FixedDelta(Delta)`` (default ``FixedDelta(sys.omega_m)``) takes the
        effective detuning as given. ``SelfConsistent(bare_detuning)`` solves

            n (kappa^2 + (bare - s n)^2) = eps_c^2,   s = chi0^2 / (m hbar omega_m^2)

        for the photon number n = |c0|^2 by continuation in pump amplitude
        from zero, so that Delta = bare - s n = bare - 2 beta / omega_m.

    Raises
    ------
    BistabilityError
        Three positive roots exist and ``mode.branch`` is not set. The roots
        are attached to the exception.
    ConvergenceError
        Newton iteration and polynomial fallback both failed.
    """
    if mode is None:
        mode = FixedDelta(sys.omega_m)
    chi0 = sys.chi0
    eps = pump_amplitude(sys, drive)
    eps2 = eps * eps

    if isinstance(mode, FixedDelta):
        Delta = float(mode.Delta)
        c0_sq = eps2 / (sys.kappa ** 2 + Delta ** 2) if eps2 else 0.0
        beta = beta_from_photon_number(sys, c0_sq)
        return OperatingPoint(
            Delta=Delta,
            c0_sq=c0_sq,
            beta=beta,
            chi0=chi0,
            regime=classify_regime(sys, beta),
            bare_detuning=Delta + 2.0 * beta / sys.omega_m,
        )

    if not isinstance(mode, SelfConsistent):
        raise ValidationError(f"unknown operating mode {mode!r}")

    bare = float(mode.bare_detuning)
    if eps2 == 0:
        return OperatingPoint(bare, 0.0, 0.0, chi0, classify_regime(sys, 0.0), bare_detuning=bare)

    s = frequency_shift_coefficient(sys)
    kappa = sys.kappa

    # continuation in eps^2 from the undriven cavity
    n = 0.0
    converged = True
    n_stages = 8
    for k in range(1, n_stages + 1):
        target = eps2 * k / n_stages
        n, _, converged = _newton(n, target, kappa, bare, s, rtol=rtol, max_iter=max_iter)
    roots = _cubic_real_roots(eps2, kappa, bare, s)
    if not converged:
        if not roots:
            res = abs(_cubic_residual(n, eps2, kappa, bare, s)) / eps2
            raise ConvergenceError(f"steady state did not converge (relative residual {res:.3e})", res)
        n = min(roots, key=lambda r: abs(r - n))

    if len(roots) >= 3:
        branch = mode.branch
        if branch is None:
            listing = ", ".join(f"{r:.12g}" for r in roots)
            raise BistabilityError(
                f"bistable steady state: photon-number roots [{listing}]; "
                "pass branch='continuation', 'lower', 'middle' or 'upper'",
                roots,
            )
        pick = {"lower": 0, "middle": 1, "upper": -1}
        if branch == "continuation":
            n = min(roots, key=lambda r: abs(r - n))
        elif branch in pick:
            n = roots[pick[branch]]
        else:
            raise ValidationError(f"unknown branch {branch!r}")

    residual = abs(_cubic_residual(n, eps2, kappa, bare, s)) / eps2
    if residual > max(rtol * 1e3, 1e-9):
        raise ConvergenceError(f"steady state residual {residual:.3e} above tolerance", residual)
    Delta = bare - s * n
    beta = beta_from_photon_number(sys, n)
    return OperatingPoint(
        Delta=Delta,
        c0_sq=n,
        beta=beta,
        chi0=chi0,
        regime=classify_regime(sys, beta),
        bare_detuning=bare,
        residual=residual,
        roots=tuple(roots),
    )


def pump_amplitude_complex(sys: SystemParams, drive: DriveParams, op: OperatingPoint) -> complex:
    """c0 = eps_c / (kappa + i Delta)."""
    return pump_amplitude(sys, drive) / complex(sys.kappa, op.Delta)


def critical_power(sys: SystemParams, Delta: Optional[float] = None, omega_c: Optional[float] = None) -> float:
    """Pump power [W] at which the two response poles coincide.

    Setting 4 beta = (kappa - gamma_m/2)^2 with beta proportional to the
    photon number gives a drive-independent result

        P = m hbar^2 omega_c omega_m (kappa^2 + Delta^2) (kappa - gamma_m/2)^2 / (4 kappa chi0^2).

    ``Delta`` defaults to omega_m and ``omega_c`` to omega0.
    """
    if Delta is None:
        Delta = sys.omega_m
    if omega_c is None:
        omega_c = sys.omega0
    if not sys.kappa > 0:
        raise ValidationError("critical power needs kappa > 0")
    return (
        sys.mass * HBAR ** 2 * omega_c * sys.omega_m
        * (sys.kappa ** 2 + Delta ** 2)
        * (sys.kappa - sys.gamma_m / 2.0) ** 2
        / (4.0 * sys.kappa * sys.chi0 ** 2)
    )


@dataclass(frozen=True)
class StabilityReport:
    stable: bool
    eigenvalues: np.ndarray
    max_real_part: float

    def __bool__(self):
        return self.stable


def drift_matrix(sys: SystemParams, drive: DriveParams, op: OperatingPoint) -> np.ndarray:
    """Jacobian of the mean-value equations at the operating point.

    Coordinates are (Q, P, Re c, Im c) with Q = chi0 q / hbar and
    P = chi0 p / (hbar m), a diagonal rescaling of (q, p) that leaves the
    spectrum unchanged.
    """
    c0 = pump_amplitude_complex(sys, drive, op) if drive.power_c > 0 else 0j
    g = optomechanical_rate(sys)
    D = op.Delta
    return np.array(
        [
            [0.0, 1.0, 0.0, 0.0],
            [-sys.omega_m ** 2, -sys.gamma_m, 2.0 * g * c0.real, 2.0 * g * c0.imag],
            [-c0.imag, 0.0, -sys.kappa, D],
            [c0.real, 0.0, -D, -sys.kappa],
        ]
    )


def stability_check(sys: SystemParams, drive: DriveParams, op: OperatingPoint, rtol: float = 1e-12) -> StabilityReport:
    """Stable only if every eigenvalue has a strictly negative real part.

    Marginal eigenvalues (zero real part within ``rtol`` of the spectral
    radius) count as unstable.
    """
    eig = np.linalg.eigvals(drift_matrix(sys, drive, op))
    radius = float(np.max(np.abs(eig))) if eig.size else 0.0
    max_re = float(np.max(eig.real))
    stable = max_re < -rtol * max(radius, 1e-300)
    return StabilityReport(stable=stable, eigenvalues=eig, max_real_part=max_re)


# parameter presets ---------------------------------------------------------

EXPERIMENT_WAVELENGTH_NM = 1064.0


def experimental_system() -> SystemParams:
    """Experimental parameter set: 1064 nm, 25 mm, 145 ng, kappa/2pi = 215 kHz,
    omega_m/2pi = 947 kHz, gamma_m/2pi = 141 Hz. The cavity is taken resonant
    with the laser wavelength."""
    return SystemParams(
        omega0=units.wavelength_to_angular_frequency(units.nm_to_m(EXPERIMENT_WAVELENGTH_NM)),
        L=units.mm_to_m(25.0),
        kappa=units.khz_to_rad_s(215.0),
        mass=units.ng_to_kg(145.0),
        omega_m=units.khz_to_rad_s(947.0),
        gamma_m=units.hz_to_rad_s(141.0),
    )


def experimental_drive(power_mw: float = 1.0, probe_ratio: float = DEFAULT_PROBE_RATIO_MAX, delta: float = 0.0) -> DriveParams:
    power_c = units.mw_to_w(power_mw)
    return DriveParams(
        omega_c=units.wavelength_to_angular_frequency(units.nm_to_m(EXPERIMENT_WAVELENGTH_NM)),
        power_c=power_c,
        power_p=probe_ratio * power_c,
        delta=delta,
    )


SCALED_OMEGA0 = 1.0e3


def scaled_system(omega_m: float = 1.0, kappa: float = 0.1, gamma_m: float = 0.005) -> SystemParams:
    """Dimensionless set used for time-domain cross-checks.

    omega0 = L = 1e3 and mass = hbar make chi0^2/(m hbar) = 1, so photon
    number and mirror shift are both of order one.
    """
    return SystemParams(
        omega0=SCALED_OMEGA0,
        L=SCALED_OMEGA0,
        kappa=kappa,
        mass=HBAR,
        omega_m=omega_m,
        gamma_m=gamma_m,
    )


def scaled_drive(sys: SystemParams, power_fraction: float, probe_ratio: float = DEFAULT_PROBE_RATIO_MAX,
                 delta: float = 0.0) -> DriveParams:
    """Drive at ``power_fraction`` times the critical power with omega_c = omega0 - omega_m."""
    omega_c = sys.omega0 - sys.omega_m
    critical = critical_power(sys, omega_c=omega_c)
    pc = power_fraction * critical
    # pump off: keep a probe of the size it would have at the critical power
    pp = probe_ratio * (pc if pc > 0 else critical)
    return DriveParams(omega_c=omega_c, power_c=pc, power_p=pp, delta=delta)


def bisect_regime_flip(sys: SystemParams, drive: DriveParams, lo: float, hi: float,
                       mode: Optional[OperatingMode] = None, rtol: float = 1e-6,
                       max_iter: int = 200) -> tuple:
    """Bracket the pump power where the regime leaves EIT_REGION.

    ``lo`` must classify as EIT_REGION and ``hi`` as SPLITTING_REGION. Returns
    (lo, hi) with (hi - lo) <= rtol * hi.
    """

    def regime_at(power):
        return solve_operating_point(sys, drive.replace(power_c=power, power_p=0.0), mode).regime

    if regime_at(lo) is not Regime.EIT_REGION or regime_at(hi) is not Regime.SPLITTING_REGION:
        raise ValidationError("bisection bounds do not bracket the EIT/splitting boundary")
    for _ in range(max_iter):
        if hi - lo <= rtol * hi:
            break
        mid = 0.5 * (lo + hi)
        r = regime_at(mid)
        if r is Regime.CRITICAL:
            return mid, mid
        if r is Regime.EIT_REGION:
            lo = mid
        else:
            hi = mid
    return lo, hi
