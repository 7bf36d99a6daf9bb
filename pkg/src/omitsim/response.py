"""Probe response of the pumped cavity: exact and sideband-resolved forms,
the two-pole decomposition, and spectroscopic metrics of the transparency
window.

Conventions: ``delta = omega_p - omega_c``; ``x = delta - omega_m`` is the
detuning from the line centre. The response eps_T is the ratio of the
probe-frequency output to the probe input, equal to 2 on bare resonance.
"""
from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import DegeneratePoleError, PoleProximityError, ResolutionError, ValidationError
from .model import OperatingPoint, Regime, SystemParams, classify_regime

__all__ = [
    "ComplexResponse", "PoleDecomposition", "Spectrum", "DipMetrics", "Evaluator",
    "Classification", "response_no_coupling", "response_exact", "response_sideband",
    "poles", "residues", "quadratures", "compute_spectrum", "dip_metrics",
    "classify_regime", "default_grid", "dip_value_closed_form", "center_slope_closed_form",
]

DEGENERATE_RTOL = 1e-6
POLE_PROXIMITY_RTOL = 1e-30
MIN_POINTS_IN_NARROW = 8


class Evaluator(str, enum.Enum):
    EXACT = "exact"
    SIDEBAND = "sideband"


class Classification(str, enum.Enum):
    NO_DIP = "NO_DIP"
    EIT_DIP = "EIT_DIP"
    SPLIT_DOUBLET = "SPLIT_DOUBLET"


@dataclass(frozen=True)
class ComplexResponse:
    """eps_T, scalar or array. The quadratures are views of ``value``."""

    value: Union[complex, np.ndarray]

    @property
    def vp(self):
        """Absorptive quadrature."""
        return np.real(self.value)

    @property
    def vtp(self):
        """Dispersive quadrature."""
        return np.imag(self.value)

    def __len__(self):
        return np.size(self.value)


def quadratures(r):
    """(Re eps_T, Im eps_T) of a ComplexResponse or a bare complex value."""
    value = r.value if isinstance(r, ComplexResponse) else r
    return np.real(value), np.imag(value)


def response_no_coupling(sys: SystemParams, omega_p=None, *, detuning=None) -> ComplexResponse:
    """Empty-cavity response 2 kappa / (kappa - i (omega_p - omega0)).

    Pass ``detuning = omega_p - omega0`` directly to avoid cancelling two
    optical frequencies.
    """
    if detuning is None:
        if omega_p is None:
            raise ValidationError("give omega_p or detuning")
        detuning = np.asarray(omega_p, dtype=float) - sys.omega0
    detuning = np.asarray(detuning, dtype=float)
    value = 2.0 * sys.kappa / (sys.kappa - 1j * detuning)
    return ComplexResponse(value[()] if value.ndim == 0 else value)


def _mech_factor(sys, delta):
    return delta ** 2 - sys.omega_m ** 2 + 1j * sys.gamma_m * delta


def response_exact(sys: SystemParams, op: OperatingPoint, delta) -> ComplexResponse:
    """Linearized probe response without the sideband-resolved approximation.

        eps_T = 2 kappa [M(delta) (kappa - i (Delta + delta)) - 2 i omega_m beta] / d(delta)
        d(delta) = M(delta) [(kappa - i delta)^2 + Delta^2] + 4 Delta omega_m beta
        M(delta) = delta^2 - omega_m^2 + i gamma_m delta
    """
    delta = np.asarray(delta, dtype=float)
    kappa, wm, beta, Delta = sys.kappa, sys.omega_m, op.beta, op.Delta
    m = _mech_factor(sys, delta)
    d = m * ((kappa - 1j * delta) ** 2 + Delta ** 2) + 4.0 * Delta * wm * beta
    ad = np.abs(delta)
    scale = (ad ** 2 + wm ** 2 + sys.gamma_m * ad) * (kappa ** 2 + ad ** 2 + Delta ** 2) + 4.0 * abs(Delta) * wm * beta
    if np.any(np.abs(d) <= POLE_PROXIMITY_RTOL * scale):
        raise PoleProximityError("probe detuning sits on an undamped pole of the response")
    value = 2.0 * kappa * (m * (kappa - 1j * (Delta + delta)) - 2j * wm * beta) / d
    return ComplexResponse(value[()] if value.ndim == 0 else value)


def response_sideband(sys: SystemParams, op: OperatingPoint, x) -> ComplexResponse:
    """Sideband-resolved form 2 kappa / (kappa - i x + beta / (gamma_m/2 - i x))."""
    x = np.asarray(x, dtype=float)
    kappa, half_gamma = sys.kappa, sys.gamma_m / 2.0
    # multiplied through by (gamma_m/2 - i x) so that x = 0 with gamma_m = 0 is finite
    num = 2.0 * kappa * (half_gamma - 1j * x)
    den = (kappa - 1j * x) * (half_gamma - 1j * x) + op.beta
    value = num / den
    return ComplexResponse(value[()] if value.ndim == 0 else value)


@dataclass(frozen=True)
class PoleDecomposition:
    x_plus: complex
    x_minus: complex
    A_plus: Optional[complex] = None
    A_minus: Optional[complex] = None

    @property
    def splitting(self) -> float:
        return abs(self.x_plus - self.x_minus)

    def parts(self, x):
        """Per-pole contributions A/(x - x_pole), plus and minus."""
        if self.A_plus is None:
            raise ValidationError("residues not computed")
        x = np.asarray(x, dtype=float)
        return self.A_plus / (x - self.x_plus), self.A_minus / (x - self.x_minus)


def poles(sys: SystemParams, op: OperatingPoint) -> PoleDecomposition:
    """Roots of (kappa - i x)(gamma_m/2 - i x) + beta = 0.

    x_pm = [-i (kappa + gamma_m/2) +/- sqrt(4 beta - (kappa - gamma_m/2)^2)] / 2
    with the principal square root. Below the critical power x_plus is the
    narrow pole; above it the poles are mirror images, x_plus = -conj(x_minus).
    """
    kappa, half_gamma = sys.kappa, sys.gamma_m / 2.0
    root = cmath.sqrt(complex(4.0 * op.beta - (kappa - half_gamma) ** 2, 0.0))
    centre = -1j * (kappa + half_gamma)
    return PoleDecomposition(x_plus=(centre + root) / 2.0, x_minus=(centre - root) / 2.0)


def residues(sys: SystemParams, op: OperatingPoint, rtol: float = DEGENERATE_RTOL) -> PoleDecomposition:
    """Poles and residues A_pm = -/+ 2 kappa (gamma_m/2 - i x_pm) / (x_plus - x_minus).

    Raises DegeneratePoleError at (or within ``rtol`` of) the critical point,
    where the partial-fraction split does not exist; evaluate
    ``response_sideband`` directly there.
    """
    p = poles(sys, op)
    width = sys.kappa + sys.gamma_m / 2.0
    gap = p.x_plus - p.x_minus
    if abs(gap) <= rtol * width:
        raise DegeneratePoleError(
            "poles are degenerate at the critical pump power; use response_sideband "
            "instead of the pole decomposition"
        )
    half_gamma = sys.gamma_m / 2.0
    a_plus = -2.0 * sys.kappa * (half_gamma - 1j * p.x_plus) / gap
    a_minus = 2.0 * sys.kappa * (half_gamma - 1j * p.x_minus) / gap
    return PoleDecomposition(p.x_plus, p.x_minus, a_plus, a_minus)


def dip_value_closed_form(sys: SystemParams, beta: float) -> float:
    """Sideband-resolved absorptive response at x = 0: 2 kappa gamma_m / (kappa gamma_m + 2 beta)."""
    return 2.0 * sys.kappa * sys.gamma_m / (sys.kappa * sys.gamma_m + 2.0 * beta)


def center_slope_closed_form(sys: SystemParams, beta: float) -> float:
    """d Im(eps_T)/dx at x = 0 for the sideband-resolved form.

    Equals 2 kappa (gamma_m^2/4 - beta) / (kappa gamma_m/2 + beta)^2; at
    beta = 0 this is 2 / kappa.
    """
    hg = sys.gamma_m / 2.0
    return 2.0 * sys.kappa * (hg ** 2 - beta) / (sys.kappa * hg + beta) ** 2


def default_grid(sys: SystemParams, n: int = 4001, span: float = 0.5) -> np.ndarray:
    """Uniform x grid over [-span, span] * omega_m."""
    return np.linspace(-span, span, n) * sys.omega_m


def _evaluate(sys, op, x, evaluator):
    evaluator = Evaluator(evaluator)
    if evaluator is Evaluator.SIDEBAND:
        return response_sideband(sys, op, x).value
    return response_exact(sys, op, x + sys.omega_m).value


@dataclass(frozen=True)
class Spectrum:
    grid: np.ndarray
    total: ComplexResponse
    omega_m: float
    evaluator: Evaluator
    pole_plus_part: Optional[np.ndarray] = None
    pole_minus_part: Optional[np.ndarray] = None
    baseline_no_coupling: Optional[np.ndarray] = None

    @property
    def x_over_omega_m(self) -> np.ndarray:
        return self.grid / self.omega_m

    @property
    def delta(self) -> np.ndarray:
        return self.grid + self.omega_m

    def __len__(self):
        return self.grid.size


def compute_spectrum(
    sys: SystemParams,
    op: OperatingPoint,
    grid,
    evaluator: Union[Evaluator, str] = Evaluator.SIDEBAND,
    include_baseline: bool = False,
    include_pole_parts: bool = False,
) -> Spectrum:
    """Response over a strictly increasing grid of x = delta - omega_m.

    Pole parts always come from the two-pole decomposition of the
    sideband-resolved form; with the sideband evaluator they sum to the total
    exactly. The baseline is the same evaluator with the coupling removed.
    """
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    if grid.ndim != 1 or grid.size == 0:
        raise ValidationError("grid must be a non-empty 1-D array")
    if grid.size > 1 and not np.all(np.diff(grid) > 0):
        raise ValidationError("grid must be strictly increasing")
    evaluator = Evaluator(evaluator)
    total = _evaluate(sys, op, grid, evaluator)
    plus = minus = base = None
    if include_pole_parts:
        plus, minus = residues(sys, op).parts(grid)
    if include_baseline:
        base = _evaluate(sys, op.decoupled(), grid, evaluator)
    return Spectrum(
        grid=grid,
        total=ComplexResponse(total),
        omega_m=sys.omega_m,
        evaluator=evaluator,
        pole_plus_part=plus,
        pole_minus_part=minus,
        baseline_no_coupling=base,
    )


@dataclass(frozen=True)
class DipMetrics:
    dip_value: float
    narrow_hwhm: float
    narrow_hwhm_numeric: float
    broad_hwhm: float
    leading_order_width: float
    dispersion_slope_at_center: float
    classification: Classification
    regime: Regime


def _half_width(x, feature):
    """Half width at half maximum of a single peak by linear interpolation."""
    i_peak = int(np.argmax(feature))
    half = feature[i_peak] / 2.0
    if not feature[i_peak] > 0:
        return math.nan
    left = right = math.nan
    for i in range(i_peak, 0, -1):
        if feature[i - 1] < half <= feature[i]:
            t = (half - feature[i - 1]) / (feature[i] - feature[i - 1])
            left = x[i - 1] + t * (x[i] - x[i - 1])
            break
    for i in range(i_peak, x.size - 1):
        if feature[i + 1] < half <= feature[i]:
            t = (feature[i] - half) / (feature[i] - feature[i + 1])
            right = x[i] + t * (x[i + 1] - x[i])
            break
    return (right - left) / 2.0


def _center_index(grid):
    i0 = int(np.argmin(np.abs(grid)))
    if grid.size > 1:
        h = np.min(np.diff(grid))
        if abs(grid[i0]) > 1e-9 * h:
            raise ResolutionError("grid must contain x = 0 for centre metrics")
    return i0


def _centered_slope(grid, f, i0):
    if i0 < 2 or i0 > grid.size - 3:
        raise ResolutionError("need two grid points on each side of x = 0 for the dispersion slope")
    local = grid[i0 - 2:i0 + 3]
    steps = np.diff(local)
    h = steps.mean()
    if np.max(np.abs(steps - h)) > 1e-6 * h:
        raise ResolutionError("dispersion slope needs a locally uniform grid around x = 0")
    return (-f[i0 + 2] + 8.0 * f[i0 + 1] - 8.0 * f[i0 - 1] + f[i0 - 2]) / (12.0 * h)


def dip_metrics(spectrum: Spectrum, sys: SystemParams, op: OperatingPoint) -> DipMetrics:
    """Depth, widths and centre dispersion of the transparency feature.

    The narrow half width is reported analytically as |Im x_plus| and
    numerically as the half width of (baseline - total) absorptive response,
    measured within |x| <= 10 |Im x_plus|.

    Raises
    ------
    ResolutionError
        Fewer than 8 grid points inside |x| <= |Im x_plus| (when coupled), or
        x = 0 missing from the grid.
    """
    grid = spectrum.grid
    p = poles(sys, op)
    narrow = abs(p.x_plus.imag)
    broad = abs(p.x_minus.imag)
    regime = classify_regime(sys, op)
    coupled = op.beta > 0

    if coupled:
        inside = int(np.count_nonzero(np.abs(grid) <= narrow))
        if inside < MIN_POINTS_IN_NARROW:
            needed = 2.0 * narrow / MIN_POINTS_IN_NARROW
            raise ResolutionError(
                f"narrow feature under-resolved: {inside} points within |x| <= {narrow:.6g} rad/s; "
                f"use a grid step <= {needed:.6g} rad/s"
            )

    i0 = _center_index(grid)
    vp = spectrum.total.vp
    vtp = spectrum.total.vtp
    dip = float(vp[i0])
    slope = float(_centered_slope(grid, vtp, i0))

    numeric = math.nan
    if coupled:
        base = spectrum.baseline_no_coupling
        if base is None:
            base = _evaluate(sys, op.decoupled(), grid, spectrum.evaluator)
        window = np.abs(grid) <= 10.0 * narrow
        numeric = _half_width(grid[window], (np.real(base) - vp)[window])

    if not coupled:
        cls = Classification.NO_DIP
    elif regime is Regime.SPLITTING_REGION:
        cls = Classification.SPLIT_DOUBLET
    else:
        cls = Classification.EIT_DIP

    return DipMetrics(
        dip_value=dip,
        narrow_hwhm=narrow,
        narrow_hwhm_numeric=float(numeric),
        broad_hwhm=broad,
        leading_order_width=sys.gamma_m / 2.0 + op.beta / sys.kappa,
        dispersion_slope_at_center=slope,
        classification=cls,
        regime=regime,
    )
