"""Time-domain cross-check of the probe response.

Integrates the nonlinear mean-value equations with pump and probe both on,
then reads the probe-frequency component of the intracavity field off the
periodic steady state. Nothing here uses the closed-form response.

The integrator works in rescaled mirror coordinates

    Q = chi0 q / hbar          (cavity frequency shift, rad/s)
    P = chi0 p / (hbar m)      (its time derivative, rad/s^2)

so that the state is of order one in either parameter set:

    Q' = P
    P' = -omega_m^2 Q + g |c|^2 - gamma_m P,       g = chi0^2 / (m hbar)
    c' = -[kappa + i (bare - Q)] c + eps_c + eps_p exp(-i (delta t + phase))

with ``bare = omega0 - omega_c``. Trajectories are reported in SI (q, p).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .errors import IntegrationError, UnstableOperatingPointError, ValidationError, WindowError
from .model import (
    DriveParams,
    SelfConsistent,
    SystemParams,
    optomechanical_rate,
    probe_amplitude,
    pump_amplitude,
    solve_operating_point,
    stability_check,
)
from .response import ComplexResponse
from .units import HBAR

RTOL = 1e-9
ATOL = 1e-12
N_PERIODS = 32
SAMPLES_PER_PERIOD = 64
CYCLE_RESIDUAL_TOL = 1e-6
MAX_EXTENSIONS = 3


@dataclass(frozen=True)
class MeanState:
    q: float
    p: float
    c_re: float
    c_im: float

    @property
    def c(self) -> complex:
        return complex(self.c_re, self.c_im)

    @classmethod
    def rest(cls) -> "MeanState":
        return cls(0.0, 0.0, 0.0, 0.0)


@dataclass
class Trajectory:
    """Sampled mean-value trajectory.

    ``states`` has shape (n, 4) with columns q [m], p [kg m/s], Re c, Im c.
    ``t_start`` is where integration began, which may precede ``times[0]``
    when only a late window was kept.
    """

    times: np.ndarray
    states: np.ndarray
    sys: SystemParams
    drive: DriveParams
    bare_detuning: float
    probe_phase: float = 0.0
    t_start: float = 0.0
    dense: Optional[object] = field(default=None, repr=False)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        if self.times.size < 2 or np.any(np.diff(self.times) <= 0):
            raise ValidationError("trajectory needs at least two strictly increasing times")
        if self.states.shape != (self.times.size, 4):
            raise ValidationError("states must have shape (len(times), 4)")

    @property
    def c(self) -> np.ndarray:
        return self.states[:, 2] + 1j * self.states[:, 3]

    def state(self, i: int) -> MeanState:
        return MeanState(*map(float, self.states[i]))

    def c_at(self, t) -> np.ndarray:
        """Cavity amplitude at arbitrary times (dense output if available)."""
        t = np.asarray(t, dtype=float)
        if self.dense is not None:
            y = self.dense(t)
            return y[2] + 1j * y[3]
        return np.interp(t, self.times, self.states[:, 2]) + 1j * np.interp(t, self.times, self.states[:, 3])


@dataclass(frozen=True)
class HarmonicExtract:
    amp_dc: complex
    amp_at_plus_delta: complex
    amp_at_minus_delta: complex
    window: tuple


def _scales(sys):
    """Factors taking SI (q, p) to (Q, P)."""
    k = sys.chi0 / HBAR
    return k, k / sys.mass


def _to_scaled(sys, state: MeanState):
    kq, kp = _scales(sys)
    return np.array([kq * state.q, kp * state.p, state.c_re, state.c_im])


def _to_si(sys, y):
    """y has leading axis of length 4."""
    kq, kp = _scales(sys)
    out = np.array(y, dtype=float, copy=True)
    out[0] = out[0] / kq
    out[1] = out[1] / kp
    return out


def _make_rhs(sys, eps_c, bare, deltas, probe_terms):
    """Right-hand side for a batch of independent systems sharing the pump."""
    wm2 = sys.omega_m ** 2
    gamma = sys.gamma_m
    kappa = sys.kappa
    g = optomechanical_rate(sys)
    n = deltas.size
    out = np.empty(4 * n)

    def rhs(t, y):
        Q = y[:n]
        P = y[n:2 * n]
        cr = y[2 * n:3 * n]
        ci = y[3 * n:]
        c = cr + 1j * ci
        dc = -(kappa + 1j * (bare - Q)) * c + eps_c + probe_terms * np.exp(-1j * deltas * t)
        out[:n] = P
        out[n:2 * n] = -wm2 * Q + g * (cr * cr + ci * ci) - gamma * P
        out[2 * n:3 * n] = dc.real
        out[3 * n:] = dc.imag
        return out

    return rhs


def _fastest_rate(sys, bare, deltas):
    return max(sys.kappa, sys.omega_m, abs(bare), float(np.max(np.abs(deltas))) if deltas.size else 0.0)


def _solve(rhs, t_span, y0, rtol, atol, max_step, t_eval=None, dense_output=False):
    sol = solve_ivp(
        rhs, t_span, y0, method="RK45", rtol=rtol, atol=atol, max_step=max_step,
        t_eval=t_eval, dense_output=dense_output,
    )
    if sol.status != 0 or not np.all(np.isfinite(sol.y)):
        good = np.all(np.isfinite(sol.y), axis=0)
        last = int(np.nonzero(good)[0][-1]) if np.any(good) else None
        raise IntegrationError(
            f"integration failed: {sol.message}",
            last_state=None if last is None else sol.y[:, last].copy(),
            last_time=None if last is None else float(sol.t[last]),
        )
    return sol


def _check_stable(sys, drive, bare, force):
    if force or drive.power_c == 0:
        return
    op = solve_operating_point(sys, drive, SelfConsistent(bare, branch="continuation"))
    report = stability_check(sys, drive, op)
    if not report.stable:
        raise UnstableOperatingPointError(
            f"steady state is unstable (max Re eigenvalue {report.max_real_part:.6g}); pass force=True to integrate anyway"
        )


def integrate_mean_values(
    sys: SystemParams,
    drive: DriveParams,
    initial: Optional[MeanState] = None,
    t_end: float = 1.0,
    *,
    rtol: float = RTOL,
    atol: float = ATOL,
    bare_detuning: Optional[float] = None,
    probe_phase: float = 0.0,
    t_eval: Optional[Sequence[float]] = None,
    dense_output: bool = False,
    force: bool = False,
) -> Trajectory:
    """Integrate the mean-value equations from t = 0 to ``t_end``.

    Parameters
    ----------
    initial
        Starting state, SI units; defaults to the empty cavity with the mirror at rest.
    bare_detuning
        omega0 - omega_c [rad/s]. Defaults to the difference of the two
        frequencies; pass it explicitly when they are optical.
    probe_phase
        Phase offset of the probe drive, exp(-i (delta t + probe_phase)).
    force
        Integrate even if the linearized steady state is unstable.

    Uses an adaptive Dormand-Prince 5(4) pair. Raises IntegrationError with
    the last finite state on failure.
    """
    if not t_end > 0:
        raise ValidationError("t_end must be positive")
    if bare_detuning is None:
        bare_detuning = sys.omega0 - drive.omega_c
    _check_stable(sys, drive, bare_detuning, force)
    initial = initial or MeanState.rest()
    deltas = np.array([drive.delta])
    probe = probe_amplitude(sys, drive) * np.exp(-1j * probe_phase)
    rhs = _make_rhs(sys, pump_amplitude(sys, drive), bare_detuning, deltas, np.array([probe]))
    max_step = math.pi / (4.0 * _fastest_rate(sys, bare_detuning, deltas))
    sol = _solve(rhs, (0.0, t_end), _to_scaled(sys, initial), rtol, atol, max_step,
                 t_eval=None if t_eval is None else np.asarray(t_eval, dtype=float),
                 dense_output=dense_output)
    dense = None
    if dense_output:
        raw = sol.sol
        dense = lambda t: _to_si(sys, raw(t))  # noqa: E731
    return Trajectory(
        times=sol.t,
        states=_to_si(sys, sol.y).T,
        sys=sys,
        drive=drive,
        bare_detuning=bare_detuning,
        probe_phase=probe_phase,
        dense=dense,
    )


def extract_harmonics(
    traj: Trajectory,
    delta: float,
    n_periods: int = N_PERIODS,
    transient: Optional[float] = None,
    samples_per_period: int = SAMPLES_PER_PERIOD,
) -> HarmonicExtract:
    """Project the cavity amplitude onto 1, exp(-i delta t) and exp(+i delta t).

    The window is the last ``n_periods`` whole periods of 2 pi / delta and must
    start at least ``transient`` (default 10 / gamma_m) after integration
    began. Trapezoidal quadrature on a uniform resampling when a dense
    interpolant is attached, otherwise on the stored samples.
    """
    if delta == 0:
        raise ValidationError("delta must be non-zero")
    if n_periods < 1:
        raise ValidationError("n_periods must be >= 1")
    if transient is None:
        transient = 10.0 / traj.sys.gamma_m if traj.sys.gamma_m > 0 else math.inf
    period = 2.0 * math.pi / abs(delta)
    t1 = float(traj.times[-1])
    t0 = t1 - n_periods * period
    if t0 < traj.t_start + transient or t0 < traj.times[0] - 1e-9 * period:
        available = t1 - max(traj.t_start + transient, traj.times[0])
        raise WindowError(
            f"need {n_periods} probe periods ({n_periods * period:.6g} s) after a transient of "
            f"{transient:.6g} s; only {max(available, 0.0):.6g} s available"
        )
    if traj.dense is not None:
        t = np.linspace(t0, t1, n_periods * samples_per_period + 1)
        c = traj.c_at(t)
    else:
        keep = traj.times >= t0 - 1e-9 * period
        t = traj.times[keep]
        c = traj.c[keep]
        if t[0] > t0 + 1e-9 * period:
            t = np.concatenate([[t0], t])
            c = np.concatenate([[traj.c_at(t0)], c])
        t[0] = max(t[0], t0)
    span = t[-1] - t[0]
    phase = np.exp(1j * delta * t)
    return HarmonicExtract(
        amp_dc=complex(np.trapezoid(c, t) / span),
        amp_at_plus_delta=complex(np.trapezoid(c * phase, t) / span),
        amp_at_minus_delta=complex(np.trapezoid(c / phase, t) / span),
        window=(float(t[0]), float(t[-1])),
    )


@dataclass
class OracleSweep:
    deltas: np.ndarray
    responses: np.ndarray
    harmonics: list
    cycle_residual: np.ndarray
    t_end: float

    def response(self, i) -> ComplexResponse:
        return ComplexResponse(complex(self.responses[i]))


def oracle_sweep(
    sys: SystemParams,
    drive: DriveParams,
    deltas,
    *,
    bare_detuning: Optional[float] = None,
    n_periods: int = N_PERIODS,
    transient: Optional[float] = None,
    rtol: float = RTOL,
    atol: float = ATOL,
    probe_phase: float = 0.0,
    probe_scale: float = 1.0,
    samples_per_period: int = SAMPLES_PER_PERIOD,
    residual_tol: float = CYCLE_RESIDUAL_TOL,
    max_extensions: int = MAX_EXTENSIONS,
    force: bool = False,
) -> OracleSweep:
    """Probe response at each detuning from a single batched integration.

    Every detuning is an independent copy of the four mean-value equations;
    batching only shares the time stepping. The run starts from the empty
    cavity at rest, discards ``transient`` (default 10 / gamma_m), keeps
    ``n_periods`` probe periods per detuning, and extends the transient while
    the cycle-to-cycle change of the cavity amplitude exceeds ``residual_tol``.

    eps_T = 2 kappa * (exp(-i delta t) amplitude) / (complex probe amplitude).
    """
    deltas = np.atleast_1d(np.asarray(deltas, dtype=float))
    if deltas.size == 0 or np.any(deltas == 0):
        raise ValidationError("deltas must be non-empty and non-zero")
    if bare_detuning is None:
        bare_detuning = sys.omega0 - drive.omega_c
    if drive.power_c > 0 and not drive.weak_probe:
        warnings.warn("probe is not weak compared with the pump; linear response may not apply",
                      RuntimeWarning, stacklevel=2)
    _check_stable(sys, drive, bare_detuning, force)
    if transient is None:
        transient = 10.0 / sys.gamma_m if sys.gamma_m > 0 else math.inf
    if not math.isfinite(transient):
        raise WindowError("undamped mechanics: no finite transient; pass transient explicitly")

    eps_p = np.array([probe_amplitude(sys, drive.replace(delta=float(d))) for d in deltas]) * probe_scale
    probe = eps_p * np.exp(-1j * probe_phase)
    rhs = _make_rhs(sys, pump_amplitude(sys, drive), bare_detuning, deltas, probe)
    max_step = math.pi / (4.0 * _fastest_rate(sys, bare_detuning, deltas))
    periods = 2.0 * math.pi / np.abs(deltas)
    n = deltas.size

    y0 = np.zeros(4 * n)
    t_settle = transient
    t_now = 0.0
    for attempt in range(max_extensions + 1):
        # settle without storing anything, then sample the measurement window
        sol = _solve(rhs, (t_now, t_settle), y0, rtol, atol, max_step)
        y0 = sol.y[:, -1]
        t_now = t_settle
        span = n_periods * periods
        t_end = t_now + float(np.max(span + periods))
        grids = [np.linspace(t_end - s - p, t_end, (n_periods + 1) * samples_per_period + 1)
                 for s, p in zip(span, periods)]
        for g in grids:
            # the longest window starts at t_now up to rounding
            g[0] = max(g[0], t_now)
        t_all, inverse = np.unique(np.concatenate(grids), return_inverse=True)
        sol = _solve(rhs, (t_now, t_end), y0, rtol, atol, max_step, t_eval=t_all)
        Y = sol.y
        residual = np.empty(n)
        per_grid = []
        offset = 0
        for b, grid in enumerate(grids):
            idx = inverse[offset:offset + grid.size]
            offset += grid.size
            c = Y[2 * n + b, idx] + 1j * Y[3 * n + b, idx]
            per_grid.append((grid, idx))
            last = c[-samples_per_period - 1:]
            prev = c[-2 * samples_per_period - 1:-samples_per_period]
            scale = max(float(np.max(np.abs(c))), atol)
            residual[b] = float(np.max(np.abs(last - prev))) / scale
        if np.all(residual < residual_tol) or attempt == max_extensions:
            break
        t_settle = t_end + transient
        y0 = Y[:, -1]
        t_now = t_end

    responses = np.empty(n, dtype=complex)
    harmonics = []
    for b, (grid, idx) in enumerate(per_grid):
        states = np.stack([Y[b, idx], Y[n + b, idx], Y[2 * n + b, idx], Y[3 * n + b, idx]])
        keep = grid >= grid[-1] - n_periods * periods[b] - 1e-12 * periods[b]
        traj = Trajectory(
            times=grid[keep],
            states=_to_si(sys, states[:, keep]).T,
            sys=sys,
            drive=drive.replace(delta=float(deltas[b])),
            bare_detuning=bare_detuning,
            probe_phase=probe_phase,
            t_start=0.0,
        )
        h = extract_harmonics(traj, float(deltas[b]), n_periods, transient=transient,
                              samples_per_period=samples_per_period)
        harmonics.append(h)
        responses[b] = 2.0 * sys.kappa * h.amp_at_plus_delta / probe[b]
    return OracleSweep(deltas=deltas, responses=responses, harmonics=harmonics,
                       cycle_residual=residual, t_end=float(t_end))


def oracle_response(sys: SystemParams, drive: DriveParams, delta: Optional[float] = None, **kwargs) -> ComplexResponse:
    """Probe response at a single detuning (``drive.delta`` if not given)."""
    delta = drive.delta if delta is None else delta
    sweep = oracle_sweep(sys, drive, [delta], **kwargs)
    return sweep.response(0)
