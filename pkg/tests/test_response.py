import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from omitsim import (
    Classification,
    ComplexResponse,
    DegeneratePoleError,
    DriveParams,
    OperatingPoint,
    PoleProximityError,
    Regime,
    ResolutionError,
    classify_regime,
    compute_spectrum,
    critical_power,
    dip_metrics,
    poles,
    quadratures,
    residues,
    response_exact,
    response_no_coupling,
    response_sideband,
    solve_operating_point,
)
from omitsim.response import center_slope_closed_form, default_grid, dip_value_closed_form


def _op(beta, Delta=1.0):
    regime = Regime.EIT_REGION
    return OperatingPoint(Delta=Delta, c0_sq=1.0 if beta else 0.0, beta=beta, chi0=1.0, regime=regime)


def _sys(expt, kappa, gamma_m):
    return expt.replace(kappa=kappa, gamma_m=gamma_m)


rates = st.floats(1e3, 1e7)
ratios = st.floats(1e-4, 0.9)
beta_frac = st.floats(0.0, 100.0)


class TestNoCoupling:
    def test_resonant(self, expt):
        vp, vtp = quadratures(response_no_coupling(expt, expt.omega0))
        assert vp == pytest.approx(2.0, rel=1e-15) and vtp == 0.0

    def test_one_linewidth(self, expt):
        r = response_no_coupling(expt, detuning=expt.kappa)
        assert r.value == pytest.approx(1 + 1j, rel=1e-15)

    def test_far_off_resonance(self, expt):
        assert abs(response_no_coupling(expt, detuning=1e6 * expt.kappa).value) < 1e-5

    def test_needs_an_argument(self, expt):
        with pytest.raises(ValueError):
            response_no_coupling(expt)


class TestQuadratures:
    @pytest.mark.parametrize("z, expected", [(2, (2, 0)), (1 + 1j, (1, 1)), (0.01, (0.01, 0))])
    def test_split(self, z, expected):
        assert quadratures(ComplexResponse(z)) == expected
        assert quadratures(z) == expected


class TestExact:
    def test_decoupled_limit(self, expt):
        op = _op(0.0, Delta=expt.omega_m)
        delta = np.linspace(-2, 2, 801) * expt.omega_m
        exact = response_exact(expt, op, delta).value
        ref = response_no_coupling(expt, detuning=delta - op.Delta).value
        assert np.max(np.abs(exact - ref) / np.abs(ref)) < 1e-12

    def test_matches_hand_linearization(self, expt, op_1mw):
        # solve the linearized three-amplitude problem directly at each delta
        kappa, wm, g, Delta = expt.kappa, expt.omega_m, expt.gamma_m, op_1mw.Delta
        beta = op_1mw.beta
        for delta in np.array([0.7, 0.95, 1.0, 1.02, 1.4]) * wm:
            chi = 1.0 / (wm ** 2 - delta ** 2 - 1j * g * delta)
            # real c0 = 1, so the radiation-pressure gain g |c0|^2 equals 2 omega_m beta
            G = 2 * wm * beta
            # unknowns: a+ (probe sideband), conj(a-) (idler), X (mechanics)
            m = np.array([
                [kappa - 1j * (delta - Delta), 0, -1j],
                [0, kappa - 1j * (Delta + delta), 1j],
                [-G * chi, -G * chi, 1],
            ], dtype=complex)
            rhs = np.array([1.0, 0.0, 0.0], dtype=complex)
            a_plus = np.linalg.solve(m, rhs)[0]
            expected = 2 * kappa * a_plus
            got = response_exact(expt, op_1mw, delta).value
            assert got == pytest.approx(expected, rel=1e-10)

    def test_close_to_sideband_at_centre(self, expt, op_1mw):
        exact = response_exact(expt, op_1mw, expt.omega_m).value
        side = response_sideband(expt, op_1mw, 0.0).value
        # absorptive parts agree; the dispersive part picks up -i kappa beta / (omega_m (kappa gamma/2 + beta))
        assert exact.real == pytest.approx(side.real, rel=0.02)
        missing = -1j * expt.kappa * op_1mw.beta / (expt.omega_m * (expt.kappa * expt.gamma_m / 2 + op_1mw.beta))
        assert abs(exact - side - missing) < 0.02 * abs(missing)

    def test_lower_sideband_asymmetry(self, expt, op_1mw):
        width = abs(poles(expt, op_1mw).x_plus.imag)
        offsets = np.linspace(-10, 10, 2001) * width
        lower = response_exact(expt, op_1mw, -expt.omega_m + offsets)
        upper = response_exact(expt, op_1mw, expt.omega_m + offsets)
        assert np.all(np.isfinite(lower.value))
        assert np.max(np.abs(lower.value)) < 0.25
        # the off-resonant sideband only carries a residual feature of the far-detuned
        # background, about a hundred times shallower than the transparency window
        lower_depth = lower.vp.max() - lower.vp.min()
        upper_depth = upper.vp.max() - upper.vp.min()
        assert lower_depth < 0.02 * upper_depth
        # at delta = -omega_m the response is almost purely dispersive, close to -i kappa / omega_m
        centre = response_exact(expt, op_1mw, -expt.omega_m).value
        assert centre == pytest.approx(-1j * expt.kappa / expt.omega_m, rel=0.02)

    def test_pole_proximity(self, expt, quiet):
        s = expt.replace(kappa=0.0, gamma_m=0.0)
        with pytest.raises(PoleProximityError):
            response_exact(s, _op(0.0, Delta=expt.omega_m), expt.omega_m)

    def test_sideband_convergence_trend(self, expt, op_1mw):
        def deviation(s):
            # hold beta fixed so only the sideband resolution changes
            op = _op(op_1mw.beta, Delta=s.omega_m)
            x = np.linspace(-s.kappa, s.kappa, 2001)
            e = response_exact(s, op, x + s.omega_m).value
            a = response_sideband(s, op, x).value
            return np.max(np.abs(e - a)) / np.max(np.abs(a))

        base = deviation(expt)
        fast = deviation(expt.replace(omega_m=10 * expt.omega_m))
        assert fast < base
        # leading correction is of order kappa / (2 omega_m)
        assert base / (expt.kappa / (2 * expt.omega_m)) == pytest.approx(1.0, abs=0.1)
        assert fast / (expt.kappa / (20 * expt.omega_m)) == pytest.approx(1.0, abs=0.1)


class TestSideband:
    def test_dip_value(self, expt, op_1mw):
        r = response_sideband(expt, op_1mw, 0.0)
        assert r.vp == pytest.approx(0.0100, abs=1e-4)
        assert r.vtp == 0.0
        assert r.vp == pytest.approx(dip_value_closed_form(expt, op_1mw.beta), rel=1e-14)

    def test_perfect_transparency(self, expt, op_1mw, quiet):
        s = expt.replace(gamma_m=0.0)
        assert response_sideband(s, op_1mw, 0.0).value == 0

    @settings(max_examples=50, deadline=None)
    @given(kappa=rates, ratio=ratios)
    def test_decoupled_limit(self, expt, kappa, ratio):
        s = _sys(expt, kappa, ratio * kappa)
        x = np.linspace(-5, 5, 101) * kappa
        got = response_sideband(s, _op(0.0), x).value
        ref = 2 * kappa / (kappa - 1j * x)
        assert np.max(np.abs(got - ref) / np.abs(ref)) < 1e-12

    @settings(max_examples=50, deadline=None)
    @given(kappa=rates, ratio=ratios, bf=beta_frac)
    def test_parity(self, expt, kappa, ratio, bf):
        s = _sys(expt, kappa, ratio * kappa)
        op = _op(bf * kappa ** 2)
        x = np.linspace(0.01, 5, 200) * kappa
        rp = response_sideband(s, op, x)
        rm = response_sideband(s, op, -x)
        scale = np.abs(rp.value)
        assert np.max(np.abs(rp.vp - rm.vp) / scale) < 1e-12
        assert np.max(np.abs(rp.vtp + rm.vtp) / scale) < 1e-12

    def test_dip_monotone_in_beta(self, expt):
        betas = np.linspace(0, 5, 200) * expt.kappa ** 2
        closed = [dip_value_closed_form(expt, b) for b in betas]
        sampled = [response_sideband(expt, _op(b), 0.0).vp for b in betas]
        assert np.all(np.diff(closed) < 0)
        assert np.all(np.diff(sampled) < 0)
        np.testing.assert_allclose(sampled, closed, rtol=1e-13)

    def test_centre_slope_closed_form(self, expt, op_1mw):
        x, k, hg, b = sp.symbols("x kappa h beta", positive=True)
        eps = 2 * k / (k - sp.I * x + b / (hg - sp.I * x))
        slope = sp.im(sp.diff(eps, x).subs(x, 0))
        for beta in (0.0, op_1mw.beta):
            val = float(slope.subs({k: expt.kappa, hg: expt.gamma_m / 2, b: beta}))
            assert center_slope_closed_form(expt, beta) == pytest.approx(val, rel=1e-12)
        assert center_slope_closed_form(expt, 0.0) == pytest.approx(2 / expt.kappa, rel=1e-15)


class TestPoles:
    @settings(max_examples=200, deadline=None)
    @given(kappa=rates, ratio=ratios, bf=beta_frac)
    def test_quadratic_and_passivity(self, expt, kappa, ratio, bf):
        s = _sys(expt, kappa, ratio * kappa)
        beta = bf * kappa ** 2
        p = poles(s, _op(beta))
        hg = s.gamma_m / 2
        for z in (p.x_plus, p.x_minus):
            res = (kappa - 1j * z) * (hg - 1j * z) + beta
            scale = kappa ** 2 + abs(z) ** 2 + beta
            assert abs(res) <= 1e-12 * scale
            assert z.imag <= 0
        # same pair as a generic polynomial root finder
        ref = np.roots([-1, -1j * (kappa + hg), kappa * hg + beta])
        for z in (p.x_plus, p.x_minus):
            assert np.min(np.abs(ref - z)) <= 1e-9 * (kappa + abs(z))

    def test_decoupled_poles(self, expt):
        p = poles(expt, _op(0.0))
        assert p.x_plus == pytest.approx(-0.5j * expt.gamma_m, rel=1e-12)
        assert p.x_minus == pytest.approx(-1j * expt.kappa, rel=1e-12)

    def test_ordering_below_critical(self, expt, op_1mw):
        p = poles(expt, op_1mw)
        assert p.x_plus.real == 0 and p.x_minus.real == 0
        assert abs(p.x_plus.imag) < abs(p.x_minus.imag)

    def test_mirror_above_critical(self, expt, op_69mw):
        p = poles(expt, op_69mw)
        assert p.x_plus == pytest.approx(-p.x_minus.conjugate(), rel=1e-14)
        assert p.x_plus.real == pytest.approx(6.06e5, rel=0.01)
        assert p.x_plus.real / expt.omega_m == pytest.approx(0.102, abs=0.001)

    def test_double_root_at_critical(self, expt):
        beta = (expt.kappa - expt.gamma_m / 2) ** 2 / 4
        p = poles(expt, _op(beta))
        centre = -0.5j * (expt.kappa + expt.gamma_m / 2)
        assert p.x_plus == p.x_minus == pytest.approx(centre, rel=1e-15)
        with pytest.raises(DegeneratePoleError, match="response_sideband"):
            residues(expt, _op(beta))


class TestResidues:
    @settings(max_examples=200, deadline=None)
    @given(kappa=rates, ratio=ratios, bf=st.floats(0.0, 100.0).filter(lambda v: abs(v - 0.25) > 0.02))
    def test_sum_rule_and_reconstruction(self, expt, kappa, ratio, bf):
        s = _sys(expt, kappa, ratio * kappa)
        op = _op(bf * kappa ** 2)
        d = residues(s, op)
        assert abs(d.A_plus + d.A_minus - 2j * kappa) <= 1e-12 * 2 * kappa * max(1.0, abs(d.A_plus) / kappa)
        x = np.linspace(-5, 5, 1001) * kappa
        plus, minus = d.parts(x)
        direct = response_sideband(s, op, x).value
        assert np.max(np.abs(plus + minus - direct)) / np.max(np.abs(direct)) < 1e-10

    def test_numeric_limit(self, expt, op_1mw, op_69mw):
        for op in (op_1mw, op_69mw):
            d = residues(expt, op)
            for pole, res in ((d.x_plus, d.A_plus), (d.x_minus, d.A_minus)):
                z = pole + 1e-7 * abs(pole)
                # evaluate the rational form at complex x
                k, hg = expt.kappa, expt.gamma_m / 2
                eps = 2 * k * (hg - 1j * z) / ((k - 1j * z) * (hg - 1j * z) + op.beta)
                assert (z - pole) * eps == pytest.approx(res, rel=1e-5)

    def test_narrow_part_vanishes_uncoupled(self, expt):
        d = residues(expt, _op(0.0))
        assert abs(d.A_plus) < 1e-15 * expt.kappa
        assert d.A_minus == pytest.approx(2j * expt.kappa, rel=1e-12)


class TestClassify:
    def test_experimental_points(self, expt, op_1mw, op_69mw):
        assert classify_regime(expt, op_1mw) is Regime.EIT_REGION
        assert classify_regime(expt, op_69mw) is Regime.SPLITTING_REGION

    def test_boundary(self, expt):
        beta = (expt.kappa - expt.gamma_m / 2) ** 2 / 4
        assert classify_regime(expt, beta) is Regime.CRITICAL
        assert classify_regime(expt, beta * (1 + 1e-6)) is Regime.SPLITTING_REGION
        assert classify_regime(expt, beta * (1 - 1e-6)) is Regime.EIT_REGION
        op = solve_operating_point(expt, DriveParams(omega_c=expt.omega0, power_c=critical_power(expt)))
        assert classify_regime(expt, op) is Regime.CRITICAL


class TestSpectrum:
    def test_fig2_shape(self, expt, op_1mw):
        sp_ = compute_spectrum(expt, op_1mw, default_grid(expt), "sideband",
                               include_baseline=True, include_pole_parts=True)
        assert len(sp_) == 4001
        i0 = 2000
        assert sp_.total.vp[i0] == pytest.approx(0.0100, abs=1e-4)
        assert np.real(sp_.baseline_no_coupling[i0]) == pytest.approx(2.0, rel=1e-15)
        np.testing.assert_allclose(sp_.pole_plus_part + sp_.pole_minus_part, sp_.total.value, rtol=1e-10, atol=1e-12)
        # broad peak flanks the dip
        assert sp_.total.vp.max() > 1.5

    def test_fig4_doublet(self, expt, op_69mw):
        sp_ = compute_spectrum(expt, op_69mw, default_grid(expt), "sideband", include_pole_parts=True)
        vp = sp_.total.vp
        np.testing.assert_allclose(vp, vp[::-1], rtol=1e-12)
        assert vp[2000] == vp[1000:3001].min()
        peaks = np.nonzero((vp[1:-1] > vp[:-2]) & (vp[1:-1] > vp[2:]))[0] + 1
        assert len(peaks) == 2

    def test_single_point(self, expt, op_1mw):
        sp_ = compute_spectrum(expt, op_1mw, np.array([1234.5]), "exact")
        assert len(sp_) == 1
        assert sp_.total.value[0] == pytest.approx(response_exact(expt, op_1mw, 1234.5 + expt.omega_m).value, rel=1e-14)

    def test_degenerate_pole_parts(self, expt):
        op = _op((expt.kappa - expt.gamma_m / 2) ** 2 / 4)
        with pytest.raises(DegeneratePoleError):
            compute_spectrum(expt, op, default_grid(expt, n=11), "sideband", include_pole_parts=True)
        compute_spectrum(expt, op, default_grid(expt, n=11), "sideband")

    def test_rejects_bad_grid(self, expt, op_1mw):
        with pytest.raises(ValueError):
            compute_spectrum(expt, op_1mw, np.array([1.0, 0.0]), "sideband")
        with pytest.raises(ValueError):
            compute_spectrum(expt, op_1mw, np.array([]), "sideband")


class TestDipMetrics:
    def test_1mw(self, expt, op_1mw):
        sp_ = compute_spectrum(expt, op_1mw, default_grid(expt), "sideband", include_baseline=True)
        m = dip_metrics(sp_, expt, op_1mw)
        assert m.classification is Classification.EIT_DIP
        assert m.dip_value == pytest.approx(dip_value_closed_form(expt, op_1mw.beta), rel=1e-12)
        assert m.leading_order_width == pytest.approx(8.87e4, rel=1e-3)
        assert m.narrow_hwhm == pytest.approx(abs(poles(expt, op_1mw).x_plus.imag), rel=1e-15)
        assert m.narrow_hwhm <= m.broad_hwhm
        # the inverted feature also carries the slope of the broad pole, so the
        # measured half width sits below the pole width
        assert m.narrow_hwhm_numeric == pytest.approx(m.narrow_hwhm, rel=0.15)
        assert m.narrow_hwhm_numeric < m.narrow_hwhm
        # finite difference converges to the closed form on a fine centred grid
        fine = compute_spectrum(expt, op_1mw, np.linspace(-1, 1, 20001) * m.narrow_hwhm, "sideband")
        slope = dip_metrics(fine, expt, op_1mw).dispersion_slope_at_center
        assert slope == pytest.approx(center_slope_closed_form(expt, op_1mw.beta), rel=1e-6)
        assert 0.0 <= m.dip_value <= 2.0

    def test_decoupled(self, expt):
        op = _op(0.0, Delta=expt.omega_m)
        sp_ = compute_spectrum(expt, op, default_grid(expt), "sideband")
        m = dip_metrics(sp_, expt, op)
        assert m.classification is Classification.NO_DIP
        assert math.isnan(m.narrow_hwhm_numeric)
        assert m.dip_value == pytest.approx(2.0, rel=1e-15)

    def test_split(self, expt, op_69mw):
        sp_ = compute_spectrum(expt, op_69mw, default_grid(expt), "sideband")
        assert dip_metrics(sp_, expt, op_69mw).classification is Classification.SPLIT_DOUBLET

    def test_under_resolved(self, expt, op_1mw):
        sp_ = compute_spectrum(expt, op_1mw, default_grid(expt, n=101), "sideband")
        with pytest.raises(ResolutionError, match="grid step"):
            dip_metrics(sp_, expt, op_1mw)

    def test_missing_centre(self, expt, op_1mw):
        sp_ = compute_spectrum(expt, op_1mw, default_grid(expt, n=4000), "sideband")
        with pytest.raises(ResolutionError):
            dip_metrics(sp_, expt, op_1mw)


class TestRegimeFeatures:
    def test_dispersion_slope_reverses(self, expt, op_1mw):
        grid = default_grid(expt)
        coupled = dip_metrics(compute_spectrum(expt, op_1mw, grid, "sideband"), expt, op_1mw)
        off = op_1mw.decoupled()
        bare = dip_metrics(compute_spectrum(expt, off, grid, "sideband"), expt, off)
        # with eps_T = 2 kappa / (kappa - i x) the bare slope is +2/kappa; coupling flips it
        assert bare.dispersion_slope_at_center == pytest.approx(2 / expt.kappa, rel=1e-3)
        assert coupled.dispersion_slope_at_center < 0
        assert np.sign(bare.dispersion_slope_at_center) != np.sign(coupled.dispersion_slope_at_center)

    @pytest.mark.parametrize("power_mw, ratio", [(6.9, 1.50), (30.0, 1.07), (1000.0, 1.002)])
    def test_doublet_peaks_approach_pole_real_part(self, expt, power_mw, ratio):
        op = solve_operating_point(expt, DriveParams(omega_c=expt.omega0, power_c=power_mw * 1e-3))
        x = np.linspace(-3, 3, 200001) * expt.omega_m
        vp = response_sideband(expt, op, x).vp
        peaks = np.nonzero((vp[1:-1] > vp[:-2]) & (vp[1:-1] > vp[2:]))[0] + 1
        assert len(peaks) == 2
        # the peaks sit outside +/- Re x+ and converge to it once the splitting dwarfs the widths
        assert x[peaks].max() / poles(expt, op).x_plus.real == pytest.approx(ratio, abs=0.005)
