import math

import mpmath as mp
import numpy as np
import pytest
from scipy.integrate import quad
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from oamcirc.errors import NumericalError
from oamcirc.modes import (
    BeamParams,
    ModeIndex,
    ModeSpectrum,
    Truncation,
    gouy_phase,
    laguerre,
    lg_field_at_waist,
    lg_overlap,
    lg_radial,
    mode_index,
    mode_overlap,
    pure_mode,
    radial_coefficients,
    radial_coefficients_closed_form,
    radial_coefficients_quadrature,
    rescale_waist,
    vortex_field,
    vortex_spectrum,
)

LAM = 795e-9

# |C_p|² for equal waists from tests/oracles.coefficient (30-digit mpmath quadrature)
ORACLE_C2 = {
    1: [0.78539816339744831, 0.098174770424681039, 0.03681553890925539, 0.019174759848570515,
        0.011744540407249441, 0.0079275647748933724, 0.0057097341533458218, 0.0043077904996225174,
        0.0033654613278300917, 0.0027017175659524903, 0.0022166364575201113],
    2: [0.5, 0.16666666666666667, 0.083333333333333333, 0.05, 0.033333333333333333,
        0.02380952380952381, 0.017857142857142857, 0.013888888888888889, 0.011111111111111111,
        0.0090909090909090909, 0.0075757575757575758],
    3: [0.29452431127404312, 0.16566992509164925, 0.10354370318228078, 0.070467242443496644,
        0.050962916410028823, 0.038540705535084297, 0.030154533497357622, 0.02423132156037666,
        0.019894465712922883, 0.016624773431400835, 0.0140990866985534],
}
ORACLE_L3_25_50 = [0.012063715789784806, 0.027143360527015814, 0.039195012601010835]
ORACLE_LG_P1_L2 = -5285.055817786797935j  # u_{1,2}(w=60um, r=30um, θ=π/4)
ORACLE_VORTEX_L3 = -12427.862415077109199  # vortex(l=3, w=50um, r=25um, θ=π)
ORACLE_CROSS_L2 = 0.512  # <u_{0,2}(w) | u_{0,2}(w/2)>
ORACLE_GAUSS_HALF = [0.8, -0.48, 0.288, -0.1728, 0.10368, -0.062208]


class TestIndexAndBeam:
    def test_order(self):
        assert ModeIndex(1, -3).order == 5

    def test_validation(self):
        with pytest.raises(ValueError):
            mode_index(-1, 0)
        with pytest.raises(ValueError):
            mode_index(0, 7)
        assert mode_index(2, -6) == (2, -6)

    def test_beam(self):
        b = BeamParams(50e-6, LAM)
        assert b.rayleigh_range == pytest.approx(math.pi * 50e-6**2 / LAM)
        with pytest.raises(ValueError):
            BeamParams(0.0, LAM)


class TestFields:
    def test_gaussian_peak(self):
        v = lg_field_at_waist(ModeIndex(0, 0), BeamParams(1.0, LAM), 0.0, 0.0)
        assert v == pytest.approx(math.sqrt(2 / math.pi), rel=1e-15)

    def test_axis_null(self):
        assert lg_field_at_waist(ModeIndex(0, 3), BeamParams(3e-5, LAM), 0.0, 1.2) == 0

    def test_against_oracle(self):
        v = lg_field_at_waist(ModeIndex(1, 2), BeamParams(60e-6, LAM), 30e-6, math.pi / 4)
        assert abs(v - ORACLE_LG_P1_L2) < 1e-11 * abs(ORACLE_LG_P1_L2)

    @settings(max_examples=40, deadline=None)
    @given(p=st.integers(0, 8), l=st.integers(-6, 6), r=st.floats(0, 4), theta=st.floats(-7, 7))
    def test_field_matches_mpmath(self, p, l, r, theta):
        ours = lg_field_at_waist(ModeIndex(p, l), BeamParams(1.3, LAM), r, theta)
        ref = complex(oracles.lg(p, l, mp.mpf(1.3), mp.mpf(r), mp.mpf(theta)))
        assert abs(ours - ref) < 1e-12 * max(1.0, abs(ref))

    def test_laguerre_recurrence(self):
        x = np.linspace(0, 20, 7)
        for p, a in [(0, 0), (3, 2), (10, 6), (20, 1)]:
            ref = [float(mp.laguerre(p, a, xi)) for xi in x]
            np.testing.assert_allclose(laguerre(p, a, x), ref, rtol=1e-11, atol=1e-11)

    def test_high_order_stays_finite(self):
        assert np.isfinite(lg_radial(20, 6, 1.0, np.linspace(0, 8, 50))).all()

    def test_non_finite_rejected(self):
        with pytest.raises((ValueError, NumericalError)):
            lg_field_at_waist(ModeIndex(0, 1), BeamParams(1.0, LAM), float("nan"), 0.0)
        with pytest.raises(ValueError):
            lg_field_at_waist(ModeIndex(0, 1), BeamParams(1.0, LAM), -1.0, 0.0)

    def test_gouy(self):
        assert gouy_phase(0.0, 2.0) == 0.0
        assert gouy_phase(2.0, 2.0) == pytest.approx(math.pi / 4, abs=1e-15)
        assert gouy_phase(-2.0, 2.0) == pytest.approx(-math.pi / 4, abs=1e-15)
        with pytest.raises(ValueError):
            gouy_phase(1.0, 0.0)

    def test_vortex_values(self):
        assert vortex_field(0, 1.0, 0.0, 0.3) == pytest.approx(math.sqrt(2 / math.pi))
        v = vortex_field(3, 50e-6, 25e-6, math.pi)
        assert abs(v - ORACLE_VORTEX_L3) < 1e-11 * abs(ORACLE_VORTEX_L3)

    @given(l=st.integers(-6, 6), r=st.floats(0, 3), theta=st.floats(-7, 7))
    def test_vortex_phase_only(self, l, r, theta):
        assert abs(vortex_field(l, 1.0, r, theta)) == pytest.approx(abs(vortex_field(0, 1.0, r, 0.0)), rel=1e-14)


class TestOrthonormality:
    PAIRS = [((0, 0), (0, 0)), ((2, 1), (2, 1)), ((1, 3), (2, 3)), ((6, -4), (6, -4)),
             ((0, 1), (0, 2)), ((3, -2), (1, -2)), ((4, 0), (5, 0)), ((2, 4), (2, -4))]

    @pytest.mark.parametrize("a,b", PAIRS)
    def test_two_dimensional(self, a, b):
        # azimuth on a uniform grid (exact for these trig polynomials), radius by adaptive quadrature
        beam = BeamParams(1.0, LAM)
        theta = np.linspace(0, 2 * np.pi, 32, endpoint=False)

        def ring(r, part):
            u = lg_field_at_waist(ModeIndex(*a), beam, r, theta)
            v = lg_field_at_waist(ModeIndex(*b), beam, r, theta)
            z = np.mean(u * np.conj(v)) * 2 * np.pi * r
            return z.real if part == 0 else z.imag

        re = quad(ring, 0, 8, args=(0,), epsabs=1e-12, limit=200)[0]
        im = quad(ring, 0, 8, args=(1,), epsabs=1e-12, limit=200)[0]
        assert abs(complex(re, im) - float(a == b)) < 1e-7

    def test_cross_waist(self):
        assert lg_overlap(0, 2, 1.0, 0, 2, 0.5) == pytest.approx(ORACLE_CROSS_L2, abs=1e-10)
        assert lg_overlap(0, 2, 0.5, 0, 2, 1.0) == pytest.approx(ORACLE_CROSS_L2, abs=1e-10)


class TestRadialCoefficients:
    @pytest.mark.parametrize("l", [1, 2, 3, -3])
    def test_closed_form_vs_oracle(self, l):
        c = radial_coefficients_closed_form(l, 10)
        np.testing.assert_allclose(c**2, ORACLE_C2[abs(l)], atol=1e-12)

    @pytest.mark.parametrize("l", [1, 2, 3])
    def test_quadrature_vs_oracle(self, l):
        c = radial_coefficients_quadrature(l, 1.0, 1.0, 10)
        np.testing.assert_allclose(c**2, ORACLE_C2[l], atol=1e-10)

    def test_l_zero_equal_waists(self):
        assert list(radial_coefficients(0, 5e-5, 5e-5, 5)) == [1, 0, 0, 0, 0, 0]
        with pytest.raises(ValueError):
            radial_coefficients_closed_form(0, 5)

    def test_unequal_waists(self):
        c = radial_coefficients(3, 25e-6, 50e-6, 10)
        np.testing.assert_allclose(c[:3] ** 2, ORACLE_L3_25_50, rtol=1e-9)

    def test_halved_waist_lowers_p0(self):
        # a phase-only vortex overlaps u_{0,l} best when its waist is larger than the LG waist
        assert radial_coefficients(3, 25e-6, 50e-6, 0)[0] ** 2 < ORACLE_C2[3][0]

    @settings(max_examples=25, deadline=None)
    @given(l=st.integers(-4, 4), ratio=st.floats(0.3, 3.0))
    def test_completeness_monotone(self, l, ratio):
        c = radial_coefficients(l, ratio, 1.0, 16)
        partial = np.cumsum(c**2)
        assert np.all(np.diff(partial) >= -1e-15)
        assert partial[-1] <= 1 + 1e-9

    def test_converges_to_one(self):
        c = radial_coefficients_closed_form(2, 400)
        assert 1 - np.sum(c**2) < 5e-3


class TestSpectrum:
    def test_power_bound(self):
        with pytest.raises(ValueError):
            ModeSpectrum(1.0, LAM, {(0, 0): 1.0, (1, 0): 0.1})

    def test_vortex_loss_reported(self):
        s = vortex_spectrum(3, 1.0, 1.0, LAM, Truncation(p_max=10))
        assert s.truncation_loss == pytest.approx(1 - sum(ORACLE_C2[3]), abs=1e-12)
        assert any("truncation" in n for n in s.notes)

    def test_overlap_examples(self):
        x = vortex_spectrum(2, 1.0, 1.0, LAM)
        assert mode_overlap(x, x) == pytest.approx(x.power())
        assert mode_overlap(pure_mode(0, 1, 1.0, LAM), pure_mode(0, 2, 1.0, LAM)) == 0
        v = mode_overlap(pure_mode(0, 2, 1.0, LAM), pure_mode(0, 2, 0.5, LAM))
        assert v.imag == 0 and v.real == pytest.approx(ORACLE_CROSS_L2, abs=1e-10)
        with pytest.raises(ValueError):
            mode_overlap(pure_mode(0, 0, 1.0, LAM), pure_mode(0, 0, 1.0, 2 * LAM))

    @settings(max_examples=30, deadline=None)
    @given(
        a=st.lists(st.complex_numbers(max_magnitude=1, allow_nan=False), min_size=3, max_size=3),
        b=st.lists(st.complex_numbers(max_magnitude=1, allow_nan=False), min_size=3, max_size=3),
        wb=st.floats(0.5, 2.0),
    )
    def test_overlap_hermitian_and_bounded(self, a, b, wb):
        def spec(v, w):
            n = math.sqrt(sum(abs(x) ** 2 for x in v)) or 1.0
            return ModeSpectrum(w, LAM, {(0, 1): v[0] / n, (1, 1): v[1] / n, (0, -2): v[2] / n})

        x, y = spec(a, 1.0), spec(b, wb)
        xy, yx = mode_overlap(x, y), mode_overlap(y, x)
        assert abs(xy - yx.conjugate()) < 1e-12
        assert abs(xy) <= math.sqrt(x.power() * y.power()) + 1e-9


class TestRescale:
    def test_identity(self):
        s = vortex_spectrum(1, 1.0, 1.0, LAM)
        assert rescale_waist(s, 1.0) is s

    def test_gaussian_to_half_waist(self):
        s = rescale_waist(pure_mode(0, 0, 1.0, LAM), 0.5, p_max=5)
        got = [s[(p, 0)].real for p in range(6)]
        np.testing.assert_allclose(got, ORACLE_GAUSS_HALF, atol=1e-10)

    def test_matrix_path_gaussian(self):
        # without a known source the generic cross-waist matrix is used
        s = ModeSpectrum(1.0, LAM, {(0, 0): 1.0})
        out = rescale_waist(s, 0.5, p_max=5)
        np.testing.assert_allclose([out[(p, 0)].real for p in range(6)], ORACLE_GAUSS_HALF, atol=1e-10)

    def test_power_preserved(self):
        s = ModeSpectrum(1.0, LAM, {(1, 2): 0.6, (0, 2): 0.8})
        out = rescale_waist(s, 0.5, p_max=20)
        assert abs(out.power() - 1.0) < 1e-3
        assert out.power() + out.truncation_loss == pytest.approx(1.0, abs=1e-12)
        assert out.l_values() == [2]

    def test_round_trip(self):
        s = ModeSpectrum(1.0, LAM, {(0, 1): 1.0})
        back = rescale_waist(rescale_waist(s, 0.8, p_max=12), 1.0, p_max=12)
        assert abs(back[(0, 1)]) == pytest.approx(1.0, abs=1e-6)
