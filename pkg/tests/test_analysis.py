import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.constants import c as C

from oamcirc import analysis
from oamcirc.analysis import (
    Preparation,
    SweepGrid,
    find_peaks,
    fp1_transmission,
    fsr_window,
    optimize_design,
    resonance_wavelength,
    waist_scan,
    wavelength_sweep,
)
from oamcirc.cavity import nearest_detuning, resonance_frequency, scatter
from oamcirc.circuit import paper_spec, tune_to_target, with_finesse
from oamcirc.errors import OptimizationError
from oamcirc.modes import ModeIndex, radial_coefficients

SPEC = paper_spec()
CAV = SPEC.cavity
PREP = Preparation(25e-6, 50e-6)
LAM3 = resonance_wavelength(CAV, ModeIndex(0, 3), SPEC.wavelength)


@pytest.fixture(scope="module")
def traces():
    grid = fsr_window(CAV, LAM3, 2.2, 8000)
    return grid, wavelength_sweep(grid, [0, 1, -1, 2, -2, 3, -3], CAV, PREP)


class TestGrid:
    def test_validation(self):
        with pytest.raises(ValueError):
            SweepGrid("wavelength", 1.0, 1.0, 10)
        with pytest.raises(ValueError):
            SweepGrid("wavelength", 0.0, 1.0, 1)
        with pytest.raises(ValueError):
            SweepGrid("temperature", 0.0, 1.0, 10)
        g = SweepGrid("source_waist", 1.0, 2.0, 11)
        assert g.step == pytest.approx(0.1) and g.values()[-1] == 2.0


class TestPeaks:
    def test_parabola_exact(self):
        x = np.arange(20.0)
        y = 5.0 - (x - 7.3) ** 2
        y = np.clip(y, 0, None)
        [(xp, h)] = find_peaks(x, y)
        assert xp == pytest.approx(7.3, abs=1e-12) and h == pytest.approx(5.0, abs=1e-12)

    def test_floor(self):
        x = np.arange(30.0)
        y = np.exp(-((x - 10) ** 2)) + 0.005 * np.exp(-((x - 20) ** 2))
        assert len(find_peaks(x, y)) == 1
        assert len(find_peaks(x, y, floor=0.001)) == 2

    def test_sorted(self, traces):
        _, tr = traces
        for t in tr.values():
            w = [p.wavelength for p in t.peaks]
            assert w == sorted(w)


class TestSweep:
    def test_plus_minus_identical(self, traces):
        _, tr = traces
        for l in (1, 2, 3):
            assert np.max(np.abs(tr[l].transmission - tr[-l].transmission)) <= 1e-12

    def test_powers_in_range(self, traces):
        _, tr = traces
        for t in tr.values():
            assert np.all((t.transmission >= 0) & (t.transmission <= 1))

    def test_main_peak_spacing_is_fsr(self, traces):
        grid, tr = traces
        heights = np.array([p.height for p in tr[0].peaks])
        main = [p for p in tr[0].peaks if p.height > 0.5 * heights.max()]
        assert len(main) == 2
        spacing = abs(main[1].frequency_offset - main[0].frequency_offset)
        step_hz = C / grid.start - C / (grid.start + grid.step)
        assert spacing == pytest.approx(7.90e9, abs=step_hz)

    def test_l0_mid_peak(self, traces):
        # the p=1 content sits at transverse order 2, a fraction 2φ/π of an FSR away
        _, tr = traces
        main = max(tr[0].peaks, key=lambda p: p.height)
        small = [p for p in tr[0].peaks if p.height < 0.5 * main.height]
        assert small
        fwhm_m = LAM3**2 * 287e6 / C
        for p in small:
            # tails of the neighbouring orders pull it slightly; well under a linewidth
            assert abs(p.wavelength - resonance_wavelength(CAV, ModeIndex(1, 0), p.wavelength)) < 0.05 * fwhm_m
            assert p.height == pytest.approx(radial_coefficients(0, 25e-6, 50e-6, 1)[1] ** 2, rel=0.05)

    def test_point_consistency(self, traces):
        grid, tr = traces
        lam = grid.values()
        for i in (0, 1234, 4000, 7999):
            omega = 2.0 * math.pi * C / lam[i]
            direct = 0.0
            for p, w in enumerate(PREP.weights(1)):
                direct = direct + w * scatter(CAV, nearest_detuning(CAV, (p, 1), omega)[0]).transmittance
            assert tr[1].transmission[i] == direct
            assert fp1_transmission(CAV, PREP, 1, lam[i])[0] == direct

    def test_coarse_grid_warned(self):
        grid = fsr_window(CAV, LAM3, 1.2, 30)
        tr = wavelength_sweep(grid, [0], CAV, PREP)
        assert any("coarser" in n for n in tr[0].notes)

    def test_threads_identical(self):
        grid = fsr_window(CAV, LAM3, 1.2, 500)
        a = wavelength_sweep(grid, [0, 1, 2], CAV, PREP, threads=1)
        b = wavelength_sweep(grid, [0, 1, 2], CAV, PREP, threads=3)
        for l in a:
            assert np.array_equal(a[l].transmission, b[l].transmission)

    def test_peaks_on_resonances_when_resolved(self):
        # at high finesse every peak is an isolated Lorentzian and sits on an allowed resonance
        cav = with_finesse(SPEC, 1000).cavity
        grid = fsr_window(cav, LAM3, 1.2, 20000)
        tr = wavelength_sweep(grid, [1, 3], cav, PREP)
        for l, t in tr.items():
            weights = PREP.weights(l)
            for pk in t.peaks:
                omega = 2 * math.pi * C / pk.wavelength
                best = min(
                    abs(2 * math.pi * C / resonance_frequency(cav, nearest_detuning(cav, (p, l), omega)[1], (p, l))
                        - pk.wavelength)
                    for p in range(len(weights)) if weights[p] > 0
                )
                assert best <= grid.step / 2

    def test_blended_peak_at_paper_finesse(self, traces):
        # orders 3 and 7 resonate 0.028 FSR apart, inside one linewidth, so they merge into a shifted peak
        grid, tr = traces
        near = min(tr[1].peaks, key=lambda p: abs(p.wavelength - LAM3))
        assert abs(near.wavelength - LAM3) > grid.step
        assert near.height > 1.1 * radial_coefficients(1, 25e-6, 50e-6, 1)[1] ** 2


class TestWaistScan:
    def test_equal_waists_l0(self):
        [row] = waist_scan([0], [50e-6], CAV, 50e-6, SPEC.wavelength)
        assert row.transmission == pytest.approx(1.0, abs=1e-15)

    def test_ratio_composition(self):
        rows = waist_scan([3], [25e-6, 50e-6], CAV, 50e-6, SPEC.wavelength)
        laser = tune_to_target(SPEC).laser_frequency
        for row in rows:
            c = radial_coefficients(3, row.source_waist, 50e-6, 10)
            t = sum(c[p] ** 2 * scatter(CAV, nearest_detuning(CAV, (p, 3), laser)[0]).transmittance for p in range(11))
            assert row.transmission == pytest.approx(t, rel=1e-12)
        # p=0 fractions match the quadrature oracle (see test_modes)
        assert rows[0].p0_fraction / rows[1].p0_fraction == pytest.approx(
            0.012063715789784806 / 0.29452431127404312, rel=1e-9
        )

    def test_best_p0_waist(self):
        grid = np.linspace(10e-6, 150e-6, 141)
        for l in (1, 2, 3):
            assert analysis.best_p0_waist(l, 50e-6, grid) == pytest.approx(50e-6 * math.sqrt(l + 1), abs=1e-6)


class TestOptimize:
    def test_no_free_params(self):
        res = optimize_design(SPEC, "max_avg_efficiency", {})
        assert res.spec is SPEC

    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            optimize_design(SPEC, "max_power", {"source_waist": (1e-6, 2e-6)})
        with pytest.raises(ValueError):
            optimize_design(SPEC, "max_avg_efficiency", {"cavity_waist": (1e-6, 2e-6)})
        with pytest.raises(ValueError):
            optimize_design(SPEC, "max_avg_efficiency", {"source_waist": (2e-6, 1e-6)})

    def test_non_finite_objective(self, monkeypatch):
        monkeypatch.setattr(analysis, "objective_value", lambda spec, obj: float("nan"))
        with pytest.raises(OptimizationError) as err:
            optimize_design(SPEC, "max_avg_efficiency", {"source_waist": (10e-6, 50e-6)})
        assert err.value.point is not None

    def test_target_coupling(self):
        wc = 50e-6
        res = optimize_design(SPEC, "max_target_coupling", {"source_waist": (wc / 4, wc)})
        # |C0|² for l=3 keeps rising up to 2·w_c, so the bounded optimum is the upper edge
        assert res.parameters["source_waist"] == pytest.approx(wc, rel=1e-6)
        assert res.value == pytest.approx(0.29452431127404312, rel=1e-9)

    def test_trace_properties(self):
        res = optimize_design(SPEC, "max_min_mode_separation", {"optical_length_offset": (-20e-6, 20e-6)}, 9, 1, 20)
        best = [t[4] for t in res.trace]
        assert all(b >= a for a, b in zip(best, best[1:]))
        coarse = [t[3] for t in res.trace[1:10]]
        assert res.value >= max(coarse)
        assert res.value == best[-1]

    @settings(max_examples=5, deadline=None)
    @given(st.floats(20e-6, 80e-6))
    def test_separation_positive(self, w):
        assert analysis.min_mode_separation(tune_to_target(paper_spec(source_waist=w))) > 0
