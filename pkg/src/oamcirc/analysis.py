"""Parameter sweeps over the FP1 filter and a small design optimiser.

The wavelength sweep reproduces the transmission-versus-wavelength traces of
the filter cavity: each input charge is prepared as a phase-only vortex,
expanded over ``p`` at the cavity waist, and every radial component sees its
own Lorentzian.  Traces for ``+l`` and ``-l`` coincide because the cavity only
sees ``|l|``.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT

from .cavity import (
    CavityParams,
    detunings,
    linewidth_and_finesse,
    nearest_detuning,
    resonance_frequency,
    transmittance,
)
from .circuit import CircuitSpec, run_cyclic, tune_to_target
from .elements import Fidelity
from .errors import OptimizationError
from .modes import DEFAULT_TRUNCATION, ModeIndex, Truncation, radial_coefficients
from .search import coordinate_search

log = logging.getLogger(__name__)

PEAK_FLOOR = 0.01


@dataclass(frozen=True)
class SweepGrid:
    """Uniform grid over one swept quantity, endpoints included."""

    quantity: str
    start: float
    stop: float
    steps: int

    def __post_init__(self):
        if self.quantity not in ("wavelength", "source_waist", "finesse"):
            raise ValueError(f"cannot sweep {self.quantity!r}")
        if self.steps < 2:
            raise ValueError("a sweep needs at least 2 steps")
        if not self.start < self.stop:
            raise ValueError("sweep start must be below stop")

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.steps)

    @property
    def step(self) -> float:
        return (self.stop - self.start) / (self.steps - 1)


@dataclass(frozen=True)
class Preparation:
    """How the beam reaching FP1 is made: a vortex at ``source_waist`` imaged onto the cavity basis."""

    source_waist: float
    cavity_waist: float
    fidelity: Fidelity = Fidelity.PHASE_ONLY
    truncation: Truncation = DEFAULT_TRUNCATION

    def weights(self, l: int) -> np.ndarray:
        """Radial power fractions ``|C_p|²`` for charge ``l``."""
        if Fidelity(self.fidelity) is Fidelity.INDEX_SHIFT:
            w = np.zeros(self.truncation.p_max + 1)
            w[0] = 1.0
            return w
        c = radial_coefficients(l, self.source_waist, self.cavity_waist, self.truncation.p_max)
        return c * c


@dataclass(frozen=True)
class Peak:
    wavelength: float
    frequency_offset: float
    height: float


@dataclass(frozen=True)
class SpectrumTrace:
    """FP1 transmission of one input charge across a wavelength sweep.

    ``frequency_offset`` is in Hz relative to ``center_frequency_hz``.
    """

    l: int
    wavelength: np.ndarray
    frequency_offset: np.ndarray
    transmission: np.ndarray
    peaks: tuple = field(default=())
    notes: tuple = field(default=())


def fp1_transmission(cavity: CavityParams, prep: Preparation, l: int, wavelength) -> np.ndarray:
    """Power transmitted by FP1 for a prepared charge-``l`` beam, ``Σ_p |C_p|² T(Δ_p)``."""
    lam = np.atleast_1d(np.asarray(wavelength, dtype=float))
    omega = 2.0 * math.pi * SPEED_OF_LIGHT / lam
    total = np.zeros_like(omega)
    for p, w in enumerate(prep.weights(l)):
        if w == 0.0:
            continue
        total = total + w * transmittance(cavity, detunings(cavity, ModeIndex(p, l), omega))
    return total


def find_peaks(x: np.ndarray, y: np.ndarray, floor: float = PEAK_FLOOR) -> list[tuple[float, float]]:
    """Local maxima above ``floor × max(y)``, refined by a three-point parabola.

    Returns ``(x, height)`` pairs sorted by ``x``.  ``x`` must be uniform.
    """
    y = np.asarray(y, dtype=float)
    if y.size < 3 or not np.any(y > 0):
        return []
    threshold = floor * float(y.max())
    inner = (y[1:-1] > y[:-2]) & (y[1:-1] >= y[2:]) & (y[1:-1] > threshold)
    out = []
    dx = x[1] - x[0]
    for i in np.flatnonzero(inner) + 1:
        a, b, c = y[i - 1], y[i], y[i + 1]
        denom = a - 2.0 * b + c
        shift = 0.0 if denom == 0 else 0.5 * (a - c) / denom
        out.append((float(x[i] + shift * dx), float(b - 0.25 * (a - c) * shift)))
    return sorted(out)


def _parallel_map(fn, items, threads):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


def wavelength_sweep(
    grid: SweepGrid,
    l_values,
    cavity: CavityParams,
    prep: Preparation,
    center_wavelength: float | None = None,
    threads: int | None = None,
) -> dict[int, SpectrumTrace]:
    """FP1 transmission traces, one per charge, over a wavelength grid."""
    if grid.quantity != "wavelength":
        raise ValueError("wavelength_sweep needs a wavelength grid")
    lam = grid.values()
    center = 0.5 * (grid.start + grid.stop) if center_wavelength is None else center_wavelength
    nu0 = SPEED_OF_LIGHT / center
    offsets = SPEED_OF_LIGHT / lam - nu0
    notes = []
    fsr, fwhm, _ = linewidth_and_finesse(cavity)
    step_hz = abs(offsets[1] - offsets[0])
    if step_hz > fwhm / 4:
        notes.append(f"grid step {step_hz / 1e6:.1f} MHz is coarser than fwhm/4; peaks may be missed")
    span_hz = abs(offsets[-1] - offsets[0])
    if span_hz < fsr:
        notes.append(f"sweep spans {span_hz / fsr:.2f} FSR; the main-peak spacing is not visible")
    for n in notes:
        log.warning(n)

    def trace(l):
        t = fp1_transmission(cavity, prep, l, lam)
        peaks = tuple(
            Peak(
                wavelength=float(np.interp(x, np.arange(lam.size), lam)),
                frequency_offset=float(np.interp(x, np.arange(lam.size), offsets)),
                height=h,
            )
            for x, h in find_peaks(np.arange(lam.size, dtype=float), t)
        )
        peaks = tuple(sorted(peaks, key=lambda pk: pk.wavelength))
        return SpectrumTrace(l, lam, offsets, t, peaks, tuple(notes))

    return dict(zip(l_values, _parallel_map(trace, list(l_values), threads)))


def fsr_window(cavity: CavityParams, center_wavelength: float, span_fsr: float = 1.2, steps: int = 4000) -> SweepGrid:
    """Wavelength grid spanning ``span_fsr`` free spectral ranges around a centre."""
    fsr, _, _ = linewidth_and_finesse(cavity)
    dlam = center_wavelength**2 * span_fsr * fsr / SPEED_OF_LIGHT
    return SweepGrid("wavelength", center_wavelength - 0.5 * dlam, center_wavelength + 0.5 * dlam, steps)


def resonance_wavelength(cavity: CavityParams, mode: ModeIndex, near_wavelength: float) -> float:
    """Vacuum wavelength of the resonance of ``mode`` closest to ``near_wavelength``."""
    omega = 2.0 * math.pi * SPEED_OF_LIGHT / near_wavelength
    _, q = nearest_detuning(cavity, mode, omega)
    return 2.0 * math.pi * SPEED_OF_LIGHT / resonance_frequency(cavity, q, mode)


# --------------------------------------------------------------------------
# waist scan


@dataclass(frozen=True)
class WaistScanRow:
    l: int
    source_waist: float
    transmission: float
    p0_fraction: float


def waist_scan(
    l_values,
    waists,
    cavity: CavityParams,
    cavity_waist: float,
    wavelength: float,
    target_l: int | None = None,
    truncation: Truncation = DEFAULT_TRUNCATION,
) -> list[WaistScanRow]:
    """On-resonance FP1 transmission for each charge and incident waist.

    Each charge is measured at its own ``(p=0, l)`` resonance unless
    ``target_l`` is given, in which case the laser sits on the target's.
    """
    omega0 = 2.0 * math.pi * SPEED_OF_LIGHT / wavelength
    rows = []
    for l in l_values:
        ref = ModeIndex(0, l if target_l is None else target_l)
        _, q = nearest_detuning(cavity, ref, omega0)
        laser = resonance_frequency(cavity, q, ref)
        for w in waists:
            prep = Preparation(float(w), cavity_waist, Fidelity.PHASE_ONLY, truncation)
            weights = prep.weights(l)
            t = sum(
                wp * float(transmittance(cavity, nearest_detuning(cavity, ModeIndex(p, l), laser)[0]))
                for p, wp in enumerate(weights)
            )
            rows.append(WaistScanRow(l, float(w), t, float(weights[0])))
    return rows


def best_p0_waist(l: int, cavity_waist: float, waists) -> float:
    """Scan point with the largest ``|C_0|²`` for charge ``l``."""
    waists = np.asarray(waists, dtype=float)
    c0 = [radial_coefficients(l, w, cavity_waist, 0)[0] ** 2 for w in waists]
    return float(waists[int(np.argmax(c0))])


# --------------------------------------------------------------------------
# design optimisation

OBJECTIVES = ("max_avg_efficiency", "max_min_mode_separation", "max_target_coupling")
FREE_PARAMETERS = ("optical_length_offset", "source_waist")


@dataclass(frozen=True)
class DesignResult:
    spec: CircuitSpec
    objective: str
    value: float
    parameters: dict
    trace: tuple  # (evaluation, parameter, point, value, best_so_far)


def _apply_params(base: CircuitSpec, params: dict) -> CircuitSpec:
    spec = base
    if "optical_length_offset" in params:
        spec = replace(spec, cavity=spec.cavity.with_optical_length(base.cavity.optical_length + params["optical_length_offset"]))
    if "source_waist" in params:
        w = params["source_waist"]
        det = w if base.detection_waist == base.source_waist else base.detection_waist
        spec = replace(spec, source_waist=w, detection_waist=det)
    return tune_to_target(replace(spec, laser_frequency=None))


def min_mode_separation(spec: CircuitSpec) -> float:
    """Smallest |detuning| (rad/s) of a non-target ``p=0`` mode at the tuned laser."""
    spec = spec if spec.laser_frequency is not None else tune_to_target(spec)
    seps = [
        abs(nearest_detuning(spec.cavity, ModeIndex(0, l + 1), spec.laser_frequency)[0])
        for l in spec.input_modes
        if abs(l + 1) != spec.target_l
    ]
    return min(seps)


def objective_value(spec: CircuitSpec, objective: str) -> float:
    if objective == "max_avg_efficiency":
        return run_cyclic(spec).average_efficiency
    if objective == "max_min_mode_separation":
        return min_mode_separation(spec)
    if objective == "max_target_coupling":
        return float(radial_coefficients(spec.target_l, spec.source_waist, spec.cavity_waist, 0)[0] ** 2)
    raise ValueError(f"unknown objective {objective!r}; choose from {OBJECTIVES}")


def optimize_design(
    spec: CircuitSpec,
    objective: str,
    bounds: dict,
    grid_points: int = 11,
    sweeps: int = 2,
    golden_iterations: int = 40,
) -> DesignResult:
    """Coarse grid, then golden-section refinement per parameter (coordinate ascent).

    ``bounds`` maps free parameter names to ``(low, high)``.  With no free
    parameters the input spec is returned untouched.
    """
    if objective not in OBJECTIVES:
        raise ValueError(f"unknown objective {objective!r}; choose from {OBJECTIVES}")
    for name, (lo, hi) in bounds.items():
        if name not in FREE_PARAMETERS:
            raise ValueError(f"cannot optimise {name!r}; choose from {FREE_PARAMETERS}")
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise ValueError(f"bounds for {name} must be finite with low < high")
    if not bounds:
        return DesignResult(spec, objective, float("nan"), {}, ())

    def f(params):
        value = objective_value(_apply_params(spec, params), objective)
        if not math.isfinite(value):
            raise OptimizationError(f"objective {objective} is not finite", point=dict(params))
        return value

    start = {name: 0.5 * (lo + hi) for name, (lo, hi) in bounds.items()}
    if "source_waist" in bounds:
        lo, hi = bounds["source_waist"]
        start["source_waist"] = min(max(spec.source_waist, lo), hi)
    if "optical_length_offset" in bounds:
        lo, hi = bounds["optical_length_offset"]
        start["optical_length_offset"] = min(max(0.0, lo), hi)
    best, value, trace = coordinate_search(f, start, bounds, grid_points, sweeps, golden_iterations)
    return DesignResult(_apply_params(spec, best), objective, value, best, tuple(trace))
