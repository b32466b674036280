"""Nonreciprocal Mach-Zehnder interferometer performing a cyclic OAM shift.

Signal path for one input charge ``l``::

    vortex(l) -> shift +1 -> lens -> C1 -> FP1 --t--> mirrors -> FP2 (from behind) --t--+
                                          |                                             |
                                          +--r--> C1 -> Dove prism -> C2 -> FP2 --r--> C2 -> detector

Both cavities are tuned so that ``(p=0, l=target)`` is resonant.  The
transmitted branch is flipped an odd number of times, the reflected branch one
more time than that, which maps ``{-L-1, ..., L}`` onto itself cyclically.
"""

from __future__ import annotations

import cmath
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT

from .cavity import (
    CavityParams,
    accumulated_gouy,
    linewidth_and_finesse,
    nearest_detuning,
    resonance_frequency,
    scatter,
)
from .elements import Circulator, Fidelity, apply_flip, apply_shift, route
from .errors import GeometryError
from .modes import (
    DEFAULT_TRUNCATION,
    ModeIndex,
    ModeSpectrum,
    Truncation,
    mode_overlap,
    pure_mode,
    rescale_waist,
    vortex_spectrum,
)

PAPER_WAVELENGTH = 794.9693e-9
PAPER_FSR_HZ = 7.90e9
PAPER_FWHM_HZ = 287e6
PAPER_CURVATURE = 25e-3
PAPER_CAVITY_WAIST = 50e-6
PAPER_SOURCE_WAIST = 25e-6
PAPER_MODES = (-3, -2, -1, 0, 1, 2)
MEASURED_AVERAGE_EFFICIENCY = 0.96

DETECTION_MODES = ("vortex", "modal")
THREADS_ENV = "OAMCIRC_THREADS"

C1 = Circulator("C1")
C2 = Circulator("C2")


@dataclass(frozen=True)
class CircuitSpec:
    """Everything needed to run the interferometer.

    ``detection_waist`` defaults to ``source_waist``: the detector undoes the
    preparation optics, so an unperturbed vortex is collected in full.
    ``laser_frequency`` is angular; ``None`` means "tune before use".
    """

    cavity: CavityParams
    input_modes: tuple = PAPER_MODES
    target_l: int | None = None
    wavelength: float = PAPER_WAVELENGTH
    laser_frequency: float | None = None
    source_waist: float = PAPER_SOURCE_WAIST
    cavity_waist: float = PAPER_CAVITY_WAIST
    detection_waist: float | None = None
    shift_fidelity: Fidelity = Fidelity.PHASE_ONLY
    detection: str = "vortex"
    arm_phase: float = 0.0
    mirror_flips_right_arm: int = 3
    extra_flips_left_arm: int = 1
    fp2_frequency_offset: float = 0.0
    truncation: Truncation = DEFAULT_TRUNCATION

    def __post_init__(self):
        modes = tuple(int(l) for l in self.input_modes)
        if len(modes) < 2 or len(set(modes)) != len(modes):
            raise ValueError(f"input_modes must hold at least two distinct charges, got {self.input_modes!r}")
        object.__setattr__(self, "input_modes", modes)
        target = max(modes) + 1 if self.target_l is None else int(self.target_l)
        if target != max(modes) + 1:
            raise ValueError(f"target_l must be max(input_modes) + 1 = {max(modes) + 1}, got {target}")
        object.__setattr__(self, "target_l", target)
        if self.detection_waist is None:
            object.__setattr__(self, "detection_waist", self.source_waist)
        for name in ("wavelength", "source_waist", "cavity_waist", "detection_waist"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be finite and > 0, got {v!r}")
        object.__setattr__(self, "shift_fidelity", Fidelity(self.shift_fidelity))
        if self.detection not in DETECTION_MODES:
            raise ValueError(f"detection must be one of {DETECTION_MODES}, got {self.detection!r}")
        if self.mirror_flips_right_arm < 0 or self.extra_flips_left_arm < 0:
            raise ValueError("flip counts must be >= 0")
        if target > self.truncation.l_max:
            raise ValueError(f"target charge {target} exceeds l_max={self.truncation.l_max}")

    @property
    def dimension(self) -> int:
        return len(self.input_modes)

    @property
    def left_arm_flips(self) -> int:
        return self.mirror_flips_right_arm + self.extra_flips_left_arm

    @property
    def nominal_frequency(self) -> float:
        return 2.0 * math.pi * SPEED_OF_LIGHT / self.wavelength

    def routed_output(self, input_l: int) -> int:
        """Output charge of ``input_l`` when every mode takes its nominal arm."""
        shifted = input_l + 1
        if abs(shifted) == self.target_l:
            return shifted * (-1) ** self.mirror_flips_right_arm
        return shifted * (-1) ** self.left_arm_flips

    @property
    def output_modes(self) -> tuple:
        """Detection channels: the routed outputs, in ascending order."""
        return tuple(sorted({self.routed_output(l) for l in self.input_modes}))


def paper_spec(**overrides) -> CircuitSpec:
    """Six-mode configuration with the measured cavity data."""
    cavity = CavityParams.from_spectrum(PAPER_FSR_HZ, PAPER_FWHM_HZ, PAPER_CURVATURE)
    return CircuitSpec(cavity=cavity, **overrides)


def ideal_spec(kappa_scale: float = 1e-6, **overrides) -> CircuitSpec:
    """Near-infinite-finesse limit with ideal mode converters and modal detection."""
    base = CavityParams.from_spectrum(PAPER_FSR_HZ, PAPER_FWHM_HZ, PAPER_CURVATURE)
    cavity = base.with_decay(base.decay_left * kappa_scale, base.decay_right * kappa_scale)
    kwargs = dict(
        cavity=cavity,
        source_waist=PAPER_CAVITY_WAIST,
        cavity_waist=PAPER_CAVITY_WAIST,
        shift_fidelity=Fidelity.INDEX_SHIFT,
        detection="modal",
    )
    kwargs.update(overrides)
    return CircuitSpec(**kwargs)


def with_finesse(spec: CircuitSpec, finesse: float) -> CircuitSpec:
    """Same geometry, symmetric lossless mirrors set for the given finesse."""
    fsr, _, _ = linewidth_and_finesse(spec.cavity)
    k = 0.5 * math.pi * fsr / finesse
    return replace(spec, cavity=spec.cavity.with_decay(k, k, 0.0))


def tune_to_target(spec: CircuitSpec) -> CircuitSpec:
    """Put the laser exactly on the ``(p=0, l=target)`` resonance nearest the nominal frequency."""
    cav = spec.cavity
    target = ModeIndex(0, spec.target_l)
    phi_frac = accumulated_gouy(cav) / math.pi
    for l in spec.input_modes:
        shifted = abs(l + 1)
        if shifted == spec.target_l:
            continue
        step = (spec.target_l - shifted) * phi_frac
        if math.isclose(step, round(step), abs_tol=1e-12):
            raise GeometryError(
                f"cavity cannot separate |l|={shifted} from the target |l|={spec.target_l}: "
                f"Gouy phase/pi = {phi_frac!r}"
            )
    _, q = nearest_detuning(cav, target, spec.nominal_frequency)
    return replace(spec, laser_frequency=resonance_frequency(cav, q, target))


def _tuned(spec: CircuitSpec) -> CircuitSpec:
    return spec if spec.laser_frequency is not None else tune_to_target(spec)


# --------------------------------------------------------------------------
# propagation


@dataclass(frozen=True)
class Propagation:
    """One input charge pushed through the interferometer.

    ``leaked_power`` leaves FP2 through its rear port (back into the
    transmission arm) and never reaches the detector; ``absorbed_power`` is
    cavity internal loss.  For lossless optics
    ``output.power() + leaked + absorbed + truncation_loss == 1``.
    """

    input_l: int
    incident: ModeSpectrum
    transmitted_arm: ModeSpectrum
    reflected_arm: ModeSpectrum
    output: ModeSpectrum
    leaked_power: float
    absorbed_power: float

    @property
    def truncation_loss(self) -> float:
        return self.incident.truncation_loss

    @property
    def unaccounted_power(self) -> float:
        return 1.0 - self.output.power()


def prepare_input(spec: CircuitSpec, input_l: int) -> ModeSpectrum:
    """The beam leaving the first q-plate sandwich, in the LG basis at ``source_waist``."""
    if input_l not in spec.input_modes:
        raise ValueError(f"input charge {input_l} is not in {spec.input_modes}")
    if spec.shift_fidelity is Fidelity.PHASE_ONLY:
        return vortex_spectrum(input_l, spec.source_waist, spec.source_waist, spec.wavelength, spec.truncation)
    return pure_mode(0, input_l, spec.source_waist, spec.wavelength)


def incident_on_cavity(spec: CircuitSpec, input_l: int) -> ModeSpectrum:
    """Steps before FP1: preparation, the ``+1`` shifter, and the lens."""
    s = prepare_input(spec, input_l)
    s = apply_shift(s, +1, spec.shift_fidelity, spec.truncation)
    return rescale_waist(s, spec.cavity_waist, truncation=spec.truncation)


def _flip_times(s: ModeSpectrum, n: int) -> ModeSpectrum:
    for _ in range(n):
        s = apply_flip(s)
    return s


def _coefficients(spec: CircuitSpec, s: ModeSpectrum, frequency_offset: float = 0.0, from_right: bool = False):
    laser = spec.laser_frequency - frequency_offset
    return {
        k: scatter(spec.cavity, nearest_detuning(spec.cavity, k, laser)[0], from_right=from_right)
        for k in s.amplitudes
    }


def trace_propagation(spec: CircuitSpec, input_l: int) -> Propagation:
    """Propagate one input charge and keep every intermediate field."""
    spec = _tuned(spec)
    incident = incident_on_cavity(spec, input_l)
    _, incident = route(C1, 1, incident)

    fp1 = _coefficients(spec, incident)
    absorbed = 0.0
    right, left = {}, {}
    for k, a in incident.amplitudes.items():
        co = fp1[k]
        right[k] = co.transmission * a
        left[k] = co.reflection * a
        absorbed += abs(a) ** 2 * (1.0 - co.reflectance - co.transmittance)
    right = _flip_times(incident.evolve(right), spec.mirror_flips_right_arm)
    _, left = route(C1, 2, incident.evolve(left))
    left = _flip_times(left, spec.left_arm_flips)

    # FP2: the transmitted arm arrives from behind, the reflected arm via C2
    _, left = route(C2, 1, left)
    fp2_back = _coefficients(spec, right, spec.fp2_frequency_offset, from_right=True)
    fp2_front = _coefficients(spec, left, spec.fp2_frequency_offset)
    phase = cmath.exp(1j * spec.arm_phase)
    out, back = {}, {}
    for k, a in right.amplitudes.items():
        co = fp2_back[k]
        out[k] = out.get(k, 0j) + co.transmission * a
        back[k] = back.get(k, 0j) + co.reflection * a
        absorbed += abs(a) ** 2 * (1.0 - co.reflectance - co.transmittance)
    for k, a in left.amplitudes.items():
        co = fp2_front[k]
        out[k] = out.get(k, 0j) + phase * co.reflection * a
        back[k] = back.get(k, 0j) + phase * co.transmission * a
        absorbed += abs(a) ** 2 * (1.0 - co.reflectance - co.transmittance)
    _, output = route(C2, 2, incident.evolve(out))
    leaked = sum(abs(a) ** 2 for a in back.values())
    return Propagation(input_l, incident, right, left, output, leaked, absorbed)


def propagate(spec: CircuitSpec, input_l: int) -> ModeSpectrum:
    """Output field for one input charge, in the LG basis at ``cavity_waist``."""
    return trace_propagation(spec, input_l).output


# --------------------------------------------------------------------------
# detection and the cyclic report


def detector_state(spec: CircuitSpec, l: int) -> ModeSpectrum:
    """Mode collected by the q-plate plus single-mode fibre for channel ``l``."""
    return vortex_spectrum(l, spec.detection_waist, spec.cavity_waist, spec.wavelength, spec.truncation)


def detected_power(spec: CircuitSpec, output: ModeSpectrum, l: int, detector: ModeSpectrum | None = None) -> float:
    if spec.detection == "modal":
        return output.power_in(l)
    detector = detector_state(spec, l) if detector is None else detector
    return abs(mode_overlap(detector, output)) ** 2


@dataclass(frozen=True)
class CyclicReport:
    """Power matrix for a full cyclic run.

    Rows follow ``input_modes``, columns follow ``output_modes``.
    ``unaccounted_power`` is whatever did not reach one of the detection
    channels: truncation, cavity leakage, absorption and detector mismatch.
    """

    input_modes: tuple
    output_modes: tuple
    targets: tuple
    power_matrix: np.ndarray
    efficiencies: np.ndarray
    average_efficiency: float
    unaccounted_power: np.ndarray
    truncation_loss: np.ndarray
    leaked_power: np.ndarray
    notes: tuple = field(default=())

    def target_column(self, row: int) -> int:
        return self.output_modes.index(self.targets[row])

    def summary(self, reference: float = MEASURED_AVERAGE_EFFICIENCY) -> str:
        lines = [f"{'input':>6} {'target':>6} {'efficiency':>11} {'unaccounted':>12}"]
        for i, l in enumerate(self.input_modes):
            lines.append(
                f"{l:>6d} {self.targets[i]:>6d} {self.efficiencies[i]:>11.4f} {self.unaccounted_power[i]:>12.4f}"
            )
        dev = self.average_efficiency - reference
        lines.append(
            f"average efficiency {self.average_efficiency:.4f} "
            f"(measured reference {reference:.2f}, deviation {dev:+.4f})"
        )
        return "\n".join(lines)


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def run_cyclic(spec: CircuitSpec, threads: int | None = None) -> CyclicReport:
    """Send every input charge through the circuit and project onto each channel."""
    spec = _tuned(spec)
    outputs = spec.output_modes
    detectors = None if spec.detection == "modal" else {l: detector_state(spec, l) for l in outputs}
    threads = default_threads() if threads is None else max(1, threads)

    def one(l):
        return trace_propagation(spec, l)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            runs = list(pool.map(one, spec.input_modes))
    else:
        runs = [one(l) for l in spec.input_modes]

    n, m = len(spec.input_modes), len(outputs)
    matrix = np.zeros((n, m))
    for i, run in enumerate(runs):
        for j, l in enumerate(outputs):
            det = None if detectors is None else detectors[l]
            matrix[i, j] = detected_power(spec, run.output, l, det)
    targets = tuple(spec.routed_output(l) for l in spec.input_modes)
    totals = matrix.sum(axis=1)
    correct = np.array([matrix[i, outputs.index(t)] for i, t in enumerate(targets)])
    with np.errstate(invalid="ignore", divide="ignore"):
        eff = np.where(totals > 0, correct / np.where(totals > 0, totals, 1.0), 0.0)
    notes = tuple(note for run in runs for note in run.output.notes)
    return CyclicReport(
        input_modes=spec.input_modes,
        output_modes=outputs,
        targets=targets,
        power_matrix=matrix,
        efficiencies=eff,
        average_efficiency=float(eff.mean()),
        unaccounted_power=1.0 - totals,
        truncation_loss=np.array([r.truncation_loss for r in runs]),
        leaked_power=np.array([r.leaked_power for r in runs]),
        notes=notes,
    )
