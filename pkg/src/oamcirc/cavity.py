"""Fabry-Perot cavity: transverse-mode resonances and per-mode scattering.

Frequencies are angular (rad/s) unless a name ends in ``_hz``.  The decay
rates follow the input-output convention in which the transmission falls to
one half at ``Δ = ±κ``, so the full width at half maximum is ``2κ`` in angular
units, ``κ/π`` in Hz.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT

from .errors import GeometryError
from .modes import ModeIndex

FUSED_SILICA_INDEX = 1.453


@dataclass(frozen=True)
class CavityParams:
    """Geometry and loss of one Fabry-Perot cavity.

    ``curvature_front`` faces the input and may be ``math.inf`` for a plane
    surface.  ``gouy_branch`` selects the sign in front of the square root in
    the round-trip Gouy phase and is +1 for every geometry used here.
    """

    optical_length: float
    geometric_length: float
    refractive_index: float
    curvature_front: float
    curvature_back: float
    decay_left: float
    decay_right: float
    decay_internal: float = 0.0
    gouy_branch: int = 1

    def __post_init__(self):
        for name in ("optical_length", "geometric_length", "refractive_index"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be finite and > 0, got {v!r}")
        if not math.isclose(self.optical_length, self.refractive_index * self.geometric_length, rel_tol=1e-12):
            raise ValueError("optical_length must equal refractive_index * geometric_length")
        if not (self.decay_left > 0 and self.decay_right > 0 and self.decay_internal >= 0):
            raise ValueError("decay rates must satisfy decay_left, decay_right > 0, decay_internal >= 0")
        if self.gouy_branch not in (1, -1):
            raise ValueError("gouy_branch must be +1 or -1")
        _stability_product(self)

    @classmethod
    def from_spectrum(
        cls,
        fsr_hz: float,
        fwhm_hz: float,
        curvature_back: float,
        curvature_front: float = math.inf,
        refractive_index: float = FUSED_SILICA_INDEX,
        internal_fwhm_hz: float = 0.0,
    ) -> "CavityParams":
        """Cavity with a given free spectral range and (lossless) linewidth.

        The two mirrors share the decay equally; ``internal_fwhm_hz`` adds an
        absorption channel on top of that.
        """
        if not fsr_hz > 0:
            raise ValueError("fsr_hz must be > 0")
        optical = SPEED_OF_LIGHT / (2.0 * fsr_hz)
        kl, kr = fit_decay_from_fwhm(fwhm_hz)
        return cls(
            optical_length=optical,
            geometric_length=optical / refractive_index,
            refractive_index=refractive_index,
            curvature_front=curvature_front,
            curvature_back=curvature_back,
            decay_left=kl,
            decay_right=kr,
            decay_internal=math.pi * internal_fwhm_hz,
        )

    @property
    def decay_total(self) -> float:
        return self.decay_left + self.decay_right + self.decay_internal

    @property
    def fsr_angular(self) -> float:
        """Longitudinal mode spacing ``πc / (nD)`` in rad/s."""
        return math.pi * SPEED_OF_LIGHT / self.optical_length

    def with_optical_length(self, optical_length: float) -> "CavityParams":
        """Same mirrors and decay rates, different length (temperature tuning)."""
        return replace(
            self, optical_length=optical_length, geometric_length=optical_length / self.refractive_index
        )

    def with_decay(self, decay_left: float, decay_right: float, decay_internal: float | None = None) -> "CavityParams":
        internal = self.decay_internal if decay_internal is None else decay_internal
        return replace(self, decay_left=decay_left, decay_right=decay_right, decay_internal=internal)


def _g(length: float, curvature: float) -> float:
    return 1.0 if math.isinf(curvature) else 1.0 - length / curvature


def _stability_product(c: CavityParams) -> float:
    prod = _g(c.geometric_length, c.curvature_front) * _g(c.geometric_length, c.curvature_back)
    if not 0.0 <= prod <= 1.0:
        raise GeometryError(f"unstable cavity: g1*g2 = {prod!r} outside [0, 1]")
    return prod


def accumulated_gouy(c: CavityParams) -> float:
    """One-way Gouy phase ``arccos(±sqrt(g1 g2))`` of the cavity eigenmode."""
    return math.acos(c.gouy_branch * math.sqrt(_stability_product(c)))


def _mode_offset(c: CavityParams, order: int) -> float:
    return (order + 1) * accumulated_gouy(c) / math.pi


def resonance_frequency(c: CavityParams, q: int, mode: ModeIndex) -> float:
    """Angular resonance ``(πc/nD) [q + (2p+|l|+1) φ/π]``.

    Depends on the mode only through its transverse order.
    """
    if q < 1:
        raise ValueError(f"longitudinal index q must be >= 1, got {q}")
    return c.fsr_angular * (q + _mode_offset(c, ModeIndex(*mode).order))


def nearest_detuning(c: CavityParams, mode: ModeIndex, laser_frequency: float) -> tuple[float, int]:
    """Detuning ``ω_laser - ω_res`` from the closest longitudinal resonance.

    Returns ``(detuning, q)``.  An exact midpoint goes to the lower ``q``.
    """
    if not laser_frequency > 0:
        raise ValueError("laser_frequency must be > 0")
    offset = _mode_offset(c, ModeIndex(*mode).order)
    x = laser_frequency / c.fsr_angular - offset
    q = max(1, math.ceil(x - 0.5))
    return laser_frequency - resonance_frequency(c, q, mode), q


def detunings(c: CavityParams, mode: ModeIndex, laser_frequency) -> np.ndarray:
    """Vectorised :func:`nearest_detuning`; same arithmetic, detunings only."""
    w = np.asarray(laser_frequency, dtype=float)
    offset = _mode_offset(c, ModeIndex(*mode).order)
    q = np.maximum(1.0, np.ceil(w / c.fsr_angular - offset - 0.5))
    return w - c.fsr_angular * (q + offset)


@dataclass(frozen=True)
class ScatterCoeffs:
    """Complex reflection and transmission of one mode at one detuning.

    The power coefficients are evaluated from the real Lorentzian expressions,
    the same arithmetic as :func:`transmittance`, so sweeps and single-point
    evaluations agree bit for bit.
    """

    reflection: complex
    transmission: complex
    detuning: float
    reflectance: float
    transmittance: float

    @property
    def reflection_phase(self) -> float:
        return math.atan2(self.reflection.imag, self.reflection.real)

    @property
    def transmission_phase(self) -> float:
        return math.atan2(self.transmission.imag, self.transmission.real)


def scatter(c: CavityParams, detuning: float, from_right: bool = False) -> ScatterCoeffs:
    """Input-output coefficients ``r = 1 - 2κ_in/(iΔ+κ)``, ``t = 2 sqrt(κ_l κ_r)/(iΔ+κ)``.

    ``κ_in`` is the decay through the mirror the light arrives at: the left
    mirror by default, the right one with ``from_right``.
    """
    denom = complex(c.decay_total, detuning)
    k_in = c.decay_right if from_right else c.decay_left
    r = 1.0 - 2.0 * k_in / denom
    t = 2.0 * math.sqrt(c.decay_left * c.decay_right) / denom
    d2k2 = detuning * detuning + c.decay_total * c.decay_total
    big_r = ((c.decay_total - 2.0 * k_in) ** 2 + detuning * detuning) / d2k2
    big_t = 4.0 * c.decay_left * c.decay_right / d2k2
    return ScatterCoeffs(r, t, float(detuning), float(big_r), float(big_t))


def transmittance(c: CavityParams, detuning) -> np.ndarray:
    """``|t(Δ)|²`` for an array of detunings."""
    d = np.asarray(detuning, dtype=float)
    k = c.decay_total
    return 4.0 * c.decay_left * c.decay_right / (d * d + k * k)


def linewidth_and_finesse(c: CavityParams) -> tuple[float, float, float]:
    """``(fsr_hz, fwhm_hz, finesse)`` with ``fwhm_hz = κ/π``."""
    fsr = SPEED_OF_LIGHT / (2.0 * c.optical_length)
    fwhm = c.decay_total / math.pi
    return fsr, fwhm, fsr / fwhm


def fit_decay_from_fwhm(fwhm_hz: float) -> tuple[float, float]:
    """Equal mirror decays ``κ_l = κ_r = π·fwhm/2`` reproducing a measured FWHM."""
    if not fwhm_hz > 0:
        raise ValueError("fwhm_hz must be > 0")
    k = 0.5 * math.pi * fwhm_hz
    return k, k


def mode_spacing(c: CavityParams) -> float:
    """Angular splitting between adjacent transverse orders, ``(φ/π)·FSR``."""
    return c.fsr_angular * accumulated_gouy(c) / math.pi
