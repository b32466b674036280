"""Laguerre-Gaussian mode algebra at the beam waist.

Every field is normalised to unit power, ``∫∫ |u|² r dr dθ = 1``.  Azimuthal
integrals are carried out analytically (different ``l`` never mix through a
rotationally symmetric element), so all numerical integration is radial and
one-dimensional.  Radial integrals are dimensionless: only the ratio of the two
waists involved matters, which is what the caches key on.
"""

from __future__ import annotations

import logging
import math
import types
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Mapping, NamedTuple

import numpy as np
from scipy import integrate

from .errors import NumericalError, QuadratureError

log = logging.getLogger(__name__)

DEFAULT_P_MAX = 10
DEFAULT_L_MAX = 6
POWER_EPS = 1e-9

QUAD_EPSREL = 1e-10
QUAD_EPSABS = 1e-13
QUAD_LIMIT = 500
RADIAL_EXTENT = 8.0  # integrate over r in [0, RADIAL_EXTENT * max(waists)]

_LOG_2_OVER_PI = math.log(2.0 / math.pi)


class ModeIndex(NamedTuple):
    """LG basis label: radial index ``p`` and topological charge ``l``."""

    p: int
    l: int

    @property
    def order(self) -> int:
        """Transverse order ``2p + |l|``, which fixes the Gouy phase."""
        return 2 * self.p + abs(self.l)


def mode_index(p: int, l: int, l_max: int = DEFAULT_L_MAX) -> ModeIndex:
    """Validated :class:`ModeIndex` constructor."""
    if int(p) != p or int(l) != l:
        raise ValueError(f"mode indices must be integers, got p={p!r}, l={l!r}")
    if p < 0:
        raise ValueError(f"radial index must be >= 0, got p={p}")
    if abs(l) > l_max:
        raise ValueError(f"|l|={abs(l)} exceeds l_max={l_max}")
    return ModeIndex(int(p), int(l))


def _positive(name, value):
    if not math.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be finite and > 0, got {value!r}")
    return float(value)


@dataclass(frozen=True)
class BeamParams:
    """Waist radius and wavelength of a paraxial beam, in metres."""

    waist_radius: float
    wavelength: float

    def __post_init__(self):
        _positive("waist_radius", self.waist_radius)
        _positive("wavelength", self.wavelength)

    @property
    def rayleigh_range(self) -> float:
        return math.pi * self.waist_radius**2 / self.wavelength

    def radius_at(self, z: float) -> float:
        return self.waist_radius * math.sqrt(1.0 + (z / self.rayleigh_range) ** 2)


@dataclass(frozen=True)
class Truncation:
    """Basis truncation and the policy for power that falls outside it.

    ``policy`` is ``"warn"`` (record the loss on the result) or ``"fail"``
    (raise :class:`~oamcirc.errors.TruncationError` when ``|l|`` overflows).
    """

    p_max: int = DEFAULT_P_MAX
    l_max: int = DEFAULT_L_MAX
    loss_threshold: float = 0.01
    policy: str = "warn"

    def __post_init__(self):
        if self.p_max < 0 or self.l_max < 0:
            raise ValueError("p_max and l_max must be >= 0")
        if self.policy not in ("warn", "fail"):
            raise ValueError(f"policy must be 'warn' or 'fail', got {self.policy!r}")
        if not 0 <= self.loss_threshold <= 1:
            raise ValueError("loss_threshold must lie in [0, 1]")


DEFAULT_TRUNCATION = Truncation()


@dataclass(frozen=True)
class VortexField:
    """Closed-form phase-only vortex ``amplitude · N exp(-r²/w²) exp(-ilθ)``.

    ``N`` normalises the bare field to unit power, so the physical power is
    ``|amplitude|²``.
    """

    l: int
    waist: float
    amplitude: complex = 1.0

    @property
    def power(self) -> float:
        return abs(self.amplitude) ** 2


@dataclass(frozen=True)
class ModeSpectrum:
    """Monochromatic field expanded over LG modes at ``basis_waist``.

    ``truncation_loss`` is the power discarded so far by basis truncation and
    ``notes`` collects the warnings raised along the way.  When the spectrum is
    an exact truncation of a known phase-only vortex, ``source`` holds it so
    later re-expansions stay exact instead of compounding truncation error.
    """

    basis_waist: float
    wavelength: float
    amplitudes: Mapping[ModeIndex, complex]
    truncation_loss: float = 0.0
    notes: tuple = ()
    source: VortexField | None = None

    def __post_init__(self):
        _positive("basis_waist", self.basis_waist)
        _positive("wavelength", self.wavelength)
        amps = {}
        for key, value in self.amplitudes.items():
            idx = ModeIndex(*key)
            if idx.p < 0:
                raise ValueError(f"negative radial index in {idx}")
            value = complex(value)
            if not (math.isfinite(value.real) and math.isfinite(value.imag)):
                raise NumericalError(f"non-finite amplitude at {idx}")
            amps[idx] = value
        amps = dict(sorted(amps.items(), key=lambda kv: (kv[0].l, kv[0].p)))
        object.__setattr__(self, "amplitudes", types.MappingProxyType(amps))
        power = sum(abs(a) ** 2 for a in amps.values())
        if power > 1.0 + POWER_EPS:
            raise ValueError(f"spectrum power {power!r} exceeds 1")

    def __getitem__(self, key) -> complex:
        return self.amplitudes.get(ModeIndex(*key), 0j)

    def power(self) -> float:
        return sum(abs(a) ** 2 for a in self.amplitudes.values())

    def l_values(self) -> list[int]:
        return sorted({k.l for k in self.amplitudes})

    def power_in(self, l: int) -> float:
        """Total power carried by charge ``l``, summed over ``p``."""
        return sum(abs(a) ** 2 for k, a in self.amplitudes.items() if k.l == l)

    def sector(self, l: int) -> dict[int, complex]:
        return {k.p: a for k, a in self.amplitudes.items() if k.l == l}

    def evolve(self, amplitudes, **changes) -> "ModeSpectrum":
        """Copy with new amplitudes; ``source`` is dropped unless given."""
        changes.setdefault("source", None)
        return replace(self, amplitudes=amplitudes, **changes)

    def with_note(self, note: str) -> "ModeSpectrum":
        log.debug(note)
        return replace(self, notes=self.notes + (note,))


# --------------------------------------------------------------------------
# field evaluation


def laguerre(p: int, alpha: float, x):
    """Generalised Laguerre polynomial ``L_p^alpha(x)`` by upward recurrence."""
    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if p == 0:
        return prev
    cur = 1.0 + alpha - x
    for k in range(1, p):
        prev, cur = cur, ((2 * k + 1 + alpha - x) * cur - (k + alpha) * prev) / (k + 1)
    return cur


def _log_norm(p: int, m: int) -> float:
    # log sqrt(2 p! / (pi (p+m)!)) for unit waist
    return 0.5 * (_LOG_2_OVER_PI + math.lgamma(p + 1) - math.lgamma(p + m + 1))


def lg_radial(p: int, l: int, waist: float, r):
    """Real radial profile of ``u_{p,l}`` at the waist, normalisation included."""
    m = abs(l)
    r = np.asarray(r, dtype=float)
    s = r / waist
    x = 2.0 * s * s
    with np.errstate(over="ignore", invalid="ignore"):
        out = math.exp(_log_norm(p, m)) / waist * x ** (0.5 * m) * laguerre(p, m, x) * np.exp(-s * s)
    if not np.all(np.isfinite(out)):
        raise NumericalError(f"non-finite LG radial value for p={p}, l={l}")
    return out


def _check_inputs(r, theta):
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if not (np.all(np.isfinite(r)) and np.all(np.isfinite(theta))):
        raise ValueError("r and theta must be finite")
    if np.any(r < 0):
        raise ValueError("r must be >= 0")
    return r, theta


def lg_field_at_waist(mode: ModeIndex, beam: BeamParams, r, theta):
    """Complex LG field ``u_{p,l}(r, θ)`` in the waist plane, unit power."""
    r, theta = _check_inputs(r, theta)
    p, l = mode
    out = lg_radial(p, l, beam.waist_radius, r) * np.exp(-1j * l * theta)
    return out[()] if out.ndim == 0 else out


def gouy_phase(z: float, z_r: float) -> float:
    """Gouy phase ``arctan(z / z_R)``."""
    if not z_r > 0:
        raise ValueError(f"Rayleigh range must be > 0, got {z_r!r}")
    return math.atan(z / z_r)


def _vortex_radial(waist: float, r):
    s = np.asarray(r, dtype=float) / waist
    return math.sqrt(2.0 / math.pi) / waist * np.exp(-s * s)


def vortex_field(l: int, waist: float, r, theta):
    """Unit-power phase-only vortex ``N exp(-r²/w²) exp(-ilθ)``.

    This is what a spiral phase element makes of a Gaussian: the amplitude is
    untouched, so ``|vortex_field|`` does not depend on ``l`` or ``θ``.
    """
    _positive("waist", waist)
    r, theta = _check_inputs(r, theta)
    out = _vortex_radial(waist, r) * np.exp(-1j * l * theta)
    return out[()] if out.ndim == 0 else out


# --------------------------------------------------------------------------
# radial overlaps


def _radial_quad(f, upper: float) -> float:
    res = integrate.quad(
        f, 0.0, upper, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=QUAD_LIMIT, full_output=1
    )
    if len(res) > 3:
        raise QuadratureError(f"radial integral did not converge: {res[3].splitlines()[0]}")
    if not math.isfinite(res[0]):
        raise NumericalError("radial integral is not finite")
    return res[0]


@lru_cache(maxsize=None)
def _lg_vortex(p: int, m: int, ratio: float) -> float:
    # 2π ∫ R_{p,m}(x; 1) V(x; ratio) x dx, i.e. <u_{p,l}(w_b) | vortex_l(w_s)> with ratio = w_s / w_b
    upper = RADIAL_EXTENT * max(1.0, ratio)
    return _radial_quad(
        lambda x: 2.0 * math.pi * x * float(lg_radial(p, m, 1.0, x) * _vortex_radial(ratio, x)), upper
    )


@lru_cache(maxsize=None)
def _lg_lg(p1: int, m1: int, p2: int, m2: int, ratio: float) -> float:
    # 2π ∫ R_{p1,m1}(x; 1) R_{p2,m2}(x; ratio) x dx
    upper = RADIAL_EXTENT * max(1.0, ratio)
    return _radial_quad(
        lambda x: 2.0 * math.pi * x * float(lg_radial(p1, m1, 1.0, x) * lg_radial(p2, m2, ratio, x)),
        upper,
    )


def lg_overlap(p1: int, l1: int, waist1: float, p2: int, l2: int, waist2: float) -> float:
    """Radial part of ``<u_{p1,l1}(w1) | u_{p2,l2}(w2)>`` with the ``θ`` factor dropped.

    When ``l1 == l2`` this is the full inner product.  With ``l1 != l2`` it is
    the matrix element of the phase ramp ``exp(-i(l1-l2)θ)`` between the two
    modes, which is what a phase-only charge shift needs.
    """
    m1, m2 = abs(l1), abs(l2)
    if m1 == m2 and math.isclose(waist1, waist2, rel_tol=1e-12):
        return 1.0 if p1 == p2 else 0.0
    # canonical orientation keeps <a|b> and <b|a> on the same cached integral
    if waist1 <= waist2:
        return _lg_lg(p1, m1, p2, m2, waist2 / waist1)
    return _lg_lg(p2, m2, p1, m1, waist1 / waist2)


def radial_coefficients_closed_form(l: int, p_max: int) -> np.ndarray:
    r"""LG amplitudes of a phase-only vortex at matching waists, in closed form.

    ``C_p = sqrt((p+|l|)!/p!) Γ(p+|l|/2) Γ(|l|/2+1) / (Γ(|l|/2) Γ(p+|l|+1))``

    evaluated in log space.  Singular for ``l = 0``.
    """
    m = abs(l)
    if m == 0:
        raise ValueError("closed form is singular at l = 0")
    lg = math.lgamma
    head = lg(0.5 * m + 1) - lg(0.5 * m)
    return np.array(
        [
            math.exp(
                0.5 * (lg(p + m + 1) - lg(p + 1)) + lg(p + 0.5 * m) + head - lg(p + m + 1)
            )
            for p in range(p_max + 1)
        ]
    )


def radial_coefficients_quadrature(l: int, source_waist: float, basis_waist: float, p_max: int) -> np.ndarray:
    """``C_p = <u_{p,l}(basis_waist) | vortex_l(source_waist)>`` by adaptive quadrature."""
    _positive("source_waist", source_waist)
    _positive("basis_waist", basis_waist)
    ratio = source_waist / basis_waist
    return np.array([_lg_vortex(p, abs(l), ratio) for p in range(p_max + 1)])


def radial_coefficients(l: int, source_waist: float, basis_waist: float, p_max: int = DEFAULT_P_MAX) -> np.ndarray:
    """Radial amplitudes ``C_0 .. C_{p_max}`` of a phase-only vortex.

    Matching waists use the closed form (or ``(1, 0, ...)`` when ``l = 0``);
    otherwise the overlap integral is evaluated numerically.  The quadrature is
    the reference definition; the closed form is checked against it in tests.
    """
    if p_max < 0:
        raise ValueError("p_max must be >= 0")
    _positive("source_waist", source_waist)
    _positive("basis_waist", basis_waist)
    if math.isclose(source_waist, basis_waist, rel_tol=1e-12):
        if l == 0:
            out = np.zeros(p_max + 1)
            out[0] = 1.0
            return out
        return radial_coefficients_closed_form(l, p_max)
    return radial_coefficients_quadrature(l, source_waist, basis_waist, p_max)


# --------------------------------------------------------------------------
# spectra


def pure_mode(p: int, l: int, waist: float, wavelength: float) -> ModeSpectrum:
    """Unit-power spectrum holding the single mode ``(p, l)``."""
    spec = ModeSpectrum(waist, wavelength, {ModeIndex(p, l): 1.0})
    if p == 0 and l == 0:
        # the fundamental Gaussian is also the l = 0 vortex
        spec = replace(spec, source=VortexField(0, waist))
    return spec


def _loss_note(spec: ModeSpectrum, added: float, truncation: Truncation, what: str) -> ModeSpectrum:
    if added > truncation.loss_threshold:
        return spec.with_note(f"{what}: truncation at p_max={truncation.p_max} dropped {added:.3%} of the power")
    return spec


def vortex_spectrum(
    l: int,
    source_waist: float,
    basis_waist: float,
    wavelength: float,
    truncation: Truncation = DEFAULT_TRUNCATION,
    amplitude: complex = 1.0,
) -> ModeSpectrum:
    """Expand ``amplitude · vortex_l(source_waist)`` over LG modes at ``basis_waist``."""
    if abs(l) > truncation.l_max:
        raise ValueError(f"|l|={abs(l)} exceeds l_max={truncation.l_max}")
    coeffs = radial_coefficients(l, source_waist, basis_waist, truncation.p_max)
    amps = {ModeIndex(p, l): amplitude * c for p, c in enumerate(coeffs)}
    kept = abs(amplitude) ** 2 * float(np.sum(coeffs**2))
    loss = max(0.0, abs(amplitude) ** 2 - kept)
    spec = ModeSpectrum(
        basis_waist, wavelength, amps, truncation_loss=loss, source=VortexField(l, source_waist, amplitude)
    )
    return _loss_note(spec, loss, truncation, f"vortex l={l}")


def _check_wavelength(a: ModeSpectrum, b: ModeSpectrum):
    if not math.isclose(a.wavelength, b.wavelength, rel_tol=1e-12):
        raise ValueError(f"wavelength mismatch: {a.wavelength!r} vs {b.wavelength!r}")


def mode_overlap(a: ModeSpectrum, b: ModeSpectrum) -> complex:
    """Inner product ``<a|b>``; the two spectra may use different basis waists."""
    _check_wavelength(a, b)
    total = 0j
    if math.isclose(a.basis_waist, b.basis_waist, rel_tol=1e-12):
        for key, amp in a.amplitudes.items():
            if key in b.amplitudes:
                total += amp.conjugate() * b.amplitudes[key]
        return total
    for l in set(a.l_values()) & set(b.l_values()):
        sa, sb = a.sector(l), b.sector(l)
        for p1, x in sa.items():
            for p2, y in sb.items():
                total += x.conjugate() * y * lg_overlap(p1, l, a.basis_waist, p2, l, b.basis_waist)
    return total


def rescale_waist(
    s: ModeSpectrum,
    new_basis_waist: float,
    p_max: int | None = None,
    truncation: Truncation = DEFAULT_TRUNCATION,
) -> ModeSpectrum:
    """Re-express ``s`` over LG modes at ``new_basis_waist``.

    The physical field is unchanged and ``l`` content is preserved.  Power that
    lands beyond ``p_max`` is added to ``truncation_loss``; a loss above the
    truncation threshold is attached as a note.
    """
    _positive("new_basis_waist", new_basis_waist)
    p_max = truncation.p_max if p_max is None else p_max
    if math.isclose(new_basis_waist, s.basis_waist, rel_tol=1e-12):
        return s
    if s.source is not None:
        src = s.source
        out = vortex_spectrum(
            src.l, src.waist, new_basis_waist, s.wavelength, replace(truncation, p_max=p_max), src.amplitude
        )
        # exact re-expansion: the loss is measured against the known field, not accumulated
        return replace(out, notes=s.notes + out.notes)
    amps = {}
    for l in s.l_values():
        sector = s.sector(l)
        for q in range(p_max + 1):
            amps[ModeIndex(q, l)] = sum(
                a * lg_overlap(q, l, new_basis_waist, p, l, s.basis_waist) for p, a in sector.items()
            )
    out = s.evolve(amps, basis_waist=new_basis_waist)
    added = max(0.0, s.power() - out.power())
    out = replace(out, truncation_loss=s.truncation_loss + added)
    return _loss_note(out, added, truncation, "waist rescale")
