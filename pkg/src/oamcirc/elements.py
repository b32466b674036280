"""Mode-space operators for the non-cavity optics.

Polarisation is not tracked: wave plates, q-plates and beam splitters appear
only through what they do to ``(p, l)``.  A q-plate sandwich acts as a charge
shifter, every mirror bounce and the Dove prism flip ``l -> -l``, a lens
changes the LG basis waist, and a circulator is an ideal port router.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

from .errors import TruncationError
from .modes import (
    DEFAULT_TRUNCATION,
    ModeIndex,
    ModeSpectrum,
    Truncation,
    VortexField,
    lg_overlap,
    rescale_waist,
    vortex_spectrum,
)


class Fidelity(str, enum.Enum):
    """How a charge shifter acts on the radial content.

    ``INDEX_SHIFT`` relabels ``(p, l) -> (p, l+Δl)`` (an ideal mode converter);
    ``PHASE_ONLY`` multiplies the field by ``exp(-iΔlθ)`` and re-expands it,
    which is what a spiral phase plate or q-plate really does.
    """

    INDEX_SHIFT = "index_shift"
    PHASE_ONLY = "phase_only"


@dataclass(frozen=True)
class ElementOp:
    kind: str
    delta_l: int = 0
    fidelity: Fidelity = Fidelity.INDEX_SHIFT
    new_waist: float | None = None
    power_factor: float = 1.0

    def __post_init__(self):
        if self.kind not in ("shift", "flip", "lens", "attenuator"):
            raise ValueError(f"unknown element kind {self.kind!r}")
        if self.kind == "lens" and not (self.new_waist and self.new_waist > 0):
            raise ValueError("a lens needs a positive new_waist")
        if not 0.0 <= self.power_factor <= 1.0:
            raise ValueError("power_factor must lie in [0, 1]")

    @classmethod
    def shift(cls, delta_l: int, fidelity: Fidelity = Fidelity.INDEX_SHIFT) -> "ElementOp":
        return cls("shift", delta_l=delta_l, fidelity=Fidelity(fidelity))

    @classmethod
    def flip(cls) -> "ElementOp":
        return cls("flip")

    @classmethod
    def lens(cls, new_waist: float) -> "ElementOp":
        return cls("lens", new_waist=new_waist)

    @classmethod
    def attenuator(cls, power_factor: float) -> "ElementOp":
        return cls("attenuator", power_factor=power_factor)


def _overflow(s: ModeSpectrum, dropped: dict, truncation: Truncation) -> ModeSpectrum:
    lost = sum(abs(a) ** 2 for a in dropped.values())
    if not dropped or lost == 0.0:
        return s
    msg = f"charge shift pushed {sorted(dropped)} past l_max={truncation.l_max} ({lost:.3g} of the power)"
    if truncation.policy == "fail":
        raise TruncationError(msg)
    return replace(s, truncation_loss=s.truncation_loss + lost).with_note(msg)


def apply_shift(
    s: ModeSpectrum,
    delta_l: int,
    fidelity: Fidelity = Fidelity.INDEX_SHIFT,
    truncation: Truncation = DEFAULT_TRUNCATION,
) -> ModeSpectrum:
    """Raise every topological charge by ``delta_l``."""
    if delta_l == 0:
        return s
    fidelity = Fidelity(fidelity)
    if fidelity is Fidelity.INDEX_SHIFT:
        kept, dropped = {}, {}
        for k, a in s.amplitudes.items():
            target = ModeIndex(k.p, k.l + delta_l)
            (kept if abs(target.l) <= truncation.l_max else dropped)[target] = a
        return _overflow(s.evolve(kept), dropped, truncation)

    if s.source is not None:
        src = s.source
        new_l = src.l + delta_l
        if abs(new_l) > truncation.l_max:
            return _overflow(s.evolve({}), {ModeIndex(0, new_l): src.amplitude}, truncation)
        out = vortex_spectrum(new_l, src.waist, s.basis_waist, s.wavelength, truncation, src.amplitude)
        return replace(out, notes=s.notes + out.notes)

    # general spectrum: phase-ramp matrix elements between the two l sectors
    amps, dropped = {}, {}
    for l in s.l_values():
        new_l = l + delta_l
        sector = s.sector(l)
        if abs(new_l) > truncation.l_max:
            dropped.update({ModeIndex(p, new_l): a for p, a in sector.items()})
            continue
        for q in range(truncation.p_max + 1):
            amps[ModeIndex(q, new_l)] = sum(
                a * lg_overlap(q, new_l, s.basis_waist, p, l, s.basis_waist) for p, a in sector.items()
            )
    out = s.evolve(amps)
    out = _overflow(out, dropped, truncation)
    re_expansion = max(0.0, s.power() - out.power() - sum(abs(a) ** 2 for a in dropped.values()))
    out = replace(out, truncation_loss=out.truncation_loss + re_expansion)
    if re_expansion > truncation.loss_threshold:
        out = out.with_note(f"phase-only shift by {delta_l}: re-expansion dropped {re_expansion:.3%} of the power")
    return out


def apply_flip(s: ModeSpectrum) -> ModeSpectrum:
    """Mirror image: ``(p, l) -> (p, -l)``.  An involution."""
    src = s.source
    if src is not None:
        src = VortexField(-src.l, src.waist, src.amplitude)
    return s.evolve({ModeIndex(k.p, -k.l): a for k, a in s.amplitudes.items()}, source=src)


def apply_attenuator(s: ModeSpectrum, power_factor: float) -> ModeSpectrum:
    if not 0.0 <= power_factor <= 1.0:
        raise ValueError("power_factor must lie in [0, 1]")
    g = math.sqrt(power_factor)
    src = s.source
    if src is not None:
        src = VortexField(src.l, src.waist, src.amplitude * g)
    return s.evolve(
        {k: a * g for k, a in s.amplitudes.items()}, source=src, truncation_loss=s.truncation_loss * power_factor
    )


def apply(op: ElementOp, s: ModeSpectrum, truncation: Truncation = DEFAULT_TRUNCATION) -> ModeSpectrum:
    if op.kind == "shift":
        return apply_shift(s, op.delta_l, op.fidelity, truncation)
    if op.kind == "flip":
        return apply_flip(s)
    if op.kind == "lens":
        return rescale_waist(s, op.new_waist, truncation=truncation)
    return apply_attenuator(s, op.power_factor)


@dataclass(frozen=True)
class Circulator:
    """Ideal three-port circulator: port 1 -> 2, port 2 -> 3."""

    name: str = "C"

    def route(self, entering_port: int, field):
        if entering_port == 1:
            return 2, field
        if entering_port == 2:
            return 3, field
        raise ValueError(f"{self.name}: no output defined for light entering port {entering_port}")


def route(circulator: Circulator, entering_port: int, field):
    """``(exiting_port, field)``; lossless and phase-neutral."""
    return circulator.route(entering_port, field)
