"""Simulation of an OAM cyclic-transformation circuit built from Fabry-Perot mode filters."""

from .analysis import optimize_design, waist_scan, wavelength_sweep
from .cavity import CavityParams, resonance_frequency, scatter
from .circuit import CircuitSpec, ideal_spec, paper_spec, run_cyclic
from .elements import Fidelity
from .modes import ModeIndex, ModeSpectrum, Truncation, radial_coefficients, vortex_spectrum

__all__ = [
    "CavityParams",
    "CircuitSpec",
    "Fidelity",
    "ModeIndex",
    "ModeSpectrum",
    "Truncation",
    "ideal_spec",
    "optimize_design",
    "paper_spec",
    "radial_coefficients",
    "resonance_frequency",
    "run_cyclic",
    "scatter",
    "vortex_spectrum",
    "waist_scan",
    "wavelength_sweep",
]
