"""Analytical NV-center vector magnetometry: forward spectrum, closed-form
inversion, four-axis vector reconstruction and ODMR lineshape fitting.
"""

from ._accel import BACKEND
from .core import GAMMA_NV, GTensor, NVParams, FieldPolar
from .errors import DomainError, FitError, NVMagError, SolverError
from .forward import FieldVector, ResonancePair, resonance_lines, resonances, resonances_all_axes
from .inverse import HyperfineMode, invert_pair, uncertainty_budget
from .lineshape import LineFit, Spectrum, fit_line, fwhm_voigt, sensitivity
from .vector import (
    SYMMETRY_GROUP,
    orbit_angle,
    reconstruct_lines,
    reconstruct_pairs,
    symmetry_images,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "DomainError",
    "FieldPolar",
    "FieldVector",
    "FitError",
    "GAMMA_NV",
    "GTensor",
    "HyperfineMode",
    "LineFit",
    "NVMagError",
    "NVParams",
    "ResonancePair",
    "SYMMETRY_GROUP",
    "SolverError",
    "Spectrum",
    "fit_line",
    "fwhm_voigt",
    "invert_pair",
    "orbit_angle",
    "reconstruct_lines",
    "reconstruct_pairs",
    "resonance_lines",
    "resonances",
    "resonances_all_axes",
    "sensitivity",
    "symmetry_images",
    "uncertainty_budget",
]
