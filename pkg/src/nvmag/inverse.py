"""Field magnitude and cone angle from a measured resonance pair, plus the
aligned-field approximation, hyperfine preprocessing and uncertainty budget.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _kernels as K
from .core import G_REF, FieldPolar, GTensor, NVParams, anisotropy_discrepancy
from .errors import (
    AngleOutOfRange,
    InconsistentResonances,
    SplittingBelowStrain,
    WrongLineCount,
    ZeroField,
)
from .forward import ResonancePair, resonance_grid, resonances

COS_SQ_CLAMP = 1e-6


class Estimate(NamedTuple):
    value: float
    variance: float

    @property
    def sigma(self) -> float:
        return math.sqrt(self.variance)


@dataclass(frozen=True)
class AxisMeasurement:
    eff_sq_mhz2: float
    cos_sq_theta: float
    var_cos_sq: float = 0.0
    var_eff_sq: float = 0.0

    def __post_init__(self):
        if self.eff_sq_mhz2 < 0:
            raise ValueError("eff_sq_mhz2 must be >= 0")
        if not 0.0 <= self.cos_sq_theta <= 1.0:
            raise ValueError("cos_sq_theta must lie in [0, 1]")
        if self.var_cos_sq < 0 or self.var_eff_sq < 0:
            raise ValueError("variances must be >= 0")

    def b_mt(self, gamma_mhz_per_mt: float) -> float:
        return math.sqrt(self.eff_sq_mhz2) / gamma_mhz_per_mt

    @property
    def theta_rad(self) -> float:
        return math.acos(math.sqrt(self.cos_sq_theta))


class HyperfineMode(enum.Enum):
    NONE = "none"
    N14 = "n14"
    N15 = "n15"

    @property
    def line_count(self) -> int:
        return {"none": 1, "n14": 3, "n15": 2}[self.value]


def _sigmas(params: NVParams, pair: ResonancePair):
    return pair.sigma_u, pair.sigma_l, params.sigma_d, params.sigma_e


def field_magnitude_sq(params: NVParams, pair: ResonancePair) -> Estimate:
    """B_eff**2 (MHz**2) with first-order propagated variance."""
    if pair.f_l_mhz > pair.f_u_mhz:
        raise ValueError("expected f_l <= f_u")
    d, e = params.d_mhz, params.e_mhz
    x = K.field_sq(pair.f_u_mhz, pair.f_l_mhz, d, e)
    grad = K.field_sq_grad(pair.f_u_mhz, pair.f_l_mhz, d, e)
    var = sum((g * s) ** 2 for g, s in zip(grad, _sigmas(params, pair)))
    sig = max(pair.sigma_u, pair.sigma_l, 0.01)
    tol = 10.0 * sig * sig + 5.0 * math.sqrt(var)
    if x < 0.0:
        if x < -tol:
            raise InconsistentResonances(
                f"B_eff^2 = {x:.6g} MHz^2 < -{tol:.3g}: pair ({pair.f_l_mhz}, {pair.f_u_mhz})"
                f" incompatible with D={d}, E={e}"
            )
        x = 0.0
    return Estimate(x, var)


def cone_angle(params: NVParams, pair: ResonancePair, eff_sq: float) -> Estimate:
    """cos^2(theta) with first-order propagated variance (B_eff**2 eliminated)."""
    if not eff_sq > 0.0:
        raise ZeroField("angle to the NV axis is undefined at zero field")
    d, e = params.d_mhz, params.e_mhz
    c2 = K.cos_sq_theta(pair.f_u_mhz, pair.f_l_mhz, d, e, eff_sq)
    grad = K.cos_sq_grad(pair.f_u_mhz, pair.f_l_mhz, d, e)
    var = sum((g * s) ** 2 for g, s in zip(grad, _sigmas(params, pair)))
    tol = COS_SQ_CLAMP + 5.0 * math.sqrt(var)
    if c2 < -tol or c2 > 1.0 + tol:
        raise AngleOutOfRange(f"cos^2(theta) = {c2:.9g} outside [0, 1]")
    return Estimate(min(max(c2, 0.0), 1.0), var)


def invert_pair(params: NVParams, pair: ResonancePair) -> AxisMeasurement:
    x = field_magnitude_sq(params, pair)
    c = cone_angle(params, pair, x.value)
    return AxisMeasurement(x.value, c.value, c.variance, x.variance)


def field_from_pair(params: NVParams, pair: ResonancePair, gamma: float | None = None) -> float:
    """Field magnitude (mT) from the exact inverse; ``gamma`` overrides params."""
    g = params.gamma_mhz_per_mt if gamma is None else gamma
    return math.sqrt(field_magnitude_sq(params, pair).value) / g


def aligned_field_approx(params: NVParams, pair: ResonancePair) -> float:
    """Field magnitude (mT) assuming the field lies along the NV axis."""
    radicand = 0.25 * (pair.f_u_mhz - pair.f_l_mhz) ** 2 - params.e_mhz**2
    if radicand < 0.0:
        raise SplittingBelowStrain(
            f"half splitting {0.5 * pair.splitting:.6g} MHz below E = {params.e_mhz} MHz"
        )
    return math.sqrt(radicand) / params.gamma_mhz_per_mt


def alignment_error_map(params: NVParams, b_grid, theta_grid) -> np.ndarray:
    """|B_approx - B_true| in mT; rows follow ``b_grid``, columns ``theta_grid``."""
    b = np.asarray(b_grid, dtype=float)
    t = np.asarray(theta_grid, dtype=float)
    if b.size == 0 or t.size == 0:
        raise ValueError("grids must be non-empty")
    bb, tt = np.meshgrid(b, t, indexing="ij")
    f_l, f_u = resonance_grid(params, bb, tt)
    radicand = 0.25 * (f_u - f_l) ** 2 - params.e_mhz**2
    if (radicand < 0).any():
        raise SplittingBelowStrain("splitting below strain inside the grid")
    return np.abs(np.sqrt(radicand) / params.gamma_mhz_per_mt - bb)


def preprocess_hyperfine(lines, mode: HyperfineMode = HyperfineMode.NONE, sigmas=None):
    """Collapse the hyperfine lines of one resonance to (frequency, sigma).

    14N: the unshifted m_I = 0 middle line. 15N: the mean of the doublet.
    """
    mode = HyperfineMode(mode)
    f = np.sort(np.atleast_1d(np.asarray(lines, dtype=float)))
    if f.size != mode.line_count:
        raise WrongLineCount(f"{mode.name} expects {mode.line_count} lines, got {f.size}")
    s = np.zeros_like(f) if sigmas is None else np.atleast_1d(np.asarray(sigmas, dtype=float))
    if s.size != f.size:
        raise WrongLineCount("sigmas must match lines")
    if sigmas is not None:
        s = s[np.argsort(np.asarray(lines, dtype=float).ravel(), kind="stable")]
    if mode is HyperfineMode.N14:
        return float(f[1]), float(s[1])
    if mode is HyperfineMode.N15:
        return float(0.5 * (f[0] + f[1])), float(0.5 * math.hypot(s[0], s[1]))
    return float(f[0]), float(s[0])


FELTON_G = GTensor(2.0031, 2.0029)
FELTON_G_ISO = GTensor.iso(2.0030)


@dataclass
class UncertaintyBudget:
    """Relative field uncertainties, one entry per source (never summed)."""

    b_mt: float
    relative: dict = field(default_factory=dict)

    def absolute_ut(self) -> dict:
        return {k: v * self.b_mt * 1e3 for k, v in self.relative.items()}


def uncertainty_budget(
    params: NVParams,
    b_mt: float,
    theta: float,
    fit_sigma_mhz: float = 0.01,
    *,
    sigma_g: float | None = None,
    sigma_d: float | None = None,
    sigma_e: float | None = None,
    g_iso: GTensor = FELTON_G_ISO,
    g_aniso: GTensor | None = FELTON_G,
) -> UncertaintyBudget:
    """Itemised relative uncertainty of a field-magnitude measurement.

    The g-factor term uses ``sigma_g / 2.0028`` when ``sigma_g`` is given and
    ``params.sigma_gamma / gamma`` otherwise. D, E and line-fit terms are the
    first-order propagation of ``fit_sigma_mhz`` (or the per-constant
    overrides) through the exact magnitude formula. ``f_fit`` is the larger of
    the upper/lower line contributions, both of which are also reported.
    """
    if not b_mt > 0:
        raise ValueError("b_mt must be positive")
    sd = fit_sigma_mhz if sigma_d is None else sigma_d
    se = fit_sigma_mhz if sigma_e is None else sigma_e
    pair = resonances(params, FieldPolar(b_mt, theta, params.gamma_mhz_per_mt))
    d, e = params.d_mhz, params.e_mhz
    eff = b_mt * params.gamma_mhz_per_mt
    gu, gl, gd, ge = K.field_sq_grad(pair.f_u_mhz, pair.f_l_mhz, d, e)
    # d(B_eff)/dv = d(B_eff^2)/dv / (2 B_eff); relative -> divide by B_eff again
    rel = lambda g, s: abs(g) * s / (2.0 * eff * eff)  # noqa: E731

    if sigma_g is not None:
        gamma_rel = sigma_g / G_REF
    else:
        gamma_rel = params.sigma_gamma / params.gamma_mhz_per_mt
    if g_aniso is None:
        aniso = 0.0
    else:
        aniso = anisotropy_discrepancy(params, b_mt, theta, g_iso, g_aniso) / b_mt
    theta_err = float(alignment_error_map(params, [b_mt], [theta])[0, 0]) / b_mt
    f_u_rel = rel(gu, fit_sigma_mhz)
    f_l_rel = rel(gl, fit_sigma_mhz)
    items = {
        "gamma_uncertainty": gamma_rel,
        "g_anisotropy": aniso,
        "theta_zero_approx": theta_err,
        "d_fit": rel(gd, sd),
        "e_fit": rel(ge, se),
        "f_fit": max(f_u_rel, f_l_rel),
        "f_u_fit": f_u_rel,
        "f_l_fit": f_l_rel,
    }
    return UncertaintyBudget(b_mt, items)
