"""Resonance frequencies from a known field (closed-form trigonometric roots)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .core import CubicCoeffs, FieldPolar, NVParams, cubic_coeffs
from .errors import DiscriminantViolation

LATTICE_AXES = K.AXES.copy()
LATTICE_AXES.setflags(write=False)


@dataclass(frozen=True)
class ResonancePair:
    """Lower/upper spin-resonance frequencies of one NV axis (MHz)."""

    f_l_mhz: float
    f_u_mhz: float
    sigma_l: float = 0.0
    sigma_u: float = 0.0

    def __post_init__(self):
        if self.sigma_l < 0 or self.sigma_u < 0:
            raise ValueError("uncertainties must be non-negative")

    @property
    def splitting(self) -> float:
        return self.f_u_mhz - self.f_l_mhz


@dataclass(frozen=True)
class FieldVector:
    """Field in diamond-lattice coordinates.

    ``ssr`` and ``signs`` describe the reconstruction that produced it (zero /
    empty for generator-side vectors).
    """

    b_mt: float
    b_hat: tuple
    ssr: float = 0.0
    signs: tuple = ()
    sigma_b_mt: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.b_hat, dtype=float)
        n = float(np.linalg.norm(v))
        if self.b_mt > 0 and abs(n - 1.0) > 1e-9:
            raise ValueError(f"b_hat must be a unit vector, |b_hat| = {n}")
        object.__setattr__(self, "b_hat", tuple(float(x) for x in v))

    @classmethod
    def from_components(cls, bx: float, by: float, bz: float, **kw) -> "FieldVector":
        v = np.array([bx, by, bz], dtype=float)
        n = float(np.linalg.norm(v))
        if n == 0.0:
            return cls(0.0, (0.0, 0.0, 1.0), **kw)
        return cls(n, tuple(v / n), **kw)

    @classmethod
    def from_spherical(cls, b_mt: float, theta: float, phi: float, **kw) -> "FieldVector":
        """Polar angle ``theta`` from the lattice z axis, azimuth ``phi`` from x."""
        st = math.sin(theta)
        return cls(b_mt, (st * math.cos(phi), st * math.sin(phi), math.cos(theta)), **kw)

    @property
    def vector(self) -> np.ndarray:
        return self.b_mt * np.asarray(self.b_hat)


def viete_roots(c: CubicCoeffs) -> np.ndarray:
    """Ascending roots of lambda^3 + p lambda + q (three real roots required)."""
    roots = K.viete(c.p, c.q)
    if math.isnan(roots[0]):
        raise DiscriminantViolation(
            f"no three real roots for p={c.p!r}, q={c.q!r} (arccos argument outside [-1, 1])"
        )
    return np.array(roots)


def resonances(params: NVParams, field: FieldPolar) -> ResonancePair:
    lam = viete_roots(cubic_coeffs(params, field))
    return ResonancePair(float(lam[1] - lam[0]), float(lam[2] - lam[0]))


def axis_angles(b_hat) -> np.ndarray:
    """Angles in [0, pi/2] between a direction and each of the four NV axes."""
    c = np.abs(LATTICE_AXES @ np.asarray(b_hat, dtype=float))
    return np.arccos(np.clip(c, 0.0, 1.0))


def resonances_all_axes(params: NVParams, b_vec: FieldVector) -> list[ResonancePair]:
    if not np.all(np.isfinite(b_vec.b_hat)) or not math.isfinite(b_vec.b_mt):
        raise ValueError("field vector must be finite")
    out = []
    for theta in axis_angles(b_vec.b_hat):
        field = FieldPolar(b_vec.b_mt, float(theta), params.gamma_mhz_per_mt)
        out.append(resonances(params, field))
    return out


def resonance_lines(params: NVParams, b_vec: FieldVector) -> np.ndarray:
    """All eight lines of a four-axis spectrum, sorted ascending."""
    pairs = resonances_all_axes(params, b_vec)
    return np.sort([f for p in pairs for f in (p.f_l_mhz, p.f_u_mhz)])


def resonance_grid(params: NVParams, b_mt, theta_rad) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised (f_l, f_u) over broadcast arrays of magnitude and angle."""
    b, t = np.broadcast_arrays(np.asarray(b_mt, float), np.asarray(theta_rad, float))
    f_l, f_u = K.resonances_batch(
        params.d_mhz, params.e_mhz, b * params.gamma_mhz_per_mt, np.cos(t) ** 2
    )
    if np.isnan(f_l).any():
        raise DiscriminantViolation("discriminant violation inside the grid")
    return f_l.reshape(b.shape), f_u.reshape(b.shape)
