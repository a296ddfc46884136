"""NV ground-state spin model: constants, Hamiltonian, characteristic polynomial.

Units throughout: D, E and frequencies in MHz, fields in mT, gyromagnetic
ratio in MHz/mT.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .errors import NonSymmetric, SolverError

GAMMA_NV = 28.032  # MHz/mT  (28.032 GHz/T)
SIGMA_GAMMA_NV = 0.004
D_ROOM_TEMP = 2870.0
G_REF = 2.0028
SIGMA_G_REF = 0.0003

# spin-1 matrices in the |+1>, |0>, |-1> basis
S_X = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=complex) / math.sqrt(2)
S_Y = np.array([[0, -1j, 0], [1j, 0, -1j], [0, 1j, 0]], dtype=complex) / math.sqrt(2)
S_Z = np.diag([1.0, 0.0, -1.0]).astype(complex)


@dataclass(frozen=True)
class NVParams:
    """Calibration constants of one diamond sample."""

    d_mhz: float = D_ROOM_TEMP
    e_mhz: float = 0.0
    gamma_mhz_per_mt: float = GAMMA_NV
    sigma_d: float = 0.0
    sigma_e: float = 0.0
    sigma_gamma: float = SIGMA_GAMMA_NV

    def __post_init__(self):
        if not self.d_mhz > 0:
            raise ValueError(f"d_mhz must be positive, got {self.d_mhz}")
        if not 0 <= self.e_mhz < self.d_mhz:
            raise ValueError(f"need 0 <= e_mhz < d_mhz, got {self.e_mhz}")
        if not self.gamma_mhz_per_mt > 0:
            raise ValueError("gamma_mhz_per_mt must be positive")
        if min(self.sigma_d, self.sigma_e, self.sigma_gamma) < 0:
            raise ValueError("uncertainties must be non-negative")


@dataclass(frozen=True)
class GTensor:
    """Axially symmetric g tensor: g_perp for x/y, g_par along the NV axis."""

    g_perp: float = G_REF
    g_par: float = G_REF

    def __post_init__(self):
        for g in (self.g_perp, self.g_par):
            if not 1.9 < g < 2.1:
                raise ValueError(f"g value {g} outside sanity window (1.9, 2.1)")

    @property
    def isotropic(self) -> bool:
        return self.g_perp == self.g_par

    @classmethod
    def iso(cls, g: float) -> "GTensor":
        return cls(g, g)


@dataclass(frozen=True)
class FieldPolar:
    """Field magnitude and angle to one NV axis (rotated into the xz-plane)."""

    b_mt: float
    theta_rad: float
    gamma_mhz_per_mt: float = GAMMA_NV

    def __post_init__(self):
        if not self.b_mt >= 0:
            raise ValueError(f"b_mt must be >= 0, got {self.b_mt}")
        # only cos^2 enters the spectrum; fold into [0, pi/2]
        t = math.fmod(abs(self.theta_rad), math.pi)
        if t > math.pi / 2:
            t = math.pi - t
        object.__setattr__(self, "theta_rad", t)

    @classmethod
    def from_params(cls, params: NVParams, b_mt: float, theta_rad: float) -> "FieldPolar":
        return cls(b_mt, theta_rad, params.gamma_mhz_per_mt)

    @property
    def eff_mhz(self) -> float:
        return self.b_mt * self.gamma_mhz_per_mt

    @property
    def cos_sq(self) -> float:
        return math.cos(self.theta_rad) ** 2


@dataclass(frozen=True)
class CubicCoeffs:
    p: float
    q: float

    @property
    def discriminant(self) -> float:
        return -4.0 * self.p**3 - 27.0 * self.q**2


def cubic_coeffs(params: NVParams, field: FieldPolar) -> CubicCoeffs:
    p, q = K.cubic_pq(params.d_mhz, params.e_mhz, field.eff_mhz, field.cos_sq)
    return CubicCoeffs(p, q)


def assemble_hamiltonian(
    params: NVParams, field: FieldPolar, g: GTensor | None = None
) -> np.ndarray:
    """Trace-free 3x3 Hamiltonian in MHz with the field in the xz-plane.

    With a ``GTensor`` the x (perpendicular) and z (parallel) Zeeman terms are
    scaled by ``g_perp / G_REF`` and ``g_par / G_REF`` respectively.
    """
    eff = field.eff_mhz
    bz = eff * math.cos(field.theta_rad)
    bx = eff * math.sin(field.theta_rad)
    if g is not None:
        bz *= g.g_par / G_REF
        bx *= g.g_perp / G_REF
    out = np.empty((3, 3))
    K.hamiltonian_into(params.d_mhz, params.e_mhz, bz, bx, out)
    return out


def full_hamiltonian(params: NVParams, b_vec_mhz) -> np.ndarray:
    """Unshifted complex Hamiltonian D Sz^2 + E(Sx^2 - Sy^2) + B.S for a field in MHz."""
    bx, by, bz = b_vec_mhz
    return (
        params.d_mhz * S_Z @ S_Z
        + params.e_mhz * (S_X @ S_X - S_Y @ S_Y)
        + bx * S_X
        + by * S_Y
        + bz * S_Z
    )


def eig3_symmetric(m) -> np.ndarray:
    """Ascending eigenvalues of a real symmetric 3x3 matrix (cyclic Jacobi)."""
    m = np.ascontiguousarray(m, dtype=np.float64)
    if m.shape != (3, 3):
        raise ValueError(f"expected a 3x3 matrix, got shape {m.shape}")
    scale = np.max(np.abs(m))
    if np.max(np.abs(m - m.T)) > 1e-9 * max(scale, 1e-300):
        raise NonSymmetric("matrix is not symmetric within 1e-9 relative")
    vals = np.array(K.jacobi_eig3(m))
    if np.isnan(vals).any():
        raise SolverError("Jacobi iteration did not converge")
    return vals


def charpoly_monic(m) -> np.ndarray:
    """Coefficients (c2, c1, c0) of det(lambda I - m) = l^3 + c2 l^2 + c1 l + c0.

    Computed from traces and the determinant; independent of the cubic_coeffs path.
    """
    m = np.asarray(m, dtype=np.float64)
    tr = np.trace(m)
    tr2 = np.trace(m @ m)
    return np.array([-tr, 0.5 * (tr * tr - tr2), -np.linalg.det(m)])


def anisotropy_discrepancy(
    params: NVParams,
    b_mt: float,
    theta: float,
    g_iso: GTensor,
    g_aniso: GTensor,
) -> float:
    """|dB| in mT between isotropic and anisotropic g at the same true field.

    Both Hamiltonians are diagonalised numerically; each resonance pair is
    converted back to a field magnitude with the exact inverse formula using
    the isotropic gamma (the value an experimenter would assume).
    """
    from .inverse import field_from_pair  # local import: inverse depends on core
    from .forward import ResonancePair

    gamma_iso = params.gamma_mhz_per_mt * g_iso.g_par / G_REF
    field = FieldPolar(b_mt, theta, params.gamma_mhz_per_mt)

    def measured(g: GTensor) -> float:
        lam = eig3_symmetric(assemble_hamiltonian(params, field, g))
        pair = ResonancePair(lam[1] - lam[0], lam[2] - lam[0])
        return field_from_pair(params, pair, gamma_iso)

    return abs(measured(g_aniso) - measured(g_iso))
