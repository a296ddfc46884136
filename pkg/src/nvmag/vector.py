"""Field-vector reconstruction from the four NV axes.

Each axis contributes a cone cos(theta_i) = |n_i . b|. The sign-ambiguous
linear system N b = (+-cos theta_i) is solved by (weighted) least squares
for all 16 sign tuples and the tuple with the smallest residual wins. The
answer is unique only up to the 48 signed permutations of the cubic group.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .core import NVParams
from .errors import (
    AngleOutOfRange,
    DegenerateInput,
    DuplicateLines,
    InconsistentResonances,
    SingularNormalMatrix,
    ZeroField,
)
from .forward import LATTICE_AXES, FieldVector, ResonancePair
from .inverse import AxisMeasurement, HyperfineMode, preprocess_hyperfine

__all__ = [
    "ConeSet",
    "FieldVector",
    "Reconstruction",
    "SYMMETRY_GROUP",
    "blue_solve",
    "calibration_rotation",
    "cones_from_pairs",
    "orbit_angle",
    "pair_resonances",
    "pair_resonances_consistent",
    "reconstruct",
    "reconstruct_lines",
    "reconstruct_pairs",
    "reconstruct_report",
    "sign_tuple",
    "symmetry_images",
]


def _build_group() -> np.ndarray:
    mats = []
    for perm in itertools.permutations(range(3)):
        for signs in itertools.product((1.0, -1.0), repeat=3):
            m = np.zeros((3, 3))
            for row, col in enumerate(perm):
                m[row, col] = signs[row]
            mats.append(m)
    return np.array(mats)


SYMMETRY_GROUP = _build_group()
SYMMETRY_GROUP.setflags(write=False)


def sign_tuple(index: int) -> tuple:
    return tuple(int(K.sign_of(index, k)) for k in range(4))


def sign_index(signs) -> int:
    if len(signs) != 4 or any(s not in (1, -1) for s in signs):
        raise ValueError("signs must be a 4-tuple of +1/-1")
    return sum((1 << (3 - k)) for k, s in enumerate(signs) if s < 0)


_SIGN_TUPLES = [sign_tuple(i) for i in range(16)]
_ZERO8 = np.zeros(8)
# chi-square (4 axes), relative magnitude spread and SSR beyond which the
# nested line pairing is re-checked against all matchings
_PAIRING_LIMITS = (30.0, 1e-7, 1e-14)


@dataclass(frozen=True)
class ConeSet:
    """Per-axis cone half-angle cosines, their variances and field magnitudes."""

    cos_theta: tuple
    var_cos: tuple = (0.0, 0.0, 0.0, 0.0)
    b_mt: tuple = (0.0, 0.0, 0.0, 0.0)
    var_b_mt: tuple = (0.0, 0.0, 0.0, 0.0)

    def __post_init__(self):
        for name in ("cos_theta", "var_cos", "b_mt", "var_b_mt"):
            val = tuple(float(x) for x in getattr(self, name))
            if len(val) != 4:
                raise ValueError(f"{name} needs four entries")
            object.__setattr__(self, name, val)
        if any(not 0.0 <= c <= 1.0 for c in self.cos_theta):
            raise ValueError("cos_theta entries must lie in [0, 1]")
        if any(v < 0 for v in self.var_cos + self.var_b_mt):
            raise ValueError("variances must be non-negative")

    @classmethod
    def from_direction(cls, b_hat, b_mt: float = 1.0) -> "ConeSet":
        c = np.abs(LATTICE_AXES @ np.asarray(b_hat, dtype=float))
        return cls(tuple(np.minimum(c, 1.0)), b_mt=(b_mt,) * 4)


def _active(drop_axis):
    act = np.ones(4, dtype=np.bool_)
    if drop_axis is not None:
        act[int(drop_axis)] = False
    return act


def _weights(cones: ConeSet, weighted: bool, active) -> np.ndarray:
    v = np.asarray(cones.var_cos)
    if weighted:
        if np.any(v[active] <= 0):
            raise ValueError("weighted solve needs positive variances on every used cone")
        w = np.where(active, 1.0 / np.where(v > 0, v, 1.0), 0.0)
    else:
        w = active.astype(float)
    return w


def blue_solve(cones: ConeSet, signs, weighted: bool = False, drop_axis=None):
    """Least-squares direction for one sign tuple.

    Returns ``(b_hat, ssr)`` where ``b_hat`` is normalised (all zeros if the
    estimate vanishes) and ``ssr`` is the residual of the unnormalised
    estimate.
    """
    active = _active(drop_axis)
    proj, cond = K.blue_projector(_weights(cones, weighted, active))
    if not cond <= 1e12:
        raise SingularNormalMatrix(f"normal matrix condition number {cond:.3g}")
    est = np.empty(3)
    ssr = K.blue_one(proj, active, np.asarray(cones.cos_theta), sign_index(signs), est)
    n = np.linalg.norm(est)
    return (est / n if n > 0 else est), float(ssr)


def _fuse_magnitude(b, var):
    b = np.asarray(b, dtype=float)
    var = np.asarray(var, dtype=float)
    if np.all(var > 0):
        w = 1.0 / var
        return float(np.sum(w * b) / np.sum(w)), float(1.0 / np.sum(w))
    return float(np.mean(b)), 0.0


def reconstruct(cones: ConeSet, weighted: bool = False, drop_axis=None) -> FieldVector:
    """Best sign tuple by residual; ties (within 1e-20) go to the first tuple in
    (+ before -) lexicographic order.

    ``weighted`` uses inverse-variance weights when every used cone carries a
    positive variance and silently falls back to equal weights otherwise.
    ``drop_axis`` discards one NV axis (three-cone mode, sign-ambiguous).
    """
    active = _active(drop_axis)
    var = np.asarray(cones.var_cos)
    use_w = weighted and bool(np.all(var[active] > 0))
    w = _weights(cones, use_w, active)
    ssr = np.empty(16)
    idx, est, cond = K.blue_sweep(np.asarray(cones.cos_theta), w, active, ssr)
    if not cond <= 1e12:
        raise SingularNormalMatrix(f"normal matrix condition number {cond:.3g}")
    n = float(np.linalg.norm(est))
    if n < 1e-12:
        raise InconsistentResonances("cones admit no common direction (zero estimate)")
    b, vb = _fuse_magnitude(np.asarray(cones.b_mt)[active], np.asarray(cones.var_b_mt)[active])
    return FieldVector(b, tuple(est / n), float(ssr[idx]), sign_tuple(idx), math.sqrt(vb))


# --------------------------------------------------------------------------
# pairing of raw spectral lines


def _as_lines(lines, sigmas):
    f = np.asarray(lines, dtype=float).ravel()
    if not np.all(np.isfinite(f)):
        raise ValueError("lines must be finite")
    s = np.zeros_like(f) if sigmas is None else np.asarray(sigmas, dtype=float).ravel()
    if s.shape != f.shape:
        raise ValueError("sigmas must match lines")
    order = np.argsort(f, kind="stable")
    f, s = f[order], s[order]
    if f.size > 1 and np.min(np.diff(f)) < 1e-9:
        raise DuplicateLines("two spectral lines coincide; pairing is ambiguous")
    return f, s


def pair_resonances(lines, sigmas=None) -> list[ResonancePair]:
    """Nest the sorted lines: k-th smallest with k-th largest, ordered by f_l."""
    f, s = _as_lines(lines, sigmas)
    if f.size % 2:
        raise ValueError("need an even number of lines")
    n = f.size
    return [ResonancePair(f[k], f[n - 1 - k], s[k], s[n - 1 - k]) for k in range(n // 2)]


def _matchings(items):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for i, partner in enumerate(rest):
        for tail in _matchings(rest[:i] + rest[i + 1 :]):
            yield [(first, partner)] + tail


def pair_resonances_consistent(params: NVParams, lines, sigmas=None) -> list[ResonancePair]:
    """Pairing strategy that tries every matching of the eight lines and keeps
    the one whose axes agree best on the field magnitude and whose cones
    intersect best. Slower than :func:`pair_resonances` but robust when the
    splittings of different axes cross.
    """
    f, s = _as_lines(lines, sigmas)
    if f.size != 8:
        raise ValueError("consistent pairing needs exactly eight lines")
    best, best_score = None, np.inf
    work = np.zeros((4, 6))
    for match in _matchings(list(range(8))):
        pairs = [ResonancePair(f[i], f[j], s[i], s[j]) for i, j in match]
        try:
            fv, _ = _chain(params, pairs, False, None, work)
        except (InconsistentResonances, AngleOutOfRange, ZeroField, SingularNormalMatrix):
            continue
        b = np.sqrt(work[:, 0]) / params.gamma_mhz_per_mt
        score = float(np.var(b) / np.mean(b) ** 2) + fv.ssr
        if score < best_score - 1e-15:
            best, best_score = pairs, score
    if best is None:
        raise InconsistentResonances("no pairing of the lines is physically consistent")
    return sorted(best, key=lambda p: p.f_l_mhz)


# --------------------------------------------------------------------------
# full chain


@dataclass
class Reconstruction:
    field: FieldVector
    axes: list = field(default_factory=list)
    pairs: list = field(default_factory=list)

    def axis_rows(self, gamma: float) -> list[dict]:
        rows = []
        for pair, ax in zip(self.pairs, self.axes):
            if ax is None:
                continue
            rows.append(
                {
                    "f_l_mhz": pair.f_l_mhz,
                    "f_u_mhz": pair.f_u_mhz,
                    "b_mt": ax.b_mt(gamma),
                    "theta_deg": math.degrees(ax.theta_rad),
                    "cos_sq_theta": ax.cos_sq_theta,
                    "sigma_cos_sq_theta": math.sqrt(ax.var_cos_sq),
                    "sigma_b_mt": (
                        math.sqrt(ax.var_eff_sq / (4 * ax.eff_sq_mhz2)) / gamma
                        if ax.eff_sq_mhz2 > 0
                        else 0.0
                    ),
                }
            )
        return rows


_STATUS_ERRORS = {
    K.ST_INCONSISTENT: (InconsistentResonances, "resonances on axis {axis} incompatible with D, E"),
    K.ST_ANGLE: (AngleOutOfRange, "cos^2(theta) out of range on axis {axis}"),
    K.ST_ZERO_FIELD: (ZeroField, "zero field on axis {axis}; direction undefined"),
    K.ST_SINGULAR: (SingularNormalMatrix, "normal matrix is singular"),
    K.ST_DEGENERATE: (InconsistentResonances, "cones admit no common direction"),
    K.ST_DUPLICATE: (DuplicateLines, "two spectral lines coincide; pairing is ambiguous"),
    K.ST_NONFINITE: (ValueError, "lines must be finite"),
}


def _pad_pairs(pairs, drop_axis):
    pairs = list(pairs)
    if len(pairs) == 3 and drop_axis is None:
        drop_axis = 3
    if len(pairs) == 3:
        pairs.insert(drop_axis, ResonancePair(0.0, 0.0))
    if len(pairs) != 4:
        raise ValueError(f"need 3 or 4 resonance pairs, got {len(pairs)}")
    return pairs, drop_axis


def _finish(st, axis, b_hat, b_mt, var_b, ssr, idx):
    if st != K.OK:
        exc, msg = _STATUS_ERRORS[st]
        raise exc(msg.format(axis=axis + 1))
    # the kernel returns a unit vector; skip the dataclass re-validation
    fv = object.__new__(FieldVector)
    for name, val in (
        ("b_mt", b_mt),
        ("b_hat", (b_hat[0], b_hat[1], b_hat[2])),
        ("ssr", ssr),
        ("signs", _SIGN_TUPLES[idx]),
        ("sigma_b_mt", math.sqrt(var_b)),
    ):
        object.__setattr__(fv, name, val)
    return fv


def _run_chain(params: NVParams, f_l, f_u, s_l, s_u, weighted, active, work):
    return _finish(
        *K.analytic_chain(
            f_u, f_l, s_u, s_l,
            params.d_mhz, params.e_mhz, params.sigma_d, params.sigma_e,
            params.gamma_mhz_per_mt, weighted, active, work,
        )
    )  # fmt: skip


def _chain(params: NVParams, pairs, weighted, drop_axis, work):
    pairs, drop_axis = _pad_pairs(pairs, drop_axis)
    f_u = np.array([p.f_u_mhz for p in pairs])
    f_l = np.array([p.f_l_mhz for p in pairs])
    s_u = np.array([p.sigma_u for p in pairs])
    s_l = np.array([p.sigma_l for p in pairs])
    active = _active(drop_axis)
    return _run_chain(params, f_l, f_u, s_l, s_u, weighted, active, work), active


def reconstruct_pairs(
    params: NVParams, pairs, weighted: bool = True, drop_axis=None
) -> FieldVector:
    """Resonance pairs (axis order) -> field vector via the compiled chain."""
    return _chain(params, pairs, weighted, drop_axis, np.zeros((4, 6)))[0]


def reconstruct_report(
    params: NVParams, pairs, weighted: bool = True, drop_axis=None
) -> Reconstruction:
    work = np.zeros((4, 6))
    fv, active = _chain(params, pairs, weighted, drop_axis, work)
    padded, _ = _pad_pairs(pairs, drop_axis)
    axes = [
        AxisMeasurement(work[k, 0], work[k, 2], work[k, 3], work[k, 1]) if active[k] else None
        for k in range(4)
    ]
    return Reconstruction(fv, axes, padded)


def group_hyperfine(lines, mode: HyperfineMode, sigmas=None):
    """Collapse a spectrum with resolved hyperfine structure to one line per resonance."""
    mode = HyperfineMode(mode)
    f = np.asarray(lines, dtype=float).ravel()
    s = np.zeros_like(f) if sigmas is None else np.asarray(sigmas, dtype=float).ravel()
    order = np.argsort(f, kind="stable")
    f, s = f[order], s[order]
    n = mode.line_count
    if f.size % n:
        raise ValueError(f"{f.size} lines cannot be grouped in multiplets of {n}")
    out = [preprocess_hyperfine(f[i : i + n], mode, s[i : i + n]) for i in range(0, f.size, n)]
    return np.array([o[0] for o in out]), np.array([o[1] for o in out])


def reconstruct_lines(
    params: NVParams,
    lines,
    sigmas=None,
    weighted: bool = True,
    hyperfine: HyperfineMode = HyperfineMode.NONE,
) -> FieldVector:
    """Eight (or six) spectral lines -> field vector: pair, invert, reconstruct."""
    if hyperfine is not HyperfineMode.NONE:
        lines, sigmas = group_hyperfine(lines, hyperfine, sigmas)
    f = np.asarray(lines, dtype=np.float64)
    if f.shape == (8,):
        s = _ZERO8 if sigmas is None else np.asarray(sigmas, dtype=np.float64)
        if s.shape != (8,):
            raise ValueError("sigmas must match lines")
        work = np.empty((4, 6))
        res = K.chain_from_lines(
            f, s, params.d_mhz, params.e_mhz, params.sigma_d, params.sigma_e,
            params.gamma_mhz_per_mt, weighted, work,
        )  # fmt: skip
        st = res[0]
        if st == K.OK and not K.pairing_suspect(work, res[5], *_PAIRING_LIMITS):
            return _finish(*res)
        if st in (K.OK, K.ST_INCONSISTENT, K.ST_ANGLE, K.ST_DEGENERATE):
            # nested pairing breaks when splittings of two axes cross
            try:
                pairs = pair_resonances_consistent(params, f, s)
            except InconsistentResonances:
                if st == K.OK:
                    return _finish(*res)
                raise
            return reconstruct_pairs(params, pairs, weighted)
        return _finish(*res)
    return reconstruct_pairs(params, pair_resonances(lines, sigmas), weighted)


def pair_lines(params: NVParams, lines, sigmas=None, weighted: bool = True) -> list[ResonancePair]:
    """The pairing :func:`reconstruct_lines` settles on: nested, unless the
    nested pairs disagree on the magnitude, then the consistent search.
    """
    pairs = pair_resonances(lines, sigmas)
    if len(pairs) != 4:
        return pairs
    work = np.zeros((4, 6))
    try:
        fv, _ = _chain(params, pairs, weighted, None, work)
    except (InconsistentResonances, AngleOutOfRange):
        fv = None
    if fv is not None and not K.pairing_suspect(work, fv.ssr, *_PAIRING_LIMITS):
        return pairs
    try:
        return pair_resonances_consistent(params, lines, sigmas)
    except InconsistentResonances:
        if fv is not None:
            return pairs
        raise


def cones_from_pairs(params: NVParams, pairs) -> ConeSet:
    from .inverse import invert_pair

    meas = [invert_pair(params, p) for p in pairs]
    g = params.gamma_mhz_per_mt
    cos = [math.sqrt(m.cos_sq_theta) for m in meas]
    var = [K.cos_variance(m.cos_sq_theta, m.var_cos_sq) for m in meas]
    b = [m.b_mt(g) for m in meas]
    vb = [m.var_eff_sq / (4 * m.eff_sq_mhz2) / g**2 if m.eff_sq_mhz2 > 0 else 0.0 for m in meas]
    return ConeSet(tuple(cos), tuple(var), tuple(b), tuple(vb))


# --------------------------------------------------------------------------
# symmetry


def symmetry_images(v: FieldVector, tol: float = 1e-12) -> list[FieldVector]:
    """All distinct cubic-group images of ``v`` (48 for a generic direction)."""
    imgs = SYMMETRY_GROUP @ np.asarray(v.b_hat)
    out: list[np.ndarray] = []
    for img in imgs:
        if all(np.max(np.abs(img - u)) > tol for u in out):
            out.append(img)
    return [FieldVector(v.b_mt, tuple(u), v.ssr, v.signs, v.sigma_b_mt) for u in out]


def orbit_angle(a_hat, b_hat) -> float:
    """Smallest angle (rad) between ``a_hat`` and any cubic image of ``b_hat``."""
    a = np.asarray(a_hat, dtype=float)
    a = a / np.linalg.norm(a)
    imgs = SYMMETRY_GROUP @ (np.asarray(b_hat, dtype=float) / np.linalg.norm(b_hat))
    c = np.clip(imgs @ a, -1.0, 1.0)
    # atan2 form stays accurate for tiny angles
    cross = np.linalg.norm(np.cross(imgs, a), axis=1)
    return float(np.min(np.arctan2(cross, c)))


# --------------------------------------------------------------------------
# two-vector calibration


@dataclass(frozen=True)
class Calibration:
    rotation: np.ndarray
    measured_angle_deg: float
    target_angle_deg: float
    image_index: int
    residual_rad: float

    @property
    def angle_mismatch_deg(self) -> float:
        return self.measured_angle_deg - self.target_angle_deg


def _angle(a, b) -> float:
    return math.atan2(np.linalg.norm(np.cross(a, b)), float(np.dot(a, b)))


def calibration_rotation(measured, target, use_symmetry: bool = False) -> Calibration:
    """Proper rotation taking two measured field directions onto two targets.

    Solves the two-vector Wahba problem (SVD form, equal weights). With
    ``use_symmetry`` the second measured vector is first replaced by its cubic
    image whose angle to the first is closest to the target angle, since each
    reconstructed vector is only known up to that group.
    """
    m1, m2 = (np.asarray(v, dtype=float) / np.linalg.norm(v) for v in measured)
    t1, t2 = (np.asarray(v, dtype=float) / np.linalg.norm(v) for v in target)
    target_angle = _angle(t1, t2)
    image = 0
    if use_symmetry:
        imgs = SYMMETRY_GROUP @ m2
        mismatch = [abs(_angle(m1, u) - target_angle) for u in imgs]
        image = int(np.argmin(mismatch))
        m2 = imgs[image]
    meas_angle = _angle(m1, m2)
    if meas_angle < 1e-6 or meas_angle > math.pi - 1e-6:
        raise DegenerateInput("measured vectors are parallel")
    if target_angle < 1e-6 or target_angle > math.pi - 1e-6:
        raise DegenerateInput("target vectors are parallel")
    b = np.outer(t1, m1) + np.outer(t2, m2)
    u, _, vt = np.linalg.svd(b)
    fix = np.diag([1.0, 1.0, np.sign(np.linalg.det(u) * np.linalg.det(vt))])
    rot = u @ fix @ vt
    resid = math.sqrt(0.5 * (_angle(rot @ m1, t1) ** 2 + _angle(rot @ m2, t2) ** 2))
    return Calibration(rot, math.degrees(meas_angle), math.degrees(target_angle), image, resid)
