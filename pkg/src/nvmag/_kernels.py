"""Hot scalar/array kernels shared by the public modules.

Everything here sticks to the numba nopython subset: float64 scalars,
contiguous float64 arrays, no Python objects. Error conditions are reported
through NaN or integer status codes; the public wrappers turn them into
exceptions with informative messages.
"""

import math

import numpy as np

from ._accel import HAVE_NUMBA, jit

SQRT2 = math.sqrt(2.0)
SQRT3 = math.sqrt(3.0)
INV_SQRT2 = 1.0 / SQRT2
INV_SQRTPI = 1.0 / math.sqrt(math.pi)
TWO_PI_3 = 2.0 * math.pi / 3.0

VIETE_CLAMP = 1e-9

# NV axes as rows, integer form; divide by sqrt(3) for unit vectors.
AXES_INT = np.array(
    [[1.0, 1.0, 1.0], [-1.0, -1.0, 1.0], [-1.0, 1.0, -1.0], [1.0, -1.0, -1.0]]
)
AXES = AXES_INT / SQRT3

# chain status codes
OK = 0
ST_INCONSISTENT = 1
ST_ANGLE = 2
ST_ZERO_FIELD = 3
ST_SINGULAR = 4
ST_DEGENERATE = 5
ST_DISCRIMINANT = 6
ST_DUPLICATE = 7
ST_NONFINITE = 8


# --------------------------------------------------------------------------
# characteristic polynomial and Viete roots


@jit
def cubic_pq(d, e, eff, cos_sq):
    """Depressed-cubic coefficients of the trace-free NV Hamiltonian."""
    eff2 = eff * eff
    sin_sq = 1.0 - cos_sq
    cos2t = 2.0 * cos_sq - 1.0
    p = -(d * d / 3.0 + e * e + eff2)
    q = (
        -0.5 * d * eff2 * cos2t
        - e * eff2 * sin_sq
        - d * eff2 / 6.0
        + 2.0 * d * d * d / 27.0
        - 2.0 * d * e * e / 3.0
    )
    return p, q


@jit
def viete(p, q):
    """Ascending real roots of t**3 + p t + q; NaNs if the roots are not real.

    The two closest roots are re-centred on minus half the isolated root,
    which keeps the root sum at zero and the sum of the pair accurate near
    degeneracies (where arccos is badly conditioned). The gap of a nearly
    double root remains limited by the rounding of p and q: about
    eps * |p| / gap, at most sqrt(eps * |p|).
    """
    nan = np.nan
    if not p < 0.0:
        if p == 0.0 and q == 0.0:
            return 0.0, 0.0, 0.0
        return nan, nan, nan
    m = math.sqrt(-p / 3.0)
    arg = (1.5 * q / p) * math.sqrt(-3.0 / p)
    if arg > 1.0:
        if arg > 1.0 + VIETE_CLAMP:
            return nan, nan, nan
        arg = 1.0
    elif arg < -1.0:
        if arg < -1.0 - VIETE_CLAMP:
            return nan, nan, nan
        arg = -1.0
    phi = math.acos(arg) / 3.0
    hi = 2.0 * m * math.cos(phi)
    mid = 2.0 * m * math.cos(phi - TWO_PI_3)
    lo = 2.0 * m * math.cos(phi - 2.0 * TWO_PI_3)
    if hi - mid <= mid - lo:
        half = 0.5 * (hi - mid)
        centre = -0.5 * lo
        mid = centre - half
        hi = centre + half
    else:
        half = 0.5 * (mid - lo)
        centre = -0.5 * hi
        lo = centre - half
        mid = centre + half
    return lo, mid, hi


@jit
def resonances_scalar(d, e, eff, cos_sq):
    """(f_l, f_u) for one axis; NaNs on discriminant violation."""
    p, q = cubic_pq(d, e, eff, cos_sq)
    l0, l1, l2 = viete(p, q)
    return l1 - l0, l2 - l0


@jit
def _resonances_batch_loop(d, e, eff, cos_sq, f_l, f_u):
    for i in range(eff.shape[0]):
        a, b = resonances_scalar(d, e, eff[i], cos_sq[i])
        f_l[i] = a
        f_u[i] = b


def _resonances_batch_numpy(d, e, eff, cos_sq):
    eff2 = eff * eff
    p = -(d * d / 3.0 + e * e + eff2)
    q = (
        -0.5 * d * eff2 * (2.0 * cos_sq - 1.0)
        - e * eff2 * (1.0 - cos_sq)
        - d * eff2 / 6.0
        + 2.0 * d**3 / 27.0
        - 2.0 * d * e * e / 3.0
    )
    m = np.sqrt(-p / 3.0)
    arg = (1.5 * q / p) * np.sqrt(-3.0 / p)
    bad = np.abs(arg) > 1.0 + VIETE_CLAMP
    phi = np.arccos(np.clip(arg, -1.0, 1.0)) / 3.0
    hi = 2.0 * m * np.cos(phi)
    mid = 2.0 * m * np.cos(phi - TWO_PI_3)
    lo = 2.0 * m * np.cos(phi - 2.0 * TWO_PI_3)
    upper_pair = hi - mid <= mid - lo
    half_u = 0.5 * (hi - mid)
    half_l = 0.5 * (mid - lo)
    new_mid = np.where(upper_pair, -0.5 * lo - half_u, -0.5 * hi + half_l)
    new_hi = np.where(upper_pair, -0.5 * lo + half_u, hi)
    new_lo = np.where(upper_pair, lo, -0.5 * hi - half_l)
    f_l = new_mid - new_lo
    f_u = new_hi - new_lo
    f_l[bad] = np.nan
    f_u[bad] = np.nan
    return f_l, f_u


def resonances_batch(d, e, eff, cos_sq):
    """Vectorised (f_l, f_u) over arrays of effective field and cos^2(theta)."""
    eff = np.ascontiguousarray(eff, dtype=np.float64).ravel()
    cos_sq = np.ascontiguousarray(cos_sq, dtype=np.float64).ravel()
    if HAVE_NUMBA:
        f_l = np.empty_like(eff)
        f_u = np.empty_like(eff)
        _resonances_batch_loop(float(d), float(e), eff, cos_sq, f_l, f_u)
        return f_l, f_u
    return _resonances_batch_numpy(float(d), float(e), eff, cos_sq)


# --------------------------------------------------------------------------
# Hamiltonian and Jacobi eigensolver (independent oracle path)


@jit
def hamiltonian_into(d, e, bz, bx, out):
    """Trace-free Hamiltonian (MHz) with field components bz, bx in MHz."""
    s = INV_SQRT2 * bx
    out[0, 0] = d / 3.0 + bz
    out[0, 1] = s
    out[0, 2] = e
    out[1, 0] = s
    out[1, 1] = -2.0 * d / 3.0
    out[1, 2] = s
    out[2, 0] = e
    out[2, 1] = s
    out[2, 2] = d / 3.0 - bz


@jit
def jacobi_eig3(m, tol=1e-13, max_sweeps=60):
    """Ascending eigenvalues of a real symmetric 3x3 matrix by cyclic Jacobi.

    ``m`` is left untouched. Returns NaNs if ``max_sweeps`` is exhausted.
    """
    a00 = m[0, 0]
    a11 = m[1, 1]
    a22 = m[2, 2]
    a01 = 0.5 * (m[0, 1] + m[1, 0])
    a02 = 0.5 * (m[0, 2] + m[2, 0])
    a12 = 0.5 * (m[1, 2] + m[2, 1])
    scale = max(abs(a00), abs(a11), abs(a22), abs(a01), abs(a02), abs(a12))
    if scale == 0.0:
        return 0.0, 0.0, 0.0
    thresh = tol * scale
    converged = False
    for _ in range(max_sweeps):
        off = math.sqrt(a01 * a01 + a02 * a02 + a12 * a12)
        if off <= thresh:
            converged = True
            break
        # (0, 1)
        if a01 != 0.0:
            theta = (a11 - a00) / (2.0 * a01)
            t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
            c = 1.0 / math.sqrt(t * t + 1.0)
            s = t * c
            a00 = a00 - t * a01
            a11 = a11 + t * a01
            a01 = 0.0
            g = a02
            h = a12
            a02 = c * g - s * h
            a12 = s * g + c * h
        # (0, 2)
        if a02 != 0.0:
            theta = (a22 - a00) / (2.0 * a02)
            t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
            c = 1.0 / math.sqrt(t * t + 1.0)
            s = t * c
            a00 = a00 - t * a02
            a22 = a22 + t * a02
            a02 = 0.0
            g = a01
            h = a12
            a01 = c * g - s * h
            a12 = s * g + c * h
        # (1, 2)
        if a12 != 0.0:
            theta = (a22 - a11) / (2.0 * a12)
            t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
            c = 1.0 / math.sqrt(t * t + 1.0)
            s = t * c
            a11 = a11 - t * a12
            a22 = a22 + t * a12
            a12 = 0.0
            g = a01
            h = a02
            a01 = c * g - s * h
            a02 = s * g + c * h
    if not converged:
        off = math.sqrt(a01 * a01 + a02 * a02 + a12 * a12)
        if off > thresh:
            return np.nan, np.nan, np.nan
    # sort three values
    x, y, z = a00, a11, a22
    if x > y:
        x, y = y, x
    if y > z:
        y, z = z, y
    if x > y:
        x, y = y, x
    return x, y, z


@jit
def numeric_resonances(d, e, bz, bx, work):
    hamiltonian_into(d, e, bz, bx, work)
    l0, l1, l2 = jacobi_eig3(work)
    return l1 - l0, l2 - l0


# --------------------------------------------------------------------------
# inverse formulas


@jit
def field_sq(f_u, f_l, d, e):
    """3 * B_eff**2 = f_u**2 + f_l**2 - f_u f_l - D**2 - 3 E**2, in shifted form."""
    a = f_u - d
    b = f_l - d
    return (d * (a + b) + a * a + b * b - a * b) / 3.0 - e * e


@jit
def field_sq_grad(f_u, f_l, d, e):
    """Partials of B_eff**2 w.r.t. (f_u, f_l, D, E)."""
    return (2.0 * f_u - f_l) / 3.0, (2.0 * f_l - f_u) / 3.0, -2.0 * d / 3.0, -2.0 * e


@jit
def _cos_numerator(f_u, f_l, d, e):
    # 2l^3 - 3l^2u - 3lu^2 + 2u^3 + 2D^3 - 18DE^2, expanded around D
    a = f_u - d
    b = f_l - d
    s = a + b
    alpha = 2.0 * a - b
    beta = a - 2.0 * b
    return -3.0 * d * d * s - d * s * s + (2.0 * d + s) * alpha * beta - 18.0 * d * e * e


@jit
def cos_sq_theta(f_u, f_l, d, e, x):
    """cos^2(theta) given the resonance pair and B_eff**2 = x (> 0)."""
    num = _cos_numerator(f_u, f_l, d, e)
    de = d - e
    return num / (27.0 * de * x) + (d - 3.0 * e) / (3.0 * de)


@jit
def cos_sq_grad(f_u, f_l, d, e):
    """Partials of cos^2(theta) w.r.t. (f_u, f_l, D, E), with B_eff**2 eliminated."""
    u = f_u
    l = f_l
    x = field_sq(u, l, d, e)
    num = _cos_numerator(u, l, d, e)
    de = d - e
    k = 1.0 / (27.0 * de * x)
    xu, xl, xd, xe = field_sq_grad(u, l, d, e)
    nu = -3.0 * l * l - 6.0 * l * u + 6.0 * u * u
    nl = 6.0 * l * l - 6.0 * l * u - 3.0 * u * u
    nd = 6.0 * d * d - 18.0 * e * e
    ne = -36.0 * d * e
    gu = k * (nu - num * xu / x)
    gl = k * (nl - num * xl / x)
    gd = k * (nd - num * (1.0 / de + xd / x)) + 2.0 * e / (3.0 * de * de)
    ge = k * (ne - num * (-1.0 / de + xe / x)) - 2.0 * d / (3.0 * de * de)
    return gu, gl, gd, ge


# --------------------------------------------------------------------------
# BLUE over sign permutations


@jit
def _inv3_sym(a):
    """Inverse of a symmetric 3x3 (cofactors) and its 2-norm condition number."""
    l0, l1, l2 = jacobi_eig3(a)
    lo = min(abs(l0), abs(l1), abs(l2))
    hi = max(abs(l0), abs(l1), abs(l2))
    cond = np.inf if lo == 0.0 else hi / lo
    inv = np.empty((3, 3))
    c00 = a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1]
    c01 = a[1, 2] * a[2, 0] - a[1, 0] * a[2, 2]
    c02 = a[1, 0] * a[2, 1] - a[1, 1] * a[2, 0]
    det = a[0, 0] * c00 + a[0, 1] * c01 + a[0, 2] * c02
    if det == 0.0:
        return inv, np.inf
    inv[0, 0] = c00 / det
    inv[0, 1] = (a[0, 2] * a[2, 1] - a[0, 1] * a[2, 2]) / det
    inv[0, 2] = (a[0, 1] * a[1, 2] - a[0, 2] * a[1, 1]) / det
    inv[1, 0] = c01 / det
    inv[1, 1] = (a[0, 0] * a[2, 2] - a[0, 2] * a[2, 0]) / det
    inv[1, 2] = (a[0, 2] * a[1, 0] - a[0, 0] * a[1, 2]) / det
    inv[2, 0] = c02 / det
    inv[2, 1] = (a[0, 1] * a[2, 0] - a[0, 0] * a[2, 1]) / det
    inv[2, 2] = (a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]) / det
    return inv, cond


@jit
def blue_projector(weights):
    """3x4 estimator matrix (N^T W N)^-1 N^T W and the condition number of N^T W N.

    Zero weights drop an axis. Equal weights reproduce (sqrt(3)/4) N_int^T.
    """
    nwn = np.zeros((3, 3))
    for k in range(4):
        w = weights[k]
        for i in range(3):
            for j in range(3):
                nwn[i, j] += w * AXES[k, i] * AXES[k, j]
    inv, cond = _inv3_sym(nwn)
    proj = np.zeros((3, 4))
    for i in range(3):
        for k in range(4):
            acc = 0.0
            for j in range(3):
                acc += inv[i, j] * AXES[k, j]
            proj[i, k] = acc * weights[k]
    return proj, cond


@jit
def sign_of(index, axis):
    """+1/-1 for ``axis`` in sign tuple ``index`` (0..15, axis 0 is the high bit)."""
    return -1.0 if (index >> (3 - axis)) & 1 else 1.0


@jit
def blue_one(proj, active, cos_t, index, out):
    """Solve one sign tuple; writes the unnormalised estimate, returns its SSR."""
    c = np.empty(4)
    for k in range(4):
        c[k] = sign_of(index, k) * cos_t[k]
    for i in range(3):
        acc = 0.0
        for k in range(4):
            acc += proj[i, k] * c[k]
        out[i] = acc
    ssr = 0.0
    for k in range(4):
        if active[k]:
            r = c[k] - (AXES[k, 0] * out[0] + AXES[k, 1] * out[1] + AXES[k, 2] * out[2])
            ssr += r * r
    return ssr


@jit
def blue_sweep(cos_t, weights, active, ssr_out, tie_tol=1e-20):
    """All 16 sign tuples; fills ``ssr_out``, returns (best index, unnormalised b, cond).

    With four cones the tuple with the smallest SSR wins. With three cones
    every tuple fits exactly, so the squared deviation of |b| from one is
    added to the score.
    """
    proj, cond = blue_projector(weights)
    n_act = 0
    for k in range(4):
        if active[k]:
            n_act += 1
    est = np.empty(3)
    score = np.empty(16)
    best = np.inf
    for idx in range(16):
        s = blue_one(proj, active, cos_t, idx, est)
        ssr_out[idx] = s
        if n_act < 4:
            dn = math.sqrt(est[0] * est[0] + est[1] * est[1] + est[2] * est[2]) - 1.0
            s += dn * dn
        score[idx] = s
        if s < best:
            best = s
    chosen = 0
    for idx in range(16):
        if score[idx] <= best + tie_tol:
            chosen = idx
            break
    b = np.empty(3)
    blue_one(proj, active, cos_t, chosen, b)
    return chosen, b, cond


# --------------------------------------------------------------------------
# the full analytical chain: resonance pairs -> field vector


@jit
def axis_inverse(f_u, f_l, s_u, s_l, d, e, s_d, s_e):
    """Per-axis inverse with clamping. Returns (status, x, var_x, c2, var_c2)."""
    x = field_sq(f_u, f_l, d, e)
    gu, gl, gd, ge = field_sq_grad(f_u, f_l, d, e)
    var_x = (gu * s_u) ** 2 + (gl * s_l) ** 2 + (gd * s_d) ** 2 + (ge * s_e) ** 2
    sig = max(s_u, s_l, 0.01)
    tol_x = 10.0 * sig * sig + 5.0 * math.sqrt(var_x)
    if x < 0.0:
        if x < -tol_x:
            return ST_INCONSISTENT, x, var_x, np.nan, np.nan
        x = 0.0
    if x <= 0.0:
        return ST_ZERO_FIELD, x, var_x, np.nan, np.nan
    c2 = cos_sq_theta(f_u, f_l, d, e, x)
    hu, hl, hd, he = cos_sq_grad(f_u, f_l, d, e)
    var_c2 = (hu * s_u) ** 2 + (hl * s_l) ** 2 + (hd * s_d) ** 2 + (he * s_e) ** 2
    tol_c = 1e-6 + 5.0 * math.sqrt(var_c2)
    if c2 < -tol_c or c2 > 1.0 + tol_c:
        return ST_ANGLE, x, var_x, c2, var_c2
    c2 = min(max(c2, 0.0), 1.0)
    return OK, x, var_x, c2, var_c2


@jit
def cos_variance(c2, var_c2):
    """Variance of cos(theta) from that of cos^2(theta), regularised at cos -> 0."""
    if var_c2 <= 0.0:
        return 0.0
    return var_c2 / max(4.0 * c2, 2.0 * math.sqrt(var_c2))


@jit
def analytic_chain(f_u, f_l, s_u, s_l, d, e, s_d, s_e, gamma, weighted, active, out):
    """Pairs -> (b_hat, B). ``out`` receives per-axis diagnostics, shape (4, 6):
    x, var_x, c2, var_c2, cos, var_cos.

    Returns (status, axis, b_hat, b_mt, var_b_mt, ssr, sign_index).
    """
    b_hat = np.zeros(3)
    cos_t = np.zeros(4)
    wts = np.zeros(4)
    n_act = 0
    all_var = True
    for k in range(4):
        if not active[k]:
            continue
        n_act += 1
        st, x, vx, c2, vc2 = axis_inverse(f_u[k], f_l[k], s_u[k], s_l[k], d, e, s_d, s_e)
        out[k, 0] = x
        out[k, 1] = vx
        out[k, 2] = c2
        out[k, 3] = vc2
        if st != OK:
            return st, k, b_hat, np.nan, np.nan, np.nan, -1
        c = math.sqrt(c2)
        vc = cos_variance(c2, vc2)
        out[k, 4] = c
        out[k, 5] = vc
        cos_t[k] = c
        if vc > 0.0:
            wts[k] = 1.0 / vc
        else:
            all_var = False
    if not (weighted and all_var):
        for k in range(4):
            wts[k] = 1.0 if active[k] else 0.0
    ssr = np.empty(16)
    idx, b, cond = blue_sweep(cos_t, wts, active, ssr)
    if not cond <= 1e12:
        return ST_SINGULAR, -1, b_hat, np.nan, np.nan, np.nan, -1
    norm = math.sqrt(b[0] * b[0] + b[1] * b[1] + b[2] * b[2])
    if norm < 1e-12:
        return ST_DEGENERATE, -1, b_hat, np.nan, np.nan, ssr[idx], idx
    for i in range(3):
        b_hat[i] = b[i] / norm
    # magnitude: inverse-variance mean of per-axis B_i
    num = 0.0
    den = 0.0
    plain = 0.0
    use_w = True
    for k in range(4):
        if not active[k]:
            continue
        bk = math.sqrt(out[k, 0]) / gamma
        plain += bk
        vb = out[k, 1] / (4.0 * out[k, 0]) / (gamma * gamma)
        if vb > 0.0:
            num += bk / vb
            den += 1.0 / vb
        else:
            use_w = False
    if use_w and den > 0.0:
        b_mt = num / den
        var_b = 1.0 / den
    else:
        b_mt = plain / n_act
        var_b = 0.0
    return OK, -1, b_hat, b_mt, var_b, ssr[idx], idx



@jit
def pairing_suspect(out, ssr, chi2_max, rel_max, ssr_max):
    """True when the per-axis magnitudes of a solved chain disagree.

    Uses the chi-square of sqrt(x_k) about their inverse-variance mean when
    every axis has a variance; otherwise the relative spread and the cone
    residual.
    """
    num = 0.0
    den = 0.0
    with_var = True
    for k in range(4):
        if out[k, 1] > 0.0 and out[k, 0] > 0.0:
            v = out[k, 1] / (4.0 * out[k, 0])
            num += math.sqrt(out[k, 0]) / v
            den += 1.0 / v
        else:
            with_var = False
    if with_var:
        mean = num / den
        chi2 = 0.0
        for k in range(4):
            r = math.sqrt(out[k, 0]) - mean
            chi2 += r * r * 4.0 * out[k, 0] / out[k, 1]
        return chi2 > chi2_max
    lo = np.inf
    hi = 0.0
    for k in range(4):
        b = math.sqrt(max(out[k, 0], 0.0))
        lo = min(lo, b)
        hi = max(hi, b)
    return (hi - lo) > rel_max * hi or ssr > ssr_max


@jit
def chain_from_lines(lines, sigmas, d, e, s_d, s_e, gamma, weighted, out):
    """Eight unsorted lines -> nested pairs -> :func:`analytic_chain`."""
    b_hat = np.zeros(3)
    for i in range(8):
        if not math.isfinite(lines[i]):
            return ST_NONFINITE, -1, b_hat, np.nan, np.nan, np.nan, -1
    order = np.argsort(lines, kind="mergesort")
    f = lines[order]
    s = sigmas[order]
    for i in range(7):
        if f[i + 1] - f[i] < 1e-9:
            return ST_DUPLICATE, -1, b_hat, np.nan, np.nan, np.nan, -1
    f_l = f[:4].copy()
    s_l = s[:4].copy()
    f_u = np.empty(4)
    s_u = np.empty(4)
    for k in range(4):
        f_u[k] = f[7 - k]
        s_u[k] = s[7 - k]
    active = np.ones(4, dtype=np.bool_)
    return analytic_chain(f_u, f_l, s_u, s_l, d, e, s_d, s_e, gamma, weighted, active, out)

# --------------------------------------------------------------------------
# numerical baseline: gradient descent on the resonance SSR


@jit
def frequency_ssr(b, f_l, f_u, d, e, gamma, work):
    ssr = 0.0
    bb = b[0] * b[0] + b[1] * b[1] + b[2] * b[2]
    for k in range(4):
        par = AXES[k, 0] * b[0] + AXES[k, 1] * b[1] + AXES[k, 2] * b[2]
        perp2 = bb - par * par
        perp = math.sqrt(perp2) if perp2 > 0.0 else 0.0
        fl, fu = numeric_resonances(d, e, gamma * par, gamma * perp, work)
        r1 = fl - f_l[k]
        r2 = fu - f_u[k]
        ssr += r1 * r1 + r2 * r2
    return ssr


@jit
def _ssr_gradient(b, f_l, f_u, d, e, gamma, work, h, g):
    t = np.empty(3)
    for i in range(3):
        for j in range(3):
            t[j] = b[j]
        t[i] = b[i] + h
        fp = frequency_ssr(t, f_l, f_u, d, e, gamma, work)
        t[i] = b[i] - h
        fm = frequency_ssr(t, f_l, f_u, d, e, gamma, work)
        g[i] = (fp - fm) / (2.0 * h)


@jit
def gradient_descent(f_l, f_u, d, e, gamma, b0, h, armijo, gtol, max_iter):
    """Steepest descent with Barzilai-Borwein trial steps and Armijo backtracking.

    Returns (status, b, ssr, iterations); status 0 converged on the gradient
    norm, 1 converged by stalling at machine precision, 2 iteration limit.
    """
    work = np.empty((3, 3))
    b = b0.copy()
    g = np.empty(3)
    g_old = np.empty(3)
    b_old = np.empty(3)
    trial = np.empty(3)
    f = frequency_ssr(b, f_l, f_u, d, e, gamma, work)
    _ssr_gradient(b, f_l, f_u, d, e, gamma, work, h, g)
    step = 1e-4
    for it in range(max_iter):
        gn2 = g[0] * g[0] + g[1] * g[1] + g[2] * g[2]
        if math.sqrt(gn2) < gtol:
            return 0, b, f, it
        alpha = step
        accepted = False
        f_new = f
        while alpha > 1e-30:
            for i in range(3):
                trial[i] = b[i] - alpha * g[i]
            f_new = frequency_ssr(trial, f_l, f_u, d, e, gamma, work)
            if f_new <= f - armijo * alpha * gn2:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            return 1, b, f, it
        for i in range(3):
            b_old[i] = b[i]
            g_old[i] = g[i]
            b[i] = trial[i]
        f_prev = f
        f = f_new
        _ssr_gradient(b, f_l, f_u, d, e, gamma, work, h, g)
        if f_prev - f <= 1e-15 * f_prev:
            return 1, b, f, it + 1
        sy = 0.0
        ss = 0.0
        for i in range(3):
            si = b[i] - b_old[i]
            yi = g[i] - g_old[i]
            sy += si * yi
            ss += si * si
        step = ss / sy if sy > 0.0 else 2.0 * alpha
    return 2, b, f, max_iter


# --------------------------------------------------------------------------
# Faddeeva function w(z) = exp(-z^2) erfc(-iz), Im z >= 0


def _weideman_coefficients(n):
    m = 2 * n
    k = np.arange(-m + 1, m)
    big_l = math.sqrt(n / SQRT2)
    t = big_l * np.tan(k * math.pi / (2 * m))
    f = np.concatenate(([0.0], np.exp(-t * t) * (big_l * big_l + t * t)))
    a = np.real(np.fft.fft(np.fft.fftshift(f))) / (2 * m)
    return big_l, np.ascontiguousarray(a[1 : n + 1][::-1])


W_L, W_COEF = _weideman_coefficients(32)
SERIES_RADIUS = 0.5
CF_RADIUS = 6.0
SERIES_TERMS = 30
CF_DEPTH = 24
_SERIES_COEF = np.array([1.0 / math.gamma(0.5 * k + 1.0) for k in range(SERIES_TERMS)])


@jit
def faddeeva_scalar(z):
    r = abs(z)
    if r < SERIES_RADIUS:
        iz = 1j * z
        acc = 0j
        for k in range(SERIES_TERMS - 1, -1, -1):
            acc = acc * iz + _SERIES_COEF[k]
        return acc
    if r >= CF_RADIUS:
        tail = 0j
        for k in range(CF_DEPTH, 0, -1):
            tail = (0.5 * k) / (z - tail)
        return 1j * INV_SQRTPI / (z - tail)
    lz = W_L - 1j * z
    big_z = (W_L + 1j * z) / lz
    poly = 0j
    for k in range(W_COEF.shape[0]):
        poly = poly * big_z + W_COEF[k]
    return 2.0 * poly / (lz * lz) + INV_SQRTPI / lz


@jit
def _faddeeva_loop(z, out):
    for i in range(z.shape[0]):
        out[i] = faddeeva_scalar(z[i])


def _faddeeva_numpy(z):
    out = np.empty_like(z)
    r = np.abs(z)
    small = r < SERIES_RADIUS
    large = r >= CF_RADIUS
    mid = ~(small | large)
    if small.any():
        iz = 1j * z[small]
        acc = np.zeros_like(iz)
        for k in range(SERIES_TERMS - 1, -1, -1):
            acc = acc * iz + _SERIES_COEF[k]
        out[small] = acc
    if large.any():
        zl = z[large]
        tail = np.zeros_like(zl)
        for k in range(CF_DEPTH, 0, -1):
            tail = (0.5 * k) / (zl - tail)
        out[large] = 1j * INV_SQRTPI / (zl - tail)
    if mid.any():
        zm = z[mid]
        lz = W_L - 1j * zm
        big_z = (W_L + 1j * zm) / lz
        poly = np.zeros_like(zm)
        for c in W_COEF:
            poly = poly * big_z + c
        out[mid] = 2.0 * poly / (lz * lz) + INV_SQRTPI / lz
    return out


def faddeeva_array(z):
    z = np.ascontiguousarray(z, dtype=np.complex128)
    shape = z.shape
    flat = z.ravel()
    if HAVE_NUMBA:
        out = np.empty_like(flat)
        _faddeeva_loop(flat, out)
    else:
        out = _faddeeva_numpy(flat)
    return out.reshape(shape)
