"""ODMR line models (Gaussian, Lorentzian, Voigt and Voigt derivative),
damped least-squares fitting, linewidth analytics and shot-noise sensitivity.

Frequencies in MHz; spectra are normalised so the off-resonant baseline is 1
(derivative spectra: 0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import find_peaks

from . import _kernels as K
from .core import GAMMA_NV
from .errors import DomainError, FitNotConverged, NoDipFound

LN2 = math.log(2.0)
FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * LN2)
SQRT2PI = math.sqrt(2.0 * math.pi)
MODELS = ("gauss", "lorentz", "voigt", "voigt_derivative")


def faddeeva(z):
    """w(z) = exp(-z**2) erfc(-i z) for Im z >= 0 (scalar or array)."""
    arr = np.asarray(z, dtype=np.complex128)
    if np.any(arr.imag < 0):
        raise DomainError("faddeeva is implemented for the upper half-plane only")
    if arr.ndim == 0:
        return complex(K.faddeeva_scalar(complex(arr)))
    return K.faddeeva_array(arr)


# --------------------------------------------------------------------------
# models


def gaussian_model(f, contrast, alpha_g, f_res):
    x = np.asarray(f, dtype=float) - f_res
    return 1.0 - contrast * np.exp(4.0 * math.log(0.5) * x * x / (alpha_g * alpha_g))


def lorentzian_model(f, contrast, alpha_l, f_res):
    x = np.asarray(f, dtype=float) - f_res
    a2 = alpha_l * alpha_l
    return 1.0 - contrast * a2 / (4.0 * x * x + a2)


# below this sigma/nu the Gaussian part changes the profile by < 1e-16
LORENTZ_LIMIT = 1e-8
# the Lorentzian part enters to first order, so its cut sits at rounding level
GAUSS_LIMIT = 1e-16


def _lorentz_limit(sigma, nu):
    if sigma < 0 or nu < 0 or (sigma == 0 and nu == 0):
        raise ValueError("Voigt widths must be non-negative and not both zero")
    return sigma <= LORENTZ_LIMIT * nu


def _z(f, f_res, sigma, nu):
    x = np.asarray(f, dtype=float) - f_res
    return (x + 1j * nu) / (sigma * math.sqrt(2.0))


def voigt_peak(sigma, nu):
    """Height of the unit-area Voigt profile at its centre."""
    if _lorentz_limit(sigma, nu):
        return 1.0 / (math.pi * nu)
    return float(np.real(faddeeva(1j * nu / (sigma * math.sqrt(2.0))))) / (sigma * SQRT2PI)


def voigt_model(f, f_res, sigma, nu, amplitude=1.0):
    """1 - amplitude * unit-area Voigt; the dip depth is ``amplitude * voigt_peak``."""
    if _lorentz_limit(sigma, nu):
        x = np.atleast_1d(np.asarray(f, dtype=float)) - f_res
        out = 1.0 - amplitude * nu / (math.pi * (x * x + nu * nu))
        return out if np.ndim(f) else float(out[0])
    w = faddeeva(_z(np.atleast_1d(f), f_res, sigma, nu))
    out = 1.0 - amplitude * w.real / (sigma * SQRT2PI)
    return out if np.ndim(f) else float(out[0])


def voigt_derivative_model(f, f_res, sigma, nu, amplitude=1.0):
    """d/df of :func:`voigt_model` in closed form."""
    f1 = np.atleast_1d(np.asarray(f, dtype=float))
    x = f1 - f_res
    if _lorentz_limit(sigma, nu):
        out = 2.0 * amplitude * nu * x / (math.pi * (x * x + nu * nu) ** 2)
        return out if np.ndim(f) else float(out[0])
    w = faddeeva(_z(f1, f_res, sigma, nu))
    out = -amplitude / (sigma**3 * SQRT2PI) * (nu * w.imag - x * w.real)
    return out if np.ndim(f) else float(out[0])


def gaussian_derivative(f, contrast, alpha_g, f_res):
    x = np.asarray(f, dtype=float) - f_res
    k = 4.0 * math.log(0.5) / (alpha_g * alpha_g)
    return -contrast * 2.0 * k * x * np.exp(k * x * x)


def lorentzian_derivative(f, contrast, alpha_l, f_res):
    x = np.asarray(f, dtype=float) - f_res
    a2 = alpha_l * alpha_l
    return contrast * a2 * 8.0 * x / (4.0 * x * x + a2) ** 2


def fwhm_voigt(alpha_l, alpha_g):
    """Olivero-Longbothum approximation of the Voigt FWHM."""
    if alpha_l < 0 or alpha_g < 0 or (alpha_l == 0 and alpha_g == 0):
        raise ValueError("widths must be non-negative and not both zero")
    return 0.5346 * alpha_l + math.sqrt(0.2166 * alpha_l * alpha_l + alpha_g * alpha_g)


def broadening_coordinate(alpha_l, alpha_g):
    """(alpha_L - alpha_G) / (alpha_L + alpha_G): -1 Gaussian ... +1 Lorentzian."""
    tot = alpha_l + alpha_g
    if not tot > 0:
        raise ValueError("alpha_l + alpha_g must be positive")
    return (alpha_l - alpha_g) / tot


def voigt_widths_from_d(alpha_total, d):
    """(sigma, nu) whose Olivero FWHM equals ``alpha_total`` at broadening ``d``."""
    a_l, a_g = 1.0 + d, 1.0 - d
    scale = alpha_total / fwhm_voigt(a_l, a_g)
    return scale * a_g / FWHM_PER_SIGMA, scale * a_l / 2.0


# --------------------------------------------------------------------------
# data containers


@dataclass
class Spectrum:
    freqs_mhz: np.ndarray
    signal: np.ndarray
    sigma: np.ndarray | None = None

    def __post_init__(self):
        self.freqs_mhz = np.asarray(self.freqs_mhz, dtype=float)
        self.signal = np.asarray(self.signal, dtype=float)
        if self.sigma is not None:
            self.sigma = np.asarray(self.sigma, dtype=float)
            if self.sigma.shape != self.signal.shape or np.any(self.sigma <= 0):
                raise ValueError("sigma must be positive and match signal")
        if self.freqs_mhz.shape != self.signal.shape or self.freqs_mhz.ndim != 1:
            raise ValueError("freqs and signal must be 1-D arrays of equal length")
        if self.freqs_mhz.size < 8:
            raise ValueError("a spectrum needs at least 8 points")
        if np.any(np.diff(self.freqs_mhz) <= 0):
            raise ValueError("frequencies must be strictly increasing")

    def window(self, lo: float, hi: float) -> "Spectrum":
        m = (self.freqs_mhz >= lo) & (self.freqs_mhz <= hi)
        sig = None if self.sigma is None else self.sigma[m]
        return Spectrum(self.freqs_mhz[m], self.signal[m], sig)


@dataclass
class LineFit:
    model: str
    f_res_mhz: float
    contrast: float
    sigma_g: float
    nu_l: float
    alpha_g: float
    alpha_l: float
    alpha_v: float
    d: float
    r_squared: float
    covariance: np.ndarray
    param_names: tuple
    params: tuple
    amplitude: float = 0.0
    baseline: tuple = (1.0, 0.0)
    converged: bool = True
    n_iter: int = 0
    window_mhz: tuple = (0.0, 0.0)
    ss_res: float = float("nan")

    def stderr(self) -> dict:
        err = np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))
        return dict(zip(self.param_names, err))

    @property
    def shape(self) -> str:
        """The model, with a Voigt at a width limit reported as that limit."""
        if self.model == "voigt":
            if self.sigma_g <= LORENTZ_LIMIT * self.nu_l:
                return "lorentz"
            if self.nu_l <= GAUSS_LIMIT * self.sigma_g:
                return "gauss"
        return self.model

    def evaluate(self, f):
        """Model prediction at ``f`` (baseline included)."""
        f = np.asarray(f, dtype=float)
        b0, b1 = self.baseline
        base = b0 + b1 * (f - self.f_res_mhz)
        shape = self.shape
        if shape == "gauss":
            return base - 1.0 + gaussian_model(f, self.contrast, self.alpha_g, self.f_res_mhz)
        if shape == "lorentz":
            return base - 1.0 + lorentzian_model(f, self.contrast, self.alpha_l, self.f_res_mhz)
        if self.model == "voigt":
            return base - 1.0 + voigt_model(f, self.f_res_mhz, self.sigma_g, self.nu_l, self.amplitude)
        return base + voigt_derivative_model(f, self.f_res_mhz, self.sigma_g, self.nu_l, self.amplitude)

    def slope(self, f):
        """d(ODMR)/df of the fitted (non-derivative) line at ``f``, in 1/MHz."""
        shape = self.shape
        if shape == "gauss":
            return gaussian_derivative(f, self.contrast, self.alpha_g, self.f_res_mhz)
        if shape == "lorentz":
            return lorentzian_derivative(f, self.contrast, self.alpha_l, self.f_res_mhz)
        return voigt_derivative_model(f, self.f_res_mhz, self.sigma_g, self.nu_l, self.amplitude)


@dataclass(frozen=True)
class SensitivityReport:
    eta_t_per_sqrt_hz: float
    photon_rate: float
    max_slope: float
    f_max_slope_mhz: float = float("nan")

    @property
    def eta_ut_per_sqrt_hz(self) -> float:
        return self.eta_t_per_sqrt_hz * 1e6


# --------------------------------------------------------------------------
# damped least squares


@dataclass
class LSQResult:
    x: np.ndarray
    cost: float
    jac: np.ndarray
    n_iter: int
    converged: bool
    history: list = field(default_factory=list)


def _jacobian(fun, x, r0, steps):
    jac = np.empty((r0.size, x.size))
    for j in range(x.size):
        h = steps[j]
        xp = x.copy()
        xm = x.copy()
        xp[j] += h
        xm[j] -= h
        jac[:, j] = (fun(xp) - fun(xm)) / (2.0 * h)
    return jac


def levenberg_marquardt(fun, x0, steps, rtol=1e-15, max_iter=200):
    """Minimise ||fun(x)||^2 with Marquardt-scaled damping.

    Stops when an accepted step lowers the cost by less than ``rtol``
    (relative), when no damping level lowers it further, or after
    ``max_iter`` iterations (``converged`` False).
    """
    x = np.asarray(x0, dtype=float).copy()
    steps = np.asarray(steps, dtype=float)
    r = fun(x)
    cost = float(r @ r)
    lam = 1e-3
    jac = _jacobian(fun, x, r, steps)
    for it in range(1, max_iter + 1):
        a = jac.T @ jac
        g = jac.T @ r
        diag = np.where(np.diag(a) > 0, np.diag(a), 1.0)
        improved = False
        while lam < 1e16:
            try:
                dx = np.linalg.solve(a + lam * np.diag(diag), -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            x_new = x + dx
            try:
                r_new = fun(x_new)
            except (OverflowError, ZeroDivisionError, DomainError):
                # a step far outside the model's range counts as a failed step
                lam *= 10.0
                continue
            cost_new = float(r_new @ r_new)
            if np.isfinite(cost_new) and cost_new < cost:
                improved = True
                break
            lam *= 10.0
        if not improved:
            return LSQResult(x, cost, jac, it, True)
        rel = (cost - cost_new) / cost if cost > 0 else 0.0
        x, r, cost = x_new, r_new, cost_new
        lam = max(lam / 10.0, 1e-12)
        jac = _jacobian(fun, x, r, steps)
        if rel < rtol or cost == 0.0:
            return LSQResult(x, cost, jac, it, True)
    return LSQResult(x, cost, jac, max_iter, False)


# --------------------------------------------------------------------------
# fitting


def _noise_level(y):
    dy = np.diff(y)
    return 1.4826 * np.median(np.abs(dy - np.median(dy))) / math.sqrt(2.0)


def _smooth(y, n):
    if y.size < 5 * n or n < 2:
        return y
    k = np.ones(n) / n
    pad = np.pad(y, (n // 2, n - 1 - n // 2), mode="edge")
    return np.convolve(pad, k, mode="valid")


def _dip_guess(f, y, baseline=1.0):
    n = max(1, y.size // 60)
    ys = _smooth(y, n)
    i0 = int(np.argmin(ys))
    depth = baseline - ys[i0]
    # compare with the noise left after the boxcar, not the raw point noise
    noise = _noise_level(y) / math.sqrt(n if ys is not y else 1)
    if not depth > 6.0 * noise or depth <= 0:
        raise NoDipFound(f"no dip above noise (depth {depth:.3g}, noise {noise:.3g})")
    half = baseline - 0.5 * depth
    above = ys >= half
    right = np.nonzero(above[i0:])[0]
    left = np.nonzero(above[: i0 + 1][::-1])[0]
    span = f[-1] - f[0]
    fr = f[i0 + right[0]] if right.size else f[-1]
    fl = f[i0 - left[0]] if left.size else f[0]
    width = max(fr - fl, 2.0 * np.median(np.diff(f)), 1e-6 * span)
    return f[i0], depth, width


def _derivative_guess(f, y):
    ys = _smooth(y, max(1, y.size // 60))
    i_max, i_min = int(np.argmax(ys)), int(np.argmin(ys))
    noise = _noise_level(y)
    if not (ys[i_max] - ys[i_min]) > 10.0 * noise:
        raise NoDipFound("no derivative feature above noise")
    lo, hi = sorted((i_max, i_min))
    seg = ys[lo : hi + 1]
    cross = np.nonzero(np.diff(np.sign(seg)))[0]
    if not cross.size:
        raise NoDipFound("no zero crossing between derivative lobes")
    centre = f[lo + cross[0]]
    sep = abs(f[i_max] - f[i_min])
    return centre, ys[i_max] - ys[i_min], max(sep, 2.0 * np.median(np.diff(f)))


def fit_line(
    spec: Spectrum,
    model: str = "voigt",
    *,
    linear_baseline: bool = False,
    max_iter: int = 200,
    strict: bool = False,
) -> LineFit:
    """Fit one resonance with the chosen lineshape.

    Widths are fitted in log space (always positive). The Voigt fit ranges
    over the closed family: when the pure Lorentzian or pure Gaussian limit
    fits better than any interior point, that limit is returned (``sigma_g``
    or ``nu_l`` exactly 0). ``strict`` raises :class:`FitNotConverged`
    instead of returning a flagged fit.
    """
    if model not in MODELS:
        raise ValueError(f"unknown model {model!r}; choose from {MODELS}")
    if model == "voigt":
        fit = _fit_voigt_closed(spec, linear_baseline, max_iter)
    else:
        fit = _fit_one(spec, model, linear_baseline, max_iter)
    if strict and not fit.converged:
        raise FitNotConverged(f"{model} fit did not converge in {max_iter} iterations", fit)
    return fit


def _as_voigt(fit: LineFit, names) -> LineFit:
    """A Gauss or Lorentz fit re-expressed as the matching Voigt limit."""
    lor = fit.model == "lorentz"
    k = len(names)
    cov = np.full((k, k), np.nan)
    # f_res, contrast and baseline terms carry over; the vanished width has no error
    src = {n: i for i, n in enumerate(fit.param_names)}
    width = "alpha_l" if lor else "alpha_g"
    conv = 0.5 if lor else 1.0 / FWHM_PER_SIGMA
    for i, a in enumerate(names):
        for j, b in enumerate(names):
            ai, bj = src.get(a), src.get(b)
            fa = fb = 1.0
            if a == ("nu" if lor else "sigma"):
                ai, fa = src[width], conv
            if b == ("nu" if lor else "sigma"):
                bj, fb = src[width], conv
            if ai is not None and bj is not None:
                cov[i, j] = fit.covariance[ai, bj] * fa * fb
    sigma_g = 0.0 if lor else fit.sigma_g
    nu_l = fit.nu_l if lor else 0.0
    vals = {"f_res": fit.f_res_mhz, "contrast": fit.contrast, "sigma": sigma_g, "nu": nu_l}
    vals.update(zip(("baseline", "baseline_slope"), fit.baseline))
    return LineFit(
        model="voigt",
        f_res_mhz=fit.f_res_mhz,
        contrast=fit.contrast,
        sigma_g=sigma_g,
        nu_l=nu_l,
        alpha_g=fit.alpha_g,
        alpha_l=fit.alpha_l,
        alpha_v=fit.alpha_v,
        d=fit.d,
        r_squared=fit.r_squared,
        covariance=cov,
        param_names=names,
        params=tuple(float(vals[n]) for n in names),
        amplitude=fit.contrast / voigt_peak(sigma_g, nu_l),
        baseline=fit.baseline,
        converged=fit.converged,
        n_iter=fit.n_iter,
        window_mhz=fit.window_mhz,
        ss_res=fit.ss_res,
    )


def _fit_voigt_closed(spec, linear_baseline, max_iter):
    lor = _fit_one(spec, "lorentz", linear_baseline, max_iter)
    gau = _fit_one(spec, "gauss", linear_baseline, max_iter)
    # extra interior starts next to each limit, so LM cannot stall far from them
    starts = [
        (lor.f_res_mhz, lor.contrast, 0.05 * lor.nu_l, lor.nu_l, lor.baseline),
        (gau.f_res_mhz, gau.contrast, gau.sigma_g, 0.05 * gau.sigma_g, gau.baseline),
    ]
    best = _fit_one(spec, "voigt", linear_baseline, max_iter, starts)
    names = best.param_names
    # a Voigt that collapsed onto a limit is that limit; report the dedicated fit
    if best.shape == "lorentz":
        return _as_voigt(lor, names)
    if best.shape == "gauss":
        return _as_voigt(gau, names)
    # R^2 rounds to 1 on clean data, so rank by the residual sum itself;
    # on a tie the limit (fewer effective parameters) wins
    for edge in (lor, gau):
        if edge.ss_res <= best.ss_res:
            best = _as_voigt(edge, names)
    return best


def _fit_one(spec: Spectrum, model: str, linear_baseline: bool, max_iter: int, starts=()) -> LineFit:
    f = spec.freqs_mhz
    y = spec.signal
    wts = 1.0 / spec.sigma if spec.sigma is not None else np.ones_like(y)

    if model == "voigt_derivative":
        centre, p2p, sep = _derivative_guess(f, y)
    else:
        centre, depth, width = _dip_guess(f, y)
    x = f - centre
    scale = max(np.median(np.diff(f)), 1e-9)

    if model == "gauss":
        names = ("f_res", "contrast", "alpha_g")
        p0 = [0.0, depth, math.log(width)]

        def shape(p):
            return gaussian_model(x, p[1], math.exp(p[2]), p[0])

    elif model == "lorentz":
        names = ("f_res", "contrast", "alpha_l")
        p0 = [0.0, depth, math.log(width)]

        def shape(p):
            return lorentzian_model(x, p[1], math.exp(p[2]), p[0])

    elif model == "voigt":
        names = ("f_res", "contrast", "sigma", "nu")
        a = width / fwhm_voigt(1.0, 1.0)
        p0 = [0.0, depth, math.log(a / FWHM_PER_SIGMA), math.log(a / 2.0)]

        def shape(p):
            s, n = math.exp(p[2]), math.exp(p[3])
            return 1.0 - p[1] * (1.0 - voigt_model(x, p[0], s, n)) / voigt_peak(s, n)

    else:
        names = ("f_res", "amplitude", "sigma", "nu")
        # lobe separation of a Voigt derivative is ~0.6 of its FWHM
        a = sep / 0.6 / fwhm_voigt(1.0, 1.0)
        s0, n0 = a / FWHM_PER_SIGMA, a / 2.0
        peak_slope = np.max(np.abs(voigt_derivative_model(x, 0.0, s0, n0)))
        sign = 1.0 if np.argmax(y) > np.argmin(y) else -1.0
        p0 = [0.0, sign * 0.5 * p2p / peak_slope, math.log(s0), math.log(n0)]

        def shape(p):
            return voigt_derivative_model(x, p[0], math.exp(p[2]), math.exp(p[3]), p[1])

    n_shape = len(p0)
    base0 = 0.0 if model == "voigt_derivative" else 1.0
    if linear_baseline:
        names = names + ("baseline", "baseline_slope")
        p0 = p0 + [base0, 0.0]
    elif model == "voigt_derivative":
        names = names + ("baseline",)
        p0 = p0 + [0.0]

    def predict(p):
        out = shape(p[:n_shape])
        if model != "voigt_derivative":
            out = out - 1.0
        if len(p) > n_shape:
            out = out + p[n_shape]
        else:
            out = out + base0
        if len(p) > n_shape + 1:
            out = out + p[n_shape + 1] * x
        return out

    def resid(p):
        return (predict(p) - y) * wts

    steps = np.full(len(p0), 1e-6)
    steps[0] = 1e-5 * scale
    steps[1] = 1e-6 * max(abs(p0[1]), 1e-6)
    res = levenberg_marquardt(resid, p0, steps, max_iter=max_iter)
    for f_s, c_s, s_s, n_s, base_s in starts:
        q0 = [f_s - centre, c_s, math.log(s_s), math.log(n_s)] + list(base_s)[: len(p0) - n_shape]
        alt = levenberg_marquardt(resid, q0, steps, max_iter=max_iter)
        if alt.cost < res.cost:
            res = alt
    p = res.x

    # covariance in natural parameters (widths exponentiated)
    n, k = y.size, p.size
    s2 = res.cost / max(n - k, 1)
    try:
        cov_log = np.linalg.inv(res.jac.T @ res.jac) * s2
    except np.linalg.LinAlgError:
        cov_log = np.full((k, k), np.nan)
    tr = np.ones(k)
    for j, name in enumerate(names):
        if name in ("alpha_g", "alpha_l", "sigma", "nu"):
            tr[j] = math.exp(p[j])
    cov = cov_log * np.outer(tr, tr)

    fitted = predict(p)
    ss_res = float(np.sum((fitted - y) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else float("nan")

    f_res = centre + p[0]
    baseline = (1.0, 0.0) if model != "voigt_derivative" else (0.0, 0.0)
    if len(p) > n_shape:
        baseline = (float(p[n_shape]), float(p[n_shape + 1]) if len(p) > n_shape + 1 else 0.0)
    sigma_g = nu_l = amplitude = 0.0
    if model == "gauss":
        contrast, alpha_g = float(p[1]), math.exp(p[2])
        alpha_l = 0.0
        sigma_g = alpha_g / FWHM_PER_SIGMA
    elif model == "lorentz":
        contrast, alpha_l = float(p[1]), math.exp(p[2])
        alpha_g = 0.0
        nu_l = alpha_l / 2.0
    else:
        sigma_g, nu_l = math.exp(p[2]), math.exp(p[3])
        alpha_g, alpha_l = FWHM_PER_SIGMA * sigma_g, 2.0 * nu_l
        if model == "voigt":
            contrast = float(p[1])
            amplitude = contrast / voigt_peak(sigma_g, nu_l)
        else:
            amplitude = float(p[1])
            contrast = amplitude * voigt_peak(sigma_g, nu_l)
    natural = tuple(float(v) for v in np.where(tr != 1.0, tr, p))
    natural = (float(f_res),) + natural[1:]
    fit = LineFit(
        model=model,
        f_res_mhz=float(f_res),
        contrast=contrast,
        sigma_g=sigma_g,
        nu_l=nu_l,
        alpha_g=alpha_g,
        alpha_l=alpha_l,
        alpha_v=fwhm_voigt(alpha_l, alpha_g),
        d=broadening_coordinate(alpha_l, alpha_g),
        r_squared=r2,
        covariance=cov,
        param_names=names,
        params=natural,
        amplitude=amplitude,
        baseline=baseline,
        converged=res.converged,
        n_iter=res.n_iter,
        window_mhz=(float(f[0]), float(f[-1])),
        ss_res=ss_res,
    )
    return fit


def find_dips(spec: Spectrum, derivative: bool = False) -> list[tuple[float, float]]:
    """Frequency windows, one per detected resonance.

    Candidates are the minima of the lightly smoothed signal whose prominence
    exceeds three median absolute deviations of the raw signal; windows split
    halfway between neighbouring dips.
    """
    y = spec.signal
    f = spec.freqs_mhz
    mad = float(np.median(np.abs(y - np.median(y))))
    noise = _noise_level(y)
    thresh = max(3.0 * mad, 5.0 * noise, 1e-12)
    ys = _smooth(y, max(1, y.size // 200))
    target = np.abs(ys - np.median(ys)) if derivative else -ys
    idx, _ = find_peaks(target, prominence=thresh)
    if derivative and idx.size:
        # each derivative feature gives two lobes; keep zero-crossings between lobe pairs
        centres = []
        for a, b in zip(idx[:-1], idx[1:]):
            if np.sign(ys[a] - np.median(ys)) != np.sign(ys[b] - np.median(ys)):
                centres.append((a + b) // 2)
        idx = np.array(sorted(set(centres)), dtype=int)
    if idx.size == 0:
        raise NoDipFound("no resonance above the prominence threshold")
    centres = f[idx]
    edges = np.concatenate(([f[0]], 0.5 * (centres[:-1] + centres[1:]), [f[-1]]))
    return [(float(edges[i]), float(edges[i + 1])) for i in range(centres.size)]


def fit_spectrum(spec: Spectrum, model: str = "voigt", **kw) -> list[LineFit]:
    """Window a (possibly multi-line) spectrum and fit every resonance independently."""
    windows = find_dips(spec, derivative=model == "voigt_derivative")
    if len(windows) == 1:
        return [fit_line(spec, model, **kw)]
    return [fit_line(spec.window(lo, hi), model, **kw) for lo, hi in windows]


# --------------------------------------------------------------------------
# sensitivity


def golden_section_max(fun, lo, hi, tol):
    """Maximiser of a unimodal function on [lo, hi]."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fun(c), fun(d)
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fun(d)
    return 0.5 * (a + b)


def max_slope(fit: LineFit) -> tuple[float, float]:
    """(max |dODMR/df| in 1/MHz, frequency where it occurs)."""
    width = fit.alpha_v
    f0 = fit.f_res_mhz

    def slope(fq):
        return abs(float(np.asarray(fit.slope(np.array([fq])))[0]))

    where = golden_section_max(slope, f0, f0 + 3.0 * width, 1e-9 * width)
    return slope(where), where


def sensitivity(
    fit: LineFit | float,
    photon_rate: float,
    gamma_mhz_per_mt: float = GAMMA_NV,
) -> SensitivityReport:
    """Shot-noise-limited sensitivity in T/sqrt(Hz).

    ``fit`` is a :class:`LineFit` or directly the maximum slope in 1/MHz.
    """
    if not photon_rate > 0:
        raise ValueError("photon_rate must be positive")
    if isinstance(fit, LineFit):
        slope, where = max_slope(fit)
    else:
        slope, where = float(fit), float("nan")
    gamma_hz_per_t = gamma_mhz_per_mt * 1e9
    slope_per_hz = slope * 1e-6
    eta = 1.0 / (gamma_hz_per_t * slope_per_hz * math.sqrt(photon_rate))
    return SensitivityReport(eta, photon_rate, slope, where)
