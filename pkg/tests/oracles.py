"""Independent reference computations used by the tests.

None of these share code with the package kernels: eigenvalues come from
bisection on the characteristic polynomial or LAPACK, the Faddeeva function
from numerical quadrature, the Voigt profile from a direct convolution.
"""

import math
import warnings

import numpy as np
from scipy import integrate, optimize


def charpoly_direct(m):
    """Coefficients (c2, c1, c0) of det(lambda I - m) expanded by hand."""
    a, b, c = m[0]
    _, e, f = m[1]
    _, _, i = m[2]
    d, g, h = m[1][0], m[2][0], m[2][1]
    c2 = -(a + e + i)
    c1 = a * e + a * i + e * i - b * d - c * g - f * h
    c0 = -(a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g))
    return np.array([c2, c1, c0])


def bisection_eigenvalues(m, tol=1e-13):
    """Eigenvalues of a real symmetric 3x3 matrix by bracketing the roots of
    its characteristic polynomial (Gershgorin bounds, then bisection)."""
    m = np.asarray(m, dtype=float)
    c2, c1, c0 = charpoly_direct(m)

    def poly(x):
        return ((x + c2) * x + c1) * x + c0

    radius = np.max(np.sum(np.abs(m), axis=1))
    lo, hi = -radius - 1.0, radius + 1.0
    # critical points of the cubic split it into monotone pieces
    disc = c2 * c2 - 3.0 * c1
    if disc <= 0:
        crit = [-c2 / 3.0, -c2 / 3.0]
    else:
        s = math.sqrt(disc)
        crit = [(-c2 - s) / 3.0, (-c2 + s) / 3.0]
    edges = [lo, crit[0], crit[1], hi]
    roots = []
    for a, b in zip(edges[:-1], edges[1:]):
        fa, fb = poly(a), poly(b)
        if fa == 0:
            roots.append(a)
            continue
        if fa * fb > 0:
            # touching root at a critical point
            roots.append(a if abs(fa) < abs(fb) else b)
            continue
        for _ in range(200):
            mid = 0.5 * (a + b)
            fm = poly(mid)
            if fm == 0 or b - a < tol * max(1.0, abs(mid)):
                break
            if fa * fm < 0:
                b, fb = mid, fm
            else:
                a, fa = mid, fm
        roots.append(0.5 * (a + b))
    return np.sort(roots)


def faddeeva_quad(z):
    """w(z) for Im z >= 0 from the Laplace form
    w(z) = (1/sqrt(pi)) * int_0^inf exp(-t^2/4) exp(i z t) dt."""
    x, y = z.real, z.imag
    # cut where the Gaussian-times-exponential envelope is below e^-44
    t_max = -2.0 * y + 2.0 * math.sqrt(y * y + 44.0)

    def env(t):
        return math.exp(-0.25 * t * t - y * t)

    opts = dict(epsabs=0.0, epsrel=1e-13, limit=2000)
    # 1e-13 is past what QUADPACK will certify; it still lands within ~1e-14
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        if x == 0.0:
            re = integrate.quad(env, 0.0, t_max, **opts)[0]
            im = 0.0
        else:
            re = integrate.quad(env, 0.0, t_max, weight="cos", wvar=x, **opts)[0]
            im = integrate.quad(env, 0.0, t_max, weight="sin", wvar=x, **opts)[0]
    return complex(re, im) / math.sqrt(math.pi)


def voigt_convolution(f, f_res, sigma, nu):
    """Unit-area Voigt profile by direct convolution of a Gaussian with a Lorentzian."""
    x = f - f_res

    def integrand(t):
        g = math.exp(-0.5 * (t / sigma) ** 2) / (sigma * math.sqrt(2 * math.pi))
        lor = nu / math.pi / ((x - t) ** 2 + nu * nu)
        return g * lor

    span = 12.0 * sigma
    return integrate.quad(integrand, -span, span, points=[x] if abs(x) < span else None,
                          epsabs=0.0, epsrel=1e-12, limit=500)[0]


def half_max_width(profile, centre, guess):
    """Full width at half depth of a symmetric single-dip profile (root-found)."""
    peak = profile(centre)

    def g(dx):
        return profile(centre + dx) - 0.5 * peak

    hi = guess
    while g(hi) > 0:
        hi *= 2.0
    return 2.0 * optimize.brentq(g, 0.0, hi, xtol=1e-15, rtol=1e-14, maxiter=500)
