"""The ten acceptance criteria, each at its stated tolerance.

Every test records a one-line PASS/FAIL summary (shown at the end of the
pytest run) before asserting.
"""

import math
import time

import numpy as np
import pytest

from nvmag.bench import run_bench
from nvmag.core import FieldPolar, NVParams, eig3_symmetric, assemble_hamiltonian
from nvmag.forward import FieldVector, resonance_lines, resonances, viete_roots
from nvmag.core import cubic_coeffs
from nvmag.inverse import alignment_error_map, invert_pair, uncertainty_budget
from nvmag.lineshape import (
    FWHM_PER_SIGMA,
    Spectrum,
    faddeeva,
    fit_line,
    fwhm_voigt,
    sensitivity,
    voigt_model,
    voigt_peak,
    voigt_widths_from_d,
)
from nvmag.vector import SYMMETRY_GROUP, orbit_angle, reconstruct_lines, symmetry_images
from oracles import faddeeva_quad, half_max_width


def random_unit(rng):
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


def test_c01_round_trip_exactness(acceptance):
    t0 = time.perf_counter()
    worst_b = worst_c = 0.0
    for e in (0.0, 5.0, 20.0):
        p = NVParams(2870.0, e)
        for b in np.linspace(0.1, 100.0, 50):
            for th in np.radians(np.linspace(0.0, 90.0, 50)):
                m = invert_pair(p, resonances(p, FieldPolar(b, th, p.gamma_mhz_per_mt)))
                eff = b * p.gamma_mhz_per_mt
                worst_b = max(worst_b, abs(math.sqrt(m.eff_sq_mhz2) - eff) / eff)
                worst_c = max(worst_c, abs(m.cos_sq_theta - math.cos(th) ** 2))
    elapsed = time.perf_counter() - t0
    ok = worst_b <= 1e-9 and worst_c <= 1e-9 and elapsed < 5.0
    acceptance(1, ok, f"round trip: max rel B err {worst_b:.2e}, max cos^2 err {worst_c:.2e}, {elapsed:.2f} s")
    assert ok


def test_c02_viete_vs_jacobi(acceptance):
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(10_000):
        d = rng.uniform(100.0, 5000.0)
        p = NVParams(d, rng.uniform(0.0, 0.3) * d)
        f = FieldPolar(10 ** rng.uniform(-3, 2.5), rng.uniform(0, math.pi / 2), p.gamma_mhz_per_mt)
        lam_j = eig3_symmetric(assemble_hamiltonian(p, f))
        lam_v = viete_roots(cubic_coeffs(p, f))
        worst = max(worst, float(np.max(np.abs(lam_v - lam_j)) / np.max(np.abs(lam_j))))
    ok = worst <= 1e-10
    acceptance(2, ok, f"Viete vs Jacobi over 1e4 Hamiltonians: max rel diff {worst:.2e}")
    assert ok


def test_c03_aligned_approximation_error(acceptance):
    p = NVParams()
    err_ut = float(alignment_error_map(p, [10.0], [math.radians(1.0)])[0, 0]) * 1e3
    theta = np.radians(np.linspace(0.0, 20.0, 401))
    row = alignment_error_map(p, [10.0], theta)[0]
    monotone = bool(np.all(np.diff(row) >= 0))
    ok = abs(err_ut - 1.5) <= 0.5 and monotone
    acceptance(3, ok, f"aligned approx at (10 mT, 1 deg) = {err_ut:.3f} uT, monotone on 0-20 deg: {monotone}")
    assert ok


def test_c04_uncertainty_budget(acceptance):
    bud = uncertainty_budget(NVParams(), 10.0, math.radians(1.0), sigma_g=0.0003).absolute_ut()
    g_term, aniso = bud["gamma_uncertainty"], bud["g_anisotropy"]
    ok = abs(g_term - 1.5) <= 0.2 and abs(aniso - 0.5) <= 0.3
    acceptance(4, ok, f"budget: gamma term {g_term:.3f} uT, g anisotropy {aniso:.3f} uT")
    assert ok


def test_c05_vector_reconstruction(acceptance):
    p = NVParams()
    rng = np.random.default_rng(5)
    clean, noisy = [], []
    sig = np.full(8, 0.01)
    for _ in range(1000):
        fv = FieldVector(float(rng.uniform(1.0, 50.0)), tuple(random_unit(rng)))
        lines = resonance_lines(p, fv)
        clean.append(orbit_angle(reconstruct_lines(p, lines).b_hat, fv.b_hat))
        rec = reconstruct_lines(p, lines + rng.normal(scale=0.01, size=8), sig)
        noisy.append(orbit_angle(rec.b_hat, fv.b_hat))
    worst = max(clean)
    median_deg = math.degrees(float(np.median(noisy)))
    ok = worst < 1e-6 and median_deg < 0.5
    acceptance(5, ok, f"reconstruction: noiseless max {worst:.2e} rad, noisy median {median_deg:.4f} deg")
    assert ok


def test_c06_olivero_fwhm(acceptance):
    worst = 0.0
    for d in np.linspace(-1.0, 1.0, 101):
        sigma, nu = voigt_widths_from_d(1.0, d)
        approx = fwhm_voigt(2.0 * nu, FWHM_PER_SIGMA * sigma)
        exact = half_max_width(lambda f: 1.0 - voigt_model(f, 0.0, sigma, nu), 0.0, 0.5)
        worst = max(worst, abs(approx - exact) / exact)
    ok = worst < 2.5e-4
    acceptance(6, ok, f"Olivero FWHM over 101 d values: max rel err {100 * worst:.4f} %")
    assert ok


def _power_broadened_trial(rng):
    d = rng.uniform(0.2, 0.8)
    total = rng.uniform(4.0, 10.0)
    sigma, nu = voigt_widths_from_d(total, d)
    f0 = 2870.0 + rng.uniform(-1.0, 1.0)
    f = np.linspace(2870.0 - 6 * total, 2870.0 + 6 * total, 601)
    contrast = 0.02
    y = 1.0 - contrast * (1.0 - voigt_model(f, f0, sigma, nu)) / voigt_peak(sigma, nu)
    # 0.5 % Gaussian noise on the normalised signal
    y = y + rng.normal(scale=0.005, size=f.size)
    spec = Spectrum(f, y)
    fits = {m: fit_line(spec, m) for m in ("lorentz", "voigt", "gauss")}
    eta = {m: sensitivity(x, 1e12).eta_t_per_sqrt_hz for m, x in fits.items()}
    r2 = {m: x.r_squared for m, x in fits.items()}
    r2_ok = r2["voigt"] >= r2["lorentz"] and r2["voigt"] >= r2["gauss"]
    eta_ok = eta["lorentz"] <= eta["voigt"] <= eta["gauss"]
    return r2_ok, eta_ok


def test_c07_voigt_superiority(acceptance):
    rng = np.random.default_rng(7)
    results = [_power_broadened_trial(rng) for _ in range(100)]
    r2_rate = sum(r for r, _ in results) / 100
    eta_rate = sum(e for _, e in results) / 100
    ok = r2_rate >= 0.95 and eta_rate >= 0.90
    acceptance(7, ok, f"Voigt R^2 best in {100 * r2_rate:.0f} %, eta ordering in {100 * eta_rate:.0f} % of 100 trials")
    assert ok


@pytest.mark.slow
def test_c08_benchmark_protocol(acceptance):
    res = run_bench(iterations=500, points=600, seed=0)
    med = res.summary["analytical"]["median_us"]
    ratio = res.speedup
    ok = med <= 50.0 and ratio >= 10.0 and res.elapsed_s < 600.0 and res.agreement_rad <= 1e-6
    acceptance(
        8, ok,
        f"bench ({res.backend}): analytical median {med:.1f} us, numerical median "
        f"{res.summary['numerical']['median_us']:.0f} us, ratio {ratio:.1f}x, {res.elapsed_s:.0f} s",
    )  # fmt: skip
    assert ok


def test_c09_symmetry_suite(acceptance):
    g = SYMMETRY_GROUP
    eye = np.eye(3)
    orth = all(np.array_equal(m @ m.T, eye) for m in g)
    distinct = len({m.tobytes() for m in g}) == 48
    closed = all(any(np.array_equal(a @ b, c) for c in g) for a in g for b in g)
    sizes = tuple(
        len(symmetry_images(FieldVector.from_components(*v)))
        for v in ((0.0, 0.0, 1.0), (1.0, 1.0, 1.0), (0.3, 0.5, 0.8))
    )
    ok = g.shape == (48, 3, 3) and orth and distinct and closed and sizes == (6, 8, 48)
    acceptance(9, ok, f"O_h: order {len(g)}, orthogonal {orth}, closed {closed}, orbits {sizes}")
    assert ok


def test_c10_faddeeva_vs_quadrature(acceptance):
    rng = np.random.default_rng(10)
    worst = 0.0
    for _ in range(1000):
        z = 10 ** rng.uniform(-4, 2) * complex(math.cos(a := rng.uniform(0, math.pi)), math.sin(a))
        z = complex(z.real, max(z.imag, 0.0))
        ref = faddeeva_quad(z)
        worst = max(worst, abs(faddeeva(z) - ref) / abs(ref))
    ok = worst <= 1e-6
    acceptance(10, ok, f"Faddeeva vs quadrature on 1000 points: max rel err {worst:.2e}")
    assert ok
