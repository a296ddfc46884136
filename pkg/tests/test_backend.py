import json
import os
import subprocess
import sys

import numpy as np
import pytest

from nvmag import _kernels as K
from nvmag._accel import BACKEND, HAVE_NUMBA
from nvmag.core import NVParams
from nvmag.forward import FieldVector, resonance_lines

needs_numba = pytest.mark.skipif(not HAVE_NUMBA, reason="numba backend not active")


def py(fn):
    return getattr(fn, "py_func", fn)


def random_lines(n, seed=0):
    rng = np.random.default_rng(seed)
    p = NVParams(2870.0, 2.0)
    out = []
    for _ in range(n):
        v = rng.normal(size=3)
        fv = FieldVector(rng.uniform(1, 50), tuple(v / np.linalg.norm(v)))
        out.append(resonance_lines(p, fv))
    return p, out


@needs_numba
def test_chain_kernel_matches_python_path():
    p, all_lines = random_lines(50)
    sig = np.full(8, 0.01)
    for lines in all_lines:
        w1, w2 = np.empty((4, 6)), np.empty((4, 6))
        args = (lines, sig, p.d_mhz, p.e_mhz, 0.0, 0.0, p.gamma_mhz_per_mt, True)
        a = K.chain_from_lines(*args, w1)
        b = py(K.chain_from_lines)(*args, w2)
        assert a[0] == b[0] and a[6] == b[6]
        np.testing.assert_allclose(a[2], b[2], atol=1e-12)
        assert a[3] == pytest.approx(b[3], rel=1e-12)
        np.testing.assert_allclose(w1, w2, rtol=1e-10, atol=1e-12)


@needs_numba
def test_descent_kernel_matches_python_path():
    p = NVParams()
    fv = FieldVector.from_components(2.0, -3.0, 6.0)
    lines = resonance_lines(p, fv)
    f_l, f_u = lines[:4], lines[::-1][:4]
    # pairs in nested order; start close to the field the chain would return
    w = np.empty((4, 6))
    st, _, b_hat, b_mt, *_ = K.chain_from_lines(lines, np.zeros(8), p.d_mhz, p.e_mhz, 0.0, 0.0,
                                                p.gamma_mhz_per_mt, False, w)  # fmt: skip
    b0 = np.asarray(b_hat) * b_mt * 1.03
    args = (f_l, f_u, p.d_mhz, p.e_mhz, p.gamma_mhz_per_mt, b0, 1e-4, 1e-4, 1e-9, 2000)
    a = K.gradient_descent(*args)
    b = py(K.gradient_descent)(*args)
    assert a[0] == b[0]
    np.testing.assert_allclose(a[1], b[1], atol=1e-8)


@needs_numba
def test_jacobi_kernel_matches_python_path():
    rng = np.random.default_rng(2)
    for _ in range(50):
        m = rng.normal(size=(3, 3))
        m = m + m.T
        np.testing.assert_allclose(K.jacobi_eig3(m.copy()), py(K.jacobi_eig3)(m.copy()), atol=1e-12)


def test_numpy_twins_match_loops():
    rng = np.random.default_rng(3)
    eff = rng.uniform(0, 1500, 500)
    c2 = rng.uniform(0, 1, 500)
    fl1, fu1 = np.empty(500), np.empty(500)
    py(K._resonances_batch_loop)(2870.0, 3.0, eff, c2, fl1, fu1)
    fl2, fu2 = K._resonances_batch_numpy(2870.0, 3.0, eff, c2)
    np.testing.assert_allclose(fl1, fl2, rtol=1e-13)
    np.testing.assert_allclose(fu1, fu2, rtol=1e-13)

    z = rng.uniform(-30, 30, 400) + 1j * 10 ** rng.uniform(-4, 2, 400)
    w1 = np.empty(400, dtype=complex)
    py(K._faddeeva_loop)(z, w1)
    np.testing.assert_allclose(K._faddeeva_numpy(z), w1, rtol=1e-13)


SCRIPT = """
import json, numpy as np
from nvmag import BACKEND, NVParams, FieldVector, reconstruct_lines, resonance_lines
from nvmag.lineshape import Spectrum, fit_line, voigt_model
p = NVParams(2870.0, 2.0)
rng = np.random.default_rng(0)
out = {"backend": BACKEND, "fields": []}
for _ in range(20):
    v = rng.normal(size=3)
    fv = FieldVector(float(rng.uniform(1, 50)), tuple(v / np.linalg.norm(v)))
    out["fields"].append(list(reconstruct_lines(p, resonance_lines(p, fv)).vector))
f = np.linspace(2850, 2890, 401)
fit = fit_line(Spectrum(f, voigt_model(f, 2870.3, 1.1, 0.6, 0.02)), "voigt")
out["fit"] = [fit.f_res_mhz, fit.sigma_g, fit.nu_l]
print(json.dumps(out))
"""


def run_script(disable):
    env = dict(os.environ, NVMAG_DISABLE_NUMBA="1" if disable else "0")
    proc = subprocess.run([sys.executable, "-c", SCRIPT], env=env, capture_output=True, text=True, check=True)
    return json.loads(proc.stdout)


@pytest.mark.slow
def test_env_flag_selects_numpy_backend_with_same_results():
    slow = run_script(True)
    assert slow["backend"] == "numpy"
    fast = run_script(False)
    assert fast["backend"] == BACKEND
    np.testing.assert_allclose(slow["fields"], fast["fields"], atol=1e-10)
    np.testing.assert_allclose(slow["fit"], fast["fit"], rtol=1e-9)
