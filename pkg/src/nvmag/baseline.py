"""Numerical reference solver: fit the field vector to measured lines by
gradient descent on the frequency residuals (each axis diagonalised with the
Jacobi solver).
"""

from __future__ import annotations

import numpy as np

from . import _kernels as K
from .core import NVParams
from .errors import NotConverged
from .forward import FieldVector, ResonancePair

FD_STEP_MT = 1e-4
ARMIJO_C = 1e-4
GRAD_TOL = 1e-9
MAX_ITER = 10_000


def _as_vector(guess) -> np.ndarray:
    if isinstance(guess, FieldVector):
        v = guess.vector
    else:
        v = np.asarray(guess, dtype=float).reshape(3)
    if not np.all(np.isfinite(v)):
        raise ValueError("initial guess must be finite")
    return np.array(v, dtype=float)


def numerical_baseline(
    pairs: list[ResonancePair],
    params: NVParams,
    initial_guess,
    *,
    max_iter: int = MAX_ITER,
) -> FieldVector:
    """Minimise the sum of squared line residuals over the field vector (mT).

    Central-difference gradients (step 1e-4 mT), Barzilai-Borwein trial steps
    with Armijo backtracking. Stops on gradient norm < 1e-9 MHz^2/mT, or when
    the objective stops decreasing at machine precision.
    """
    if len(pairs) != 4:
        raise ValueError("the baseline needs one pair per NV axis (4 pairs)")
    f_l = np.array([p.f_l_mhz for p in pairs])
    f_u = np.array([p.f_u_mhz for p in pairs])
    b0 = _as_vector(initial_guess)
    status, b, ssr, iters = K.gradient_descent(
        f_l, f_u, params.d_mhz, params.e_mhz, params.gamma_mhz_per_mt,
        b0, FD_STEP_MT, ARMIJO_C, GRAD_TOL, max_iter,
    )  # fmt: skip
    fv = FieldVector.from_components(*b, ssr=float(ssr))
    if status == 2:
        raise NotConverged(f"gradient descent hit {max_iter} iterations (SSR {ssr:.3g})", fv)
    return fv
