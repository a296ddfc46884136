"""Timing comparison of the analytical chain against the numerical baseline.

Each field point is solved ``iterations`` times by both methods and the
per-point mean wall time is recorded (timing excludes input generation).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ._accel import BACKEND
from .baseline import numerical_baseline
from .core import NVParams
from .forward import FieldVector, resonance_lines, resonances_all_axes
from .vector import orbit_angle, reconstruct_lines

WARMUP = 50


def summarize(times_us) -> dict:
    t = np.asarray(times_us, dtype=float)
    return {
        "mean_us": float(np.mean(t)),
        "median_us": float(np.median(t)),
        "p95_us": float(np.percentile(t, 95)),
    }


@dataclass
class BenchResult:
    analytical_us: np.ndarray
    numerical_us: np.ndarray
    iterations: int
    agreement_rad: float
    magnitude_agreement_mt: float
    backend: str = BACKEND
    seed: int | None = None
    elapsed_s: float = 0.0
    summary: dict = field(default_factory=dict)

    def __post_init__(self):
        self.summary = {
            "analytical": summarize(self.analytical_us),
            "numerical": summarize(self.numerical_us),
        }

    @property
    def n_samples(self) -> int:
        return int(self.analytical_us.size)

    @property
    def speedup(self) -> float:
        return self.summary["numerical"]["median_us"] / self.summary["analytical"]["median_us"]

    def to_dict(self) -> dict:
        return {
            "backend": self.backend,
            "seed": self.seed,
            "points": self.n_samples,
            "iterations": self.iterations,
            "analytical": self.summary["analytical"],
            "numerical": self.summary["numerical"],
            "speedup": self.speedup,
            "agreement_rad": self.agreement_rad,
            "magnitude_agreement_mt": self.magnitude_agreement_mt,
            "elapsed_s": self.elapsed_s,
        }


def random_fields(n: int, seed=None, b_range=(1.0, 50.0)) -> list[FieldVector]:
    """Isotropic random directions with uniform magnitudes."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        v = rng.normal(size=3)
        norm = np.linalg.norm(v)
        if norm < 1e-6:
            continue
        out.append(FieldVector(float(rng.uniform(*b_range)), tuple(v / norm)))
    return out


def _mean_time_us(fn, iterations: int) -> float:
    clock = time.perf_counter_ns
    t0 = clock()
    for _ in range(iterations):
        fn()
    return (clock() - t0) / iterations / 1e3


def run_bench(
    iterations: int = 500,
    points: int = 600,
    seed=0,
    params: NVParams | None = None,
    guess_scatter: float = 0.05,
    progress=None,
) -> BenchResult:
    """Time both solvers on ``points`` random noiseless fields.

    The numerical solver starts from the analytical answer perturbed by
    ``guess_scatter`` (relative, per component), i.e. inside the right
    symmetry basin, so both methods should land on the same vector.
    """
    if iterations < 1 or points < 1:
        raise ValueError("iterations and points must be positive")
    params = params or NVParams()
    rng = np.random.default_rng(None if seed is None else seed + 1)
    fields = random_fields(points, seed)
    inputs = []
    for fv in fields:
        lines = resonance_lines(params, fv)
        ref = reconstruct_lines(params, lines)
        pairs = resonances_all_axes(params, FieldVector(ref.b_mt, ref.b_hat))
        scale = guess_scatter * ref.b_mt
        guess = ref.vector + rng.normal(scale=scale, size=3)
        inputs.append((lines, pairs, guess))

    # warm-up (compilation and caches), discarded
    lines, pairs, guess = inputs[0]
    for _ in range(WARMUP):
        reconstruct_lines(params, lines)
        numerical_baseline(pairs, params, guess)

    t_start = time.perf_counter()
    ana = np.empty(points)
    num = np.empty(points)
    worst_angle = 0.0
    worst_mag = 0.0
    for i, (lines, pairs, guess) in enumerate(inputs):
        ana[i] = _mean_time_us(lambda: reconstruct_lines(params, lines), iterations)
        num[i] = _mean_time_us(lambda: numerical_baseline(pairs, params, guess), iterations)
        a = reconstruct_lines(params, lines)
        n = numerical_baseline(pairs, params, guess)
        worst_angle = max(worst_angle, orbit_angle(a.b_hat, n.b_hat))
        worst_mag = max(worst_mag, float(np.max(np.abs(a.vector - n.vector))))
        if progress is not None:
            progress(i + 1, points)
    return BenchResult(
        ana, num, iterations, worst_angle, worst_mag,
        seed=seed, elapsed_s=time.perf_counter() - t_start,
    )  # fmt: skip
