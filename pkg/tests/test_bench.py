import numpy as np

from nvmag.bench import random_fields, run_bench, summarize


def test_summarize():
    s = summarize(np.arange(1.0, 101.0))
    assert s["mean_us"] == 50.5
    assert s["median_us"] == 50.5
    assert 95 <= s["p95_us"] <= 96


def test_random_fields_deterministic_and_unit():
    a = random_fields(20, seed=3)
    b = random_fields(20, seed=3)
    assert [x.b_hat for x in a] == [x.b_hat for x in b]
    assert all(abs(np.linalg.norm(x.b_hat) - 1) < 1e-12 for x in a)
    assert all(1 <= x.b_mt <= 50 for x in a)


def test_small_run():
    r = run_bench(iterations=3, points=4, seed=1)
    assert r.n_samples == 4
    assert r.analytical_us.shape == (4,) and np.all(r.analytical_us > 0)
    assert r.agreement_rad < 1e-6
    assert r.magnitude_agreement_mt < 1e-6
    d = r.to_dict()
    assert d["points"] == 4 and d["speedup"] == r.speedup
