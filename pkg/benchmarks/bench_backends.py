"""Compare the numba and pure-numpy backends on the solver benchmark.

Each backend runs in its own interpreter because the backend is fixed at
import time by NVMAG_DISABLE_NUMBA.

    python benchmarks/bench_backends.py --points 60 --iterations 50
"""

import argparse
import json
import os
import subprocess
import sys


def run(disable: bool, points: int, iterations: int, seed: int) -> dict:
    env = dict(os.environ, NVMAG_DISABLE_NUMBA="1" if disable else "0")
    cmd = [
        sys.executable, "-m", "nvmag", "--json", "--seed", str(seed),
        "bench", "--points", str(points), "--iterations", str(iterations),
    ]
    out = subprocess.run(cmd, env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=60)
    ap.add_argument("--iterations", type=int, default=50)
    ap.add_argument("--fallback-points", type=int, default=10,
                    help="points for the (much slower) numpy backend")
    ap.add_argument("--fallback-iterations", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    results = {
        "numba": run(False, args.points, args.iterations, args.seed),
        "numpy": run(True, args.fallback_points, args.fallback_iterations, args.seed),
    }
    print(f"{'backend':8s} {'method':11s} {'median_us':>12s} {'p95_us':>12s}")
    for name, res in results.items():
        for method in ("analytical", "numerical"):
            s = res[method]
            print(f"{name:8s} {method:11s} {s['median_us']:12.1f} {s['p95_us']:12.1f}")
    for method in ("analytical", "numerical"):
        ratio = results["numpy"][method]["median_us"] / results["numba"][method]["median_us"]
        print(f"numba speedup over numpy ({method}): {ratio:.1f}x")
    for name, res in results.items():
        print(f"{name}: analytical vs numerical {res['speedup']:.1f}x, "
              f"agreement {res['agreement_rad']:.2e} rad")


if __name__ == "__main__":
    main()
