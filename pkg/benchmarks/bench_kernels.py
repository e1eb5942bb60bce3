"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat N]

Sizes match the reference deployment: 8 x 8 arrays, 36 codewords, a 64 x 64
coarse grid and a 36^3 received tensor.  The last line times one full trial
per backend in a subprocess, since the backend is fixed at import.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from irs6d import kernels

TRIAL = """
import time
from irs6d.harness import codebook_seed, run_trial, trial_seed
from irs6d.scene import default_scenario, make_codebooks
sc = default_scenario(rician_factor_db=float("inf"))
cb = make_codebooks(sc, codebook_seed(0))
run_trial(sc, seed=trial_seed(0, 0), codebooks=cb)
t = time.perf_counter()
for i in range({n}):
    run_trial(sc, seed=trial_seed(0, i), codebooks=cb)
print((time.perf_counter() - t) / {n})
"""


def crand(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def best_of(fn, repeat, number):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def trial_time(backend, n):
    env = dict(os.environ)
    if backend == "python":
        env["IRS6D_PURE_PYTHON"] = "1"
    out = subprocess.run([sys.executable, "-c", TRIAL.format(n=n)], env=env,
                         capture_output=True, text=True, check=True)
    return float(out.stdout)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--trials", type=int, default=5, help="trials per backend for the end-to-end timing")
    args = ap.parse_args(argv)

    rng = np.random.default_rng(0)
    g = crand(rng, 64)
    wh = crand(rng, 36, 64)
    grid = np.linspace(-1, 1, 64)
    Y = crand(rng, 36, 36, 36)
    a_t, a_i = crand(rng, 36), crand(rng, 36)

    backends = kernels.backends()
    rows = []
    for name, mod in sorted(backends.items()):
        t_corr = best_of(lambda: mod.corr_grid(g, wh, 8, 8, grid, grid), args.repeat, 5)
        t_als = best_of(lambda: mod.als_rank1(Y, a_t, a_i, 50, 1e-300), args.repeat, 2)
        rows.append((name, t_corr, t_als, trial_time(name, args.trials)))

    print(f"default backend: {kernels.BACKEND}")
    print(f"{'backend':8s} {'corr_grid 64x64 [ms]':>22s} {'als 36^3 x50 [ms]':>19s} {'trial [s]':>10s}")
    for name, a, b, c in rows:
        print(f"{name:8s} {1e3 * a:22.2f} {1e3 * b:19.2f} {c:10.3f}")
    if len(rows) == 2:
        by = {r[0]: r[1:] for r in rows}
        (pa, pb, pc), (ca, cb, cc) = by["cython"], by["python"]
        print(f"speed-up  {ca / pa:22.1f}x {cb / pb:18.1f}x {cc / pc:9.1f}x")
    else:
        print("compiled kernels not built; only the fallback was timed")


if __name__ == "__main__":
    main()
