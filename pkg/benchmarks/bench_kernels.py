"""Time the numba kernels against their numpy counterparts, and one full EM
fit under each backend.

    python benchmarks/bench_kernels.py [--repeat 200]

The end-to-end comparison runs the fit in a subprocess with
PFMR_DISABLE_NUMBA set, since the backend is fixed at import time.
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from pfmr import kernels

FIT_SNIPPET = """
import time
import numpy as np
from pfmr import Dataset, fit, kmeans_init, BACKEND
from pfmr.io import load_csv
data = load_csv("crabs", "CW,FL,RW", "CL,BD")
init = kmeans_init(data, 4, seed=0)
fit(data, "eFMRC", 4, "VEE", init)  # warm-up / compile
t = time.perf_counter()
for _ in range({n}):
    res = fit(data, "eFMRC", 4, "VEE", init)
print(BACKEND, (time.perf_counter() - t) / {n}, res.iterations)
"""


def timeit(fn, args, repeat):
    fn(*args)
    t = time.perf_counter()
    for _ in range(repeat):
        fn(*args)
    return (time.perf_counter() - t) / repeat


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=200)
    ap.add_argument("--N", type=int, default=275)
    ap.add_argument("--G", type=int, default=4)
    ap.add_argument("--fits", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    N, d, p, G = args.N, 3, 3, args.G
    Y = rng.normal(size=(N, d))
    Xaug = np.hstack([np.ones((N, 1)), rng.normal(size=(N, p))])
    B = rng.normal(size=(G, p + 1, d))
    S = np.stack([np.eye(d) + 0.3 for _ in range(G)])
    chol = np.linalg.cholesky(S)
    tau = rng.dirichlet(np.ones(G), size=N)
    alpha = rng.normal(size=(G, p + 1))
    alpha[0] = 0
    Z = rng.normal(size=(N, d + p))
    centers = Z[:G].copy()
    logp = rng.normal(size=(N, G))

    cases = [
        ("log_densities", (Y, Xaug, B, chol)),
        ("normalize_log", (logp,)),
        ("weighted_scatter", (Y, Xaug, B, tau)),
        ("weighted_normal_equations", (Y, Xaug, tau)),
        ("nearest_center", (Z, centers)),
        ("logit_soft_objective", (Xaug, tau, alpha)),
        ("logit_soft_stats", (Xaug, tau, alpha)),
    ]
    print(f"{'kernel':28s} {'numpy us':>10s} {'numba us':>10s} {'speedup':>8s}")
    for name, a in cases:
        t_np = timeit(getattr(kernels, name + "_np"), a, args.repeat)
        t_nb = timeit(getattr(kernels, name + "_nb"), a, args.repeat)
        print(f"{name:28s} {t_np * 1e6:10.1f} {t_nb * 1e6:10.1f} {t_np / t_nb:8.1f}")

    print("\nend-to-end eFMRC VEE G=4 fit on crabs (seconds per fit)")
    for flag in ("0", "1"):
        env = dict(os.environ, PFMR_DISABLE_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", FIT_SNIPPET.format(n=args.fits)],
                             env=env, capture_output=True, text=True, check=True)
        backend, secs, iters = out.stdout.split()
        print(f"  {backend:6s} {float(secs):.4f}  ({iters} EM iterations)")


if __name__ == "__main__":
    main()
