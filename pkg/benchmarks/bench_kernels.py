"""Time the numba kernels against the pure-numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--samples 20000]

Each kernel is warmed up once (so numba compilation is excluded), then timed
as the best of ``--repeat`` runs.  Results are checked for agreement before
timing.
"""

import argparse
import time

import numpy as np

from ddgpce import _kernels
from ddgpce.distributions import sample
from ddgpce.models import builtin_truss36, truss36_input_model
from ddgpce.multiindex import generate_reduced


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def cases(n):
    model = truss36_input_model()
    z = sample(model, "qmc", n, 1).points
    z = (z - 30.0) / 1.5
    for S, m in [(1, 3), (2, 3)]:
        iset = generate_reduced(36, S, m)
        v, p = iset.sparse()
        yield f"monomials N=36 S={S} m={m} ({iset.cardinality} terms)", (z, v, p, m), "monomials"
    fine, _ = builtin_truss36()
    c = fine._setup()
    areas = sample(model, "mcs", n, 2).points
    yield f"truss_solve 36 bars ({c['kunit'].shape[1]} free DOFs)", (areas, c["kunit"], c["force"]), "truss_solve"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--samples", type=int, default=20_000)
    args = ap.parse_args()
    if _kernels.numba_impl is None:
        raise SystemExit("numba is not importable; nothing to compare")
    print(f"{'kernel':<48} {'numpy s':>10} {'numba s':>10} {'speedup':>8}")
    for label, argv, name in cases(args.samples):
        fa, fb = getattr(_kernels.numpy_impl, name), getattr(_kernels.numba_impl, name)
        ra, rb = fa(*argv), fb(*argv)
        ra, rb = (ra[0], rb[0]) if isinstance(ra, tuple) else (ra, rb)
        np.testing.assert_allclose(ra, rb, rtol=1e-9, atol=1e-12)
        ta = best_of(lambda: fa(*argv), args.repeat)
        tb = best_of(lambda: fb(*argv), args.repeat)
        print(f"{label:<48} {ta:>10.4f} {tb:>10.4f} {ta / tb:>7.1f}x")


if __name__ == "__main__":
    main()
