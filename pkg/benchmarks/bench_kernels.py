"""Time each numba kernel against its numpy twin and check they agree.

    python benchmarks/bench_kernels.py [--repeat 5]

Compilation happens during a warm-up call and is reported separately.
"""
import argparse
import time

import numpy as np

from semalloc import kernels
from semalloc.allocator import sca_allocate
from semalloc.scenario import random_scenario
from semalloc.task_perf import eta, fixture


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def cases():
    rng = np.random.default_rng(0)
    model = fixture("resnet0dB")
    zeta = np.asarray(model.zeta)

    h = rng.standard_normal(4_000_000) ** 2
    yield "count", (lambda: kernels.count_at_least_nb(h, 0.7)), (lambda: kernels.count_at_least_np(h, 0.7))

    U = 200
    a = rng.uniform(5, 30, U)
    snr = rng.uniform(20, 500, U)
    grid = np.arange(1, 1000) / 1000
    yield ("ratio_argmax", lambda: kernels.ratio_scores_argmax_nb(a, snr, zeta, grid)[0],
           lambda: kernels.ratio_scores_argmax_np(a, snr, zeta, grid)[0])

    o = np.linspace(0, 1, 101)
    y = eta(model, o)
    theta0 = np.array([np.log(1e-12) + 30.0, 30.0, float(y.max()), -0.05])
    yield ("fit", lambda: kernels.fit_exp2_nb(o, y, -1.0, 1.0, theta0, 1.0, 1e-14, 20_000)[0],
           lambda: kernels.fit_exp2_np(o, y, -1.0, 1.0, theta0, 1.0, 1e-14, 20_000)[0])

    scen = [random_scenario(rng, U=5) for _ in range(5)]

    def sca(flag):
        def go():
            saved = kernels.HAVE_NUMBA
            kernels.HAVE_NUMBA = flag
            try:
                out = []
                for s in scen:
                    o = np.full(s.U, 0.7)
                    out.append(sca_allocate(s, o, s.weights * eta(model, o)).B)
                return np.concatenate(out)
            finally:
                kernels.HAVE_NUMBA = saved
        return go

    yield "sca_barrier", sca(True), sca(False)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if not kernels.HAVE_NUMBA:
        print("numba unavailable or disabled; nothing to compare")
        return 1
    print(f"{'kernel':<14}{'compile s':>10}{'numba ms':>11}{'numpy ms':>11}{'speedup':>9}  max |diff|")
    for name, nb, npy in cases():
        t0 = time.perf_counter()
        nb()
        compile_s = time.perf_counter() - t0
        t_nb, r_nb = best_of(nb, args.repeat)
        t_np, r_np = best_of(npy, max(1, args.repeat // 2))
        diff = float(np.max(np.abs(np.asarray(r_nb, dtype=float) - np.asarray(r_np, dtype=float))))
        print(f"{name:<14}{compile_s:>10.2f}{1e3 * t_nb:>11.2f}{1e3 * t_np:>11.2f}{t_np / t_nb:>9.1f}  {diff:.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
