"""Compare the compiled and numpy kernel backends.

Times each per-round kernel on random inputs, then one full scenario
trial per backend (the backend is chosen at import, so trials run in
subprocesses with ``PSFPC_BACKEND`` set).

    python benchmarks/bench_kernels.py [--sizes 20 100 500] [--repeat 200]
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from psfpc import _pykernels
from psfpc.network import generate, push_sum_weights

try:
    from psfpc import _ckernels
except ImportError:
    _ckernels = None

TRIAL_SNIPPET = """
import time
from psfpc import ScenarioConfig, run_scenario, BACKEND
cfg = ScenarioConfig(algorithm={algo!r}, n_nodes={n}, n_iterations=100)
run_scenario(cfg, 0)
t = time.perf_counter()
for i in range({trials}):
    run_scenario(cfg, i)
print(BACKEND, (time.perf_counter() - t) / {trials})
"""


def kernel_inputs(n, rng):
    W = push_sum_weights(generate(n, 0.2, True, rng))
    A = rng.standard_normal((n, 2, 2))
    V = np.einsum("nij,nkj->nik", A, A) + np.eye(2)
    return dict(
        csr=W.csr,
        z=rng.standard_normal((n, 2)),
        s=rng.uniform(0.5, 1.5, n),
        V=V,
        m=rng.standard_normal((n, 2)),
        y=rng.standard_normal((n, 2)),
        Q=V * 0.1,
        sig=rng.uniform(0.5, 1.0, (n, 2)),
    )


def time_kernels(impl, d, repeat):
    n = len(d["s"])
    out = {}
    out["mix_push_sum"] = timeit.timeit(lambda: impl.mix_push_sum(*d["csr"], d["z"], d["s"]), number=repeat)
    out["prior_covariance"] = timeit.timeit(
        lambda: impl.prior_covariance(*d["csr"], d["V"], d["s"], d["s"]), number=repeat)

    def fr():
        impl.filter_round(d["m"], d["V"], d["y"], d["Q"].copy(), d["sig"].copy(),
                          np.zeros((n, 2, 2)), np.zeros((n, 2)), np.empty((n, 2)),
                          np.empty((n, 2, 2)), 3, 0.99, True, 1e-18)

    out["filter_round"] = timeit.timeit(fr, number=repeat)
    return {k: v / repeat for k, v in out.items()}


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--sizes", type=int, nargs="+", default=[20, 100, 500])
    ap.add_argument("--repeat", type=int, default=200)
    ap.add_argument("--trials", type=int, default=20)
    args = ap.parse_args()

    backends = [("python", _pykernels)] + ([("cython", _ckernels)] if _ckernels else [])
    if _ckernels is None:
        print("compiled extension not built; timing the numpy backend only")
    print(f"{'kernel':<18}{'N':>6}" + "".join(f"{name + ' [us]':>16}" for name, _ in backends) + f"{'speedup':>10}")
    for n in args.sizes:
        d = kernel_inputs(n, np.random.default_rng(0))
        res = [time_kernels(impl, d, args.repeat) for _, impl in backends]
        for k in res[0]:
            cols = "".join(f"{r[k] * 1e6:>16.1f}" for r in res)
            speed = f"{res[0][k] / res[1][k]:>9.1f}x" if len(res) > 1 else ""
            print(f"{k:<18}{n:>6}{cols}{speed}")

    print("\nfull trials (100 iterations, seconds per trial)")
    for algo in ("psfpc", "em_kf_psfpc"):
        for n in (20, 100):
            row = []
            for name, _ in backends:
                env = dict(os.environ, PSFPC_BACKEND=name)
                code = TRIAL_SNIPPET.format(algo=algo, n=n, trials=args.trials)
                out = subprocess.run([sys.executable, "-c", code], env=env, check=True,
                                     capture_output=True, text=True).stdout.split()
                row.append(f"{out[0]}={float(out[1]):.4f}")
            print(f"  {algo:<12} N={n:<4} " + "  ".join(row))


if __name__ == "__main__":
    main()
