"""
Compare the compiled scan kernels with the numpy fallback.

    python3 benchmarks/bench_kernels.py [--reps 200] [--n 10000]

Both backends are imported directly, so the comparison runs regardless of
which one the package selected at import.
"""

import argparse
import timeit

import numpy as np

from adaptive_seqstep import _pure
from adaptive_seqstep.procedures import AccumulationFn, _q_eff
from adaptive_seqstep.vct_model import VCTParams, draw_arrays, make_rng, mix_seed

try:
    from adaptive_seqstep import _kernels
except ImportError:
    _kernels = None


def _inputs(n, reps):
    params = VCTParams(0.2, 3.65, 2.0, n=n)
    P = np.empty((reps, n))
    null = np.empty((reps, n), dtype=bool)
    for j in range(reps):
        P[j], null[j] = draw_arrays(params, make_rng(mix_seed(0, j)))
    H = AccumulationFn.forward_stop()(P)
    return P, null, H


def _time(fn, number):
    return min(timeit.repeat(fn, number=number, repeat=5)) / number


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--reps", type=int, default=200)
    ap.add_argument("--n", type=int, default=10_000)
    args = ap.parse_args(argv)

    P, null, H = _inputs(args.n, args.reps)
    q = _q_eff(0.1)
    path = _pure.as_path(P[0], 0.1, 0.5)
    cases = {
        "as_path (1 x n)": lambda m: m.as_path(P[0], 0.1, 0.5),
        "stop_index (1 x n)": lambda m: m.stop_index(path, q),
        f"as_batch ({args.reps} x n)": lambda m: m.as_batch(P, null, 0.1, 0.5, q),
        f"at_batch ({args.reps} x n)": lambda m: m.at_batch(H, null, q),
    }
    backends = [("python", _pure)] + ([("cython", _kernels)] if _kernels else [])
    print(f"n={args.n}")
    print(f"{'kernel':<24}" + "".join(f"{name:>12}" for name, _ in backends) + f"{'speedup':>10}")
    for label, fn in cases.items():
        times = []
        for _, mod in backends:
            number = 3 if "batch" in label else 200
            times.append(_time(lambda: fn(mod), number))
        speed = f"{times[0] / times[1]:9.1f}x" if len(times) == 2 else "      n/a"
        print(f"{label:<24}" + "".join(f"{t * 1e3:10.3f}ms" for t in times) + speed)
    if _kernels is None:
        print("compiled extension not available; only the numpy fallback was timed")


if __name__ == "__main__":
    main()
