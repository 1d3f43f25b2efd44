"""Compare the compiled and pure-Python kernel backends.

    python3 benchmarks/bench_kernels.py --n 2000 --T 20 --repeat 5

Prints best-of-``repeat`` wall times per kernel and the speedup. Both
backends must produce identical profiles; the script checks that first.
"""
import argparse
import time

import numpy as np

from confgen import _backend
from confgen.admissibility import AdmissibilitySpec, Agg, build_profiles
from confgen.evaluation import ProcessSpec
from confgen.selection import SelectionSpec, Selector

CASES = [
    (Selector.RUNNING_MAX, AdmissibilitySpec(Agg.MAX)),
    (Selector.RUNNING_SUM, AdmissibilitySpec(Agg.RECALL, beta=0.5)),
    (Selector.BELOW_LAMBDA, AdmissibilitySpec(Agg.COUNT_AT_LEAST, k=2)),
    (Selector.ABOVE_LAMBDA, AdmissibilitySpec(Agg.MIN)),
    (Selector.SMALLEST_SUBSET_SUM, AdmissibilitySpec(Agg.COUNT_AT_LEAST, k=3)),
]


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=2000, help="records per batch")
    ap.add_argument("--T", type=int, default=20, help="elements per record")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    fast = _backend.compiled_kernels()
    slow = _backend.python_kernels
    if fast is None:
        print("compiled extension not built; nothing to compare")
        return 1

    rng = np.random.default_rng(args.seed)
    proc = ProcessSpec(n_elements=args.T, seed=args.seed)
    lams = np.linspace(-2, 6, 50)
    print(f"n={args.n} T={args.T} best of {args.repeat}")
    print(f"{'selector':<22}{'kernel':<8}{'python s':>10}{'cython s':>10}{'speedup':>9}")
    for kind, adm in CASES:
        sel = SelectionSpec(kind)
        batch = proc.draw(rng, args.n, sel.direction)
        if kind in (Selector.RUNNING_SUM, Selector.SMALLEST_SUBSET_SUM):
            batch.scores[:] = np.abs(batch.scores)

        pb_fast = build_profiles(batch, sel, adm, kernels=fast)
        pb_slow = build_profiles(batch, sel, adm, kernels=slow)
        assert np.array_equal(pb_fast.breakpoints, pb_slow.breakpoints)
        assert np.array_equal(pb_fast.values, pb_slow.values)

        pb = pb_fast
        merged = np.unique(pb.breakpoints)
        rows = [
            ("build", lambda k: build_profiles(batch, sel, adm, kernels=k)),
            ("sum", lambda k: k.sum_profiles(pb.breakpoints, pb.values, pb.bp_offsets, merged)),
            ("eval", lambda k: [
                k.eval_profiles(pb.breakpoints, pb.values, pb.sizes, pb.bp_offsets, float(x))
                for x in lams
            ]),
        ]
        for label, fn in rows:
            t_py = best_of(lambda: fn(slow), args.repeat)
            t_cy = best_of(lambda: fn(fast), args.repeat)
            print(f"{kind.value:<22}{label:<8}{t_py:>10.4f}{t_cy:>10.4f}{t_py / t_cy:>8.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
