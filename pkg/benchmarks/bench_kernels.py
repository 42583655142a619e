"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]

Both implementations run on the same inputs and must agree exactly.
"""
import argparse
import timeit

import numpy as np

from mg1socp import instances, kernels


def lindley_case(n, seed=0):
    rng = np.random.default_rng(seed)
    return rng.exponential(1.0, n), rng.exponential(0.5, n)


def assignment_case(seed=0):
    inst = instances.generate(instances.GenSpec(4, 8, 2, seed=seed, name="bench"))
    # every facility open at its top level: 4^8 customer assignments
    k = inst.mu.shape[1] - 1
    fac = np.arange(inst.mu.shape[0], dtype=np.int64)
    return (fac, inst.mu[:, k].copy(), inst.sigma[:, k].copy(), np.asarray(inst.w, dtype=float),
            inst.lam, inst.d, float(inst.f[:, k].sum()))


def bench(name, fn, args, repeat):
    t = min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeat))
    return name, t


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--customers", type=int, default=200_000)
    args = ap.parse_args(argv)
    if kernels.compiled is None:
        print("compiled kernels not available; build with pip install --no-build-isolation -e .")
        return 1

    cases = [
        ("lindley", kernels.compiled.lindley, kernels.fallback.lindley, lindley_case(args.customers)),
        ("best_assignment", kernels.compiled.best_assignment, kernels.fallback.best_assignment, assignment_case()),
    ]
    print(f"{'kernel':<16} {'compiled s':>12} {'fallback s':>12} {'speed-up':>9}")
    for name, fast, slow, data in cases:
        a, b = fast(*data), slow(*data)
        if name == "lindley":
            assert np.array_equal(a, b)
        else:
            assert a[0] == b[0] and np.array_equal(a[1], b[1])
        _, tc = bench(name, fast, data, args.repeat)
        _, tf = bench(name, slow, data, max(1, args.repeat // 2))
        print(f"{name:<16} {tc:>12.5f} {tf:>12.5f} {tf / tc:>8.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
