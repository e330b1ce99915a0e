"""Benchmark the compiled growth kernel against the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--reps 100000] [--depth 6]

Both backends produce bit-identical output (asserted here on a subsample),
so the only difference is wall time.
"""

import argparse
import time

import numpy as np

from branchkit import _kernel
from branchkit._kernel.spec import KernelSpec
from branchkit.branching import wbp_sampler, wbt_table_sampler
from branchkit.coupling import quantile_coupled


def bench(label, spec, reps, depth, backends):
    times = {}
    ref = None
    for backend in backends:
        t0 = time.perf_counter()
        out = _kernel.run_batch(spec, 7, reps, depth, backend=backend)
        times[backend] = time.perf_counter() - t0
        if ref is None:
            ref = out
        else:
            for a, b in zip(ref, out):
                assert (a is None) == (b is None)
                if a is not None:
                    assert np.array_equal(a, b), f"{label}: backends disagree"
    line = "  ".join(f"{b}: {times[b]:7.3f}s" for b in backends)
    if len(backends) == 2:
        line += f"  speedup: {times[backends[0]] / times[backends[1]]:.2f}x"
    print(f"{label:34s} {line}")


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--reps", type=int, default=100_000)
    parser.add_argument("--depth", type=int, default=6)
    args = parser.parse_args()

    backends = list(_kernel.available_backends())
    if "cy" not in backends:
        print("compiled kernel not built; benchmarking numpy backend only")
    backends = [b for b in ("py", "cy") if b in backends]

    poisson_gw = wbp_sampler(q=1.0, n={"poisson": 1.5}, weights={"uniform": [0.0, 0.5]})
    binary = wbp_sampler(q=1.0, n=2, weights={"uniform": [0.0, 0.4]})
    wbt = wbt_table_sampler([(1, 0, 0.9), (1, 2, 0.2), (2, 1, 0.5)], [1 / 3, 1 / 3, 1 / 3])
    coupled = quantile_coupled(
        wbp_sampler(q=1.0, n={"poisson": 1.2}, weights={"uniform": [0.1, 0.5]}),
        wbp_sampler(q=1.0, n={"poisson": 1.2}, weights={"uniform": [0.15, 0.55]}),
    )

    print(f"replications={args.reps} depth={args.depth}")
    bench("single, Poisson offspring", KernelSpec(a=poisson_gw.side_program()), args.reps, args.depth, backends)
    bench("single, binary tree", KernelSpec(a=binary.side_program()), args.reps, min(args.depth + 4, 12), backends)
    bench("single, tree-form table", KernelSpec(a=wbt.side_program()), args.reps, args.depth, backends)
    bench("coupled, shared uniforms", coupled.kernel_spec(), args.reps, args.depth, backends)


if __name__ == "__main__":
    main()
