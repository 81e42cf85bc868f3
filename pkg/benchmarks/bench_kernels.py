"""Compare the compiled and pure-Python kernels on the sampler's hot paths.

    python benchmarks/bench_kernels.py [--n 100] [--repeat 3]

Reports best-of-``repeat`` wall time for one sweep's worth of PG(1, c) draws
(N x N), the transfer-count kernel, and a full Gibbs sweep, plus a check that
both backends produce identical output from the same generator state.
"""
import argparse
import time

import numpy as np

from diffstru import kernels, synth
from diffstru.model import PriorConfig, SamplerConfig
from diffstru.sampler import GibbsSampler


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=100)
    ap.add_argument("--m", type=int, default=200)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    names = ["python"] + (["cython"] if kernels.compiled_backend is not None else [])
    c = np.random.default_rng(0).normal(scale=2.0, size=(args.n, args.n))
    graph, _ = synth.planted_partition_graph(args.n, 4, 0.74, 0.026, 0)
    cas = synth.simulate_cascades(graph, synth.CascadeSimConfig(args.m, 0.3, 1.0, 0.5, seed=1))
    times = np.ascontiguousarray(cas.times)
    obs = np.ascontiguousarray(cas.observed, dtype=np.uint8)

    results, outputs = {}, {}
    for name in names:
        be = kernels.get_backend(name)
        out = np.empty_like(c)
        results[(name, "pg1 N x N")] = best_of(lambda: be.pg1_fill(c, np.random.default_rng(1), out), args.repeat)
        be.pg1_fill(c, np.random.default_rng(1), out)
        outputs[name] = out.copy()
        results[(name, "transfer counts")] = best_of(lambda: be.transfer_counts(times, obs), args.repeat)

        prior = PriorConfig.identity(args.n, args.m)
        cfg = SamplerConfig(n_iter=5, burn_in=4)
        def sweep():
            s = GibbsSampler.from_data(graph, cas, prior, cfg, backend=name)
            s.initialize()
            s.step()
        results[(name, "gibbs sweep")] = best_of(sweep, args.repeat)

    print(f"N={args.n} M={args.m} repeat={args.repeat}")
    print(f"{'kernel':<18}" + "".join(f"{n:>12}" for n in names) + ("     speedup" if len(names) > 1 else ""))
    for task in ("pg1 N x N", "transfer counts", "gibbs sweep"):
        row = [results[(n, task)] for n in names]
        line = f"{task:<18}" + "".join(f"{t * 1e3:>10.2f}ms" for t in row)
        if len(names) > 1:
            line += f"{row[0] / row[1]:>11.1f}x"
        print(line)
    if len(names) > 1:
        print("pg1 outputs identical:", bool(np.array_equal(outputs["python"], outputs["cython"])))


if __name__ == "__main__":
    main()
