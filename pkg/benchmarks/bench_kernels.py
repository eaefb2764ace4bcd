"""Compare the compiled and numpy consensus kernels on the shipped presets.

    python benchmarks/bench_kernels.py [--repeat 5] [--presets fig2-pfn,fig4-stochastic]

Both backends run identical replicas, so the script also checks that their
final states agree before reporting timings.
"""

import argparse
import dataclasses
import statistics
import time

import numpy as np

from wlacons import kernels
from wlacons.config import load_preset
from wlacons.consensus import run

DEFAULT_PRESETS = "fig2-pfn,fig2-ifn,fig4-stochastic"


def time_backend(sim, backend, repeat):
    times, last = [], None
    for r in range(repeat):
        t0 = time.perf_counter()
        last = run(sim, r, backend=backend)
        times.append(time.perf_counter() - t0)
    return statistics.median(times), last


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--presets", default=DEFAULT_PRESETS)
    ap.add_argument("--n", type=int, default=0, help="also time a stochastic run with this many nodes")
    args = ap.parse_args(argv)

    backends = kernels.available_backends()
    print(f"backends: {', '.join(backends)} (default {kernels.BACKEND})")
    cases = [(name, dataclasses.replace(load_preset(name).sim, snapshot_steps=()))
             for name in args.presets.split(",")]
    if args.n:
        base = load_preset("stress-1000").sim
        topo = dataclasses.replace(base.topology, n=args.n)
        cases.append((f"stochastic-n{args.n}", dataclasses.replace(
            base, topology=topo, nodes=base.nodes[: args.n], max_iter=200, snapshot_steps=())))

    header = f"{'case':<22}" + "".join(f"{b + ' ms':>14}" for b in backends) + f"{'speedup':>10}"
    print(header)
    for name, sim in cases:
        res = {b: time_backend(sim, b, args.repeat) for b in backends}
        ref = res[backends[0]][1].states
        for b in backends[1:]:
            if not np.allclose(res[b][1].states, ref, rtol=1e-9, atol=1e-9):
                raise SystemExit(f"{name}: backend {b} disagrees with {backends[0]}")
        row = f"{name:<22}" + "".join(f"{res[b][0] * 1e3:>14.1f}" for b in backends)
        if "cython" in res and "python" in res:
            row += f"{res['python'][0] / res['cython'][0]:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
