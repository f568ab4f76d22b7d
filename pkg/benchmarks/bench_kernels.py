"""Time the numba and numpy kernel backends on the same inputs.

    python3 benchmarks/bench_kernels.py [--repeat 3]
"""
from __future__ import annotations

import argparse
import time

import networkx as nx

from slimkc import kernels
from slimkc.compile import compile_system
from slimkc.toolkit import clique_instance, gen_random_system


def _best(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_count(repeat):
    F = gen_random_system(7, 20, 12, ("clause", "xor", "mod3", "card"))
    return "count_models n=20 m=12", lambda: kernels.count_models(F)


def bench_circuit(repeat):
    inst = clique_instance(nx.complete_graph(range(1, 6)), 3)
    D, _ = compile_system(inst.system, inst.td)
    op, a, b = D.arrays()
    vs = sorted(D.variables())
    planes, _ = kernels.enumeration_planes(vs[:14], max(vs))
    return f"evaluate_gates gates={len(op)} words={planes.shape[1]}", lambda: kernels.evaluate_gates(op, a, b, planes)


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    backends = ["numpy"] + (["numba"] if kernels.HAVE_NUMBA else [])
    for make in (bench_count, bench_circuit):
        label, fn = make(args.repeat)
        times, results = {}, []
        for be in backends:
            prev = kernels.set_backend(be)
            try:
                fn()  # warm up jit
                times[be], out = _best(fn, args.repeat)
            finally:
                kernels.set_backend(prev)
            results.append(out if isinstance(out, int) else int(out.sum(dtype="uint64")))
        same = all(r == results[0] for r in results)
        cells = "  ".join(f"{be}={t:.4f}s" for be, t in times.items())
        speed = f"  speedup={times['numpy'] / times['numba']:.1f}x" if "numba" in times else ""
        print(f"{label:40s} {cells}{speed}  agree={same}")


if __name__ == "__main__":
    main()
