"""Time the numba kernels against the numpy/scipy fallbacks.

    python3 benchmarks/bench_kernels.py [--steps 200000] [--agents 500] [--nodes 200000]

The simulation kernel runs a two-state swap protocol that never
deadlocks, so every step does the full amount of work.  The SCC benchmark labels a random
sparse digraph.  The best of several runs is reported; the first numba call compiles.
"""

import argparse
import time

import numpy as np

from popmod import _jit, kernels
from popmod.model import validate_protocol
from popmod.semantics import _protocol_arrays


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def paths():
    return (True, False) if _jit.HAVE_NUMBA else (False,)


def bench_simulation(agents, steps, repeat):
    p = validate_protocol("swap", ["a", "b"], [("a", "b", "b", "a")], {"a", "b"},
                          {"a": "x", "b": "y"})
    _, (L1, L2, R1, R2) = _protocol_arrays(p)
    start = np.arange(agents, dtype=np.int64) % 2
    uniforms = np.random.default_rng(1).random((steps, 2))

    def segment():
        states = start.copy()
        counts = np.bincount(states, minlength=2).astype(np.int64)
        rec = [np.full(steps, -1, dt) for dt in (np.int8, np.int64, np.int64, np.int64)]
        kernels.sim_segment(states, np.ones(agents, np.bool_), np.zeros(agents, np.int64),
                            counts, L1, L2, R1, R2, -1, 1, uniforms, 0, steps, *rec)
        return [r.tolist() for r in rec]

    results = {}
    for jit in paths():
        (_jit.enable_jit if jit else _jit.disable_jit)()
        dt, out = best_of(segment, repeat)
        results["numba" if jit else "numpy"] = (dt, out)
    return results


def bench_scc(nodes, repeat):
    rng = np.random.default_rng(0)
    m = 2 * nodes
    src = rng.integers(0, nodes, size=m)
    dst = rng.integers(0, nodes, size=m)
    results = {}
    for jit in paths():
        (_jit.enable_jit if jit else _jit.disable_jit)()
        kernels.scc_labels(10, src[:5] % 10, dst[:5] % 10)
        dt, (ncomp, _) = best_of(lambda: kernels.scc_labels(nodes, src, dst), repeat)
        results["numba" if jit else "numpy"] = (dt, ncomp)
    return results


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--agents", type=int, default=500)
    ap.add_argument("--steps", type=int, default=200_000)
    ap.add_argument("--nodes", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    start = _jit.jit_enabled()
    try:
        sim = bench_simulation(args.agents, args.steps, args.repeat)
        scc = bench_scc(args.nodes, args.repeat)
    finally:
        _jit.ENABLE_JIT = start
    print(f"{'kernel':<12}{'path':<8}{'seconds':>10}")
    for name, res in (("simulation", sim), ("scc", scc)):
        for path, (dt, _) in res.items():
            print(f"{name:<12}{path:<8}{dt:>10.4f}")
        if len(res) == 2:
            (a, ra), (b, rb) = res["numba"], res["numpy"]
            same = "identical" if ra == rb else "DIFFERENT"
            print(f"{'':<12}speedup {b / a:>9.1f}x  results {same}")


if __name__ == "__main__":
    main()
