"""Compare the compiled kernels against the pure-numpy reference.

Backend selection happens once at import, so each timing runs in a fresh
subprocess with CONELQ_BACKEND pinned. Two workloads, both through the
public API: the backward solve (dominated by the post-default triangle)
and the Monte Carlo path loop.

Usage: python3 benchmarks/bench_backends.py [--grid N] [--paths N]
"""

import argparse
import json
import os
import subprocess
import sys

PAYLOAD = r"""
import json, sys, time
import numpy as np
from conelq import (
    ConeKind, ConeSpec, LQProblem, PostDefaultCoeffs, PreDefaultCoeffs,
    TerminalWeights, TimeGrid, assemble, backend_name, extract_policy, mc_cost,
)

n, paths = json.loads(sys.argv[1])
grid = TimeGrid(1.0, n)
pre = PreDefaultCoeffs.build(
    grid, 1, 1, a=0.05, b=[0.0], c=[0.15], d=[[0.4]], e=-0.4, f=[1.2],
    q=0.6, r=[[0.4]], lam=0.3,
)
post = PostDefaultCoeffs.constants(
    grid, 1, 1, a=-0.1, b=[-0.45], c=[0.1], d=[[0.5]], q=0.5, r=[[0.4]],
)
term = TerminalWeights.build(grid, 1.0, 2.0)
problem = LQProblem(grid, ConeSpec(ConeKind.NONNEG_ORTHANT, 1), 1, pre, post, term)

def best_of(reps, fn):
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)

t_solve = best_of(3, lambda: assemble(problem))
sol = assemble(problem)
policy = extract_policy(problem, sol)
t_mc = best_of(3, lambda: mc_cost(problem, policy, 1.0, paths, 42))
print(json.dumps({"backend": backend_name(), "solve": t_solve, "mc": t_mc}))
"""


def run_backend(backend, n, paths):
    env = {**os.environ, "CONELQ_BACKEND": backend}
    res = subprocess.run(
        [sys.executable, "-c", PAYLOAD, json.dumps([n, paths])],
        capture_output=True, text=True, env=env,
    )
    if res.returncode != 0:
        sys.stderr.write(res.stderr)
        raise SystemExit(f"{backend} run failed")
    out = json.loads(res.stdout)
    assert out["backend"] == backend
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--grid", type=int, default=400)
    ap.add_argument("--paths", type=int, default=20_000)
    args = ap.parse_args()

    rows = {b: run_backend(b, args.grid, args.paths) for b in ("python", "compiled")}
    print(f"workload: n={args.grid} backward solve, {args.paths} MC paths, best of 3")
    print(f"{'kernel':<10s} {'python':>10s} {'compiled':>10s} {'speedup':>9s}")
    for key, label in (("solve", "solve"), ("mc", "simulate")):
        py, cy = rows["python"][key], rows["compiled"][key]
        print(f"{label:<10s} {py * 1e3:9.1f}ms {cy * 1e3:9.1f}ms {py / cy:8.2f}x")


if __name__ == "__main__":
    main()
