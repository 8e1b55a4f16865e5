"""Compiled kernels vs the pure-NumPy fallback.

Runs the same workload in two subprocesses, one with SEQACTION_NUMBA=0, and
prints best-of-N wall times. Compile time is reported separately.

    python3 bench/bench_kernels.py [--repeat 3]
"""
import argparse
import json
import os
import subprocess
import sys

WORKLOAD = r"""
import json, sys, time
import numpy as np
from seqaction import integrate_hybrid, integrate_smooth, run_closed_loop, simulate_adjoint
from seqaction.benchmarks import build_benchmark

repeat = int(sys.argv[1])
cart = build_benchmark("cart_pendulum_swingup")
ball = build_benchmark("ball_down")

def smooth():
    traj = integrate_smooth(cart.model, [3.0, 0.0], None, (0.0, 2.0), 1e-3)
    simulate_adjoint(traj, cart.cost)

def hybrid():
    integrate_hybrid(ball.model, "q1", [0.0, 1.0, 0.5, 0.0], None, (0.0, 3.0), 1e-3)

def loop():
    run_closed_loop(cart.model, cart.cost, cart.params, cart.x0, 0.05)

out = {}
for name, fn in (("integrate+adjoint", smooth), ("hybrid integrate", hybrid), ("closed loop 50 cycles", loop)):
    t = time.perf_counter()
    fn()
    first = time.perf_counter() - t
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    out[name] = {"first": first, "best": best}
print(json.dumps(out))
"""


def run(flag: str, repeat: int) -> dict:
    env = dict(os.environ, SEQACTION_NUMBA=flag)
    res = subprocess.run([sys.executable, "-c", WORKLOAD, str(repeat)], env=env, capture_output=True, text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    fast = run("1", args.repeat)
    slow = run("0", args.repeat)
    print(f"{'workload':<24}{'numba (s)':>12}{'numpy (s)':>12}{'speedup':>10}{'first call':>12}")
    for name in fast:
        f, s = fast[name]["best"], slow[name]["best"]
        print(f"{name:<24}{f:>12.4f}{s:>12.4f}{s / f:>9.1f}x{fast[name]['first']:>11.1f}s")


if __name__ == "__main__":
    main()
