"""Compiled vs interpreted episode throughput.

Each backend runs in its own interpreter because the choice is made at import
time (CTQL_DISABLE_NUMBA). Usage:

    python benchmarks/bench_kernels.py [--episodes 200]
"""
import argparse
import json
import os
import subprocess
import sys

WORKER = """
import json, math, time
import numpy as np
from ctql import _jit
from ctql.algorithms import AlgorithmConfig, run_episode
from ctql.dynamics import PendulumParams
from ctql.policies import new_qtable

episodes = {episodes}
env = PendulumParams()
out = {{"numba": _jit.USE_NUMBA}}
for cfg in (AlgorithmConfig("QL"), AlgorithmConfig("CTQL"), AlgorithmConfig("pCTQL", 0.9897)):
    q = new_qtable()
    rng = np.random.default_rng(0)
    run_episode(cfg, q, env, [math.pi, 0.0], 1, 400, rng)  # compile / warm up
    t0 = time.perf_counter()
    for e in range(1, episodes + 1):
        run_episode(cfg, q, env, [math.pi, 0.0], e, 400, rng)
    out[cfg.label] = (time.perf_counter() - t0) / episodes
print(json.dumps(out))
"""


def measure(disable, episodes):
    env = dict(os.environ)
    env.pop("CTQL_DISABLE_NUMBA", None)
    if disable:
        env["CTQL_DISABLE_NUMBA"] = "1"
    proc = subprocess.run([sys.executable, "-c", WORKER.format(episodes=episodes)],
                          env=env, capture_output=True, text=True, check=True)
    return json.loads(proc.stdout)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--episodes", type=int, default=200)
    args = parser.parse_args()

    compiled = measure(False, args.episodes)
    # the interpreted loop is ~100x slower; keep its wall time reasonable
    interpreted = measure(True, max(1, args.episodes // 20))
    if not compiled.pop("numba"):
        print("numba is not importable; both columns use the interpreted path")
    interpreted.pop("numba")

    print(f"{'algorithm':<14}{'numba ms/ep':>14}{'numpy ms/ep':>14}{'speedup':>10}")
    for label, t in compiled.items():
        slow = interpreted[label]
        print(f"{label:<14}{t * 1e3:>14.3f}{slow * 1e3:>14.2f}{slow / t:>9.0f}x")
    steps = 10 * 10_000 * 400
    print(f"full plan estimate per algorithm (numba): {compiled['QL'] * steps / 400:.0f} s")


if __name__ == "__main__":
    main()
