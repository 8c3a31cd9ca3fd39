"""Full-size gridworld run: 20x20 grid, 10 targets, exact optimum and heuristic.

The exact product solve covers 400 * 2^10 product states and takes a long
time; this script is not part of the test suite.

Usage: python scripts/ocean_full.py [--seed 0] [--runs 1000]
"""

import argparse
import time

from covertime.bench import grid_instance
from covertime.heuristic import GAMMA_GRID
from covertime.product import optimal_policy_iteration
from covertime.sim import PlannerConfig, run_batch


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--runs", type=int, default=1000)
    ap.add_argument("--size", type=int, default=20)
    ap.add_argument("--targets", type=int, default=10)
    args = ap.parse_args()
    inst = grid_instance(args.seed, args.size, args.size, args.targets)
    print(f"{inst.id}: start {inst.start}, targets {list(inst.targets.members)}")
    t0 = time.perf_counter()
    st = run_batch(PlannerConfig("heuristic", gamma=GAMMA_GRID), inst, args.runs, args.seed)
    print(f"heuristic: mean {st.mean_cover:.3f}, var {st.var_cover:.3f} "
          f"({time.perf_counter() - t0:.1f}s for {args.runs} runs)")
    t0 = time.perf_counter()
    _, table = optimal_policy_iteration(inst.mdp, inst.targets, inst.start, cap=args.targets)
    print(f"optimal: {table.cover_time:.4f} ({time.perf_counter() - t0:.1f}s)")
    print(f"ratio: {st.mean_cover / table.cover_time:.3f}")


if __name__ == "__main__":
    main()
