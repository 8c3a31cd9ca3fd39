"""Desk-scale benchmark tables: graphs, random MDPs, multi-agent and gridworld."""

from __future__ import annotations

import time

import numpy as np

from .baselines import brute_force_cover_time_graph
from .environments import grid_state, ocean_gridworld, random_connected_graph, random_mdp
from .heuristic import GAMMA_GRAPH, GAMMA_GRID, GAMMA_GRID_MULTI
from .mdp import TargetSet
from .model_graph import build_model_graph
from .partition import brute_force_optimal_partition, heuristic_partition, part_cover_times
from .product import optimal_policy_iteration
from .sim import BatchStats, Instance, PlannerConfig, multi_agent_cover, run_batch

GRAPH_DENSITY = 0.2


def _exact_row(instance_id, algorithm, n_states, n_targets, value, seconds, m=1):
    return {"instance_id": instance_id, "algorithm": algorithm, "n_states": n_states,
            "n_targets": n_targets, "m": m, "runs": 0, "mean_cover": repr(float(value)),
            "var_cover": "0.0", "mean_runtime_sec": repr(seconds)}


def pick_targets(n_states, k, rng, exclude=()):
    pool = np.setdiff1d(np.arange(n_states), np.asarray(exclude, dtype=np.int64))
    return sorted(int(x) for x in rng.choice(pool, size=k, replace=False))


def graph_instance(seed, n_states, n_targets, density=GRAPH_DENSITY):
    mdp = random_connected_graph(n_states, density, seed)
    rng = np.random.default_rng([seed, 1])
    start = int(rng.integers(n_states))
    targets = pick_targets(n_states, n_targets, rng, exclude=[start])
    return Instance(mdp, TargetSet(targets, n_states), start, f"graph-{n_states}-{n_targets}-{seed}")


def mdp_instance(seed, n_states, n_targets, n_actions=4):
    mdp = random_mdp(n_states, n_actions, seed)
    rng = np.random.default_rng([seed, 1])
    start = int(rng.integers(n_states))
    targets = pick_targets(n_states, n_targets, rng, exclude=[start])
    return Instance(mdp, TargetSet(targets, n_states), start, f"mdp-{n_states}-{n_targets}-{seed}")


def grid_instance(seed, width, height, n_targets, noise_scale=0.5):
    mdp = ocean_gridworld(width, height, seed, noise_scale)
    rng = np.random.default_rng([seed, 1])
    start = grid_state(width // 2, height // 2, width)
    targets = pick_targets(width * height, n_targets, rng, exclude=[start])
    return Instance(mdp, TargetSet(targets, mdp.n_states), start, f"grid-{width}x{height}-{seed}")


def table_graphs(seeds, sizes=((50, 8), (50, 10), (100, 8), (100, 10)), runs=1000):
    """Exact optimum, the discounted heuristic and nearest neighbor on random graphs."""
    rows = []
    for n_states, n_targets in sizes:
        for seed in seeds:
            inst = graph_instance(seed, n_states, n_targets)
            t0 = time.perf_counter()
            _, opt = brute_force_cover_time_graph(inst.mdp, inst.targets.members, inst.start)
            rows.append(_exact_row(inst.id, "optimal", n_states, n_targets, opt, time.perf_counter() - t0))
            st = run_batch(PlannerConfig("heuristic", gamma=GAMMA_GRAPH), inst, runs, seed)
            rows.append(st.csv_row(inst.id, "heuristic", n_states, n_targets))
            st = run_batch(PlannerConfig("nearest"), inst, runs, seed)
            rows.append(st.csv_row(inst.id, "nearest", n_states, n_targets))
    return rows


def table_mdps(seeds, sizes=((30, 6), (50, 8)), runs=1000, n_actions=4):
    """Exact product solve and the discounted heuristic on random MDPs."""
    rows = []
    for n_states, n_targets in sizes:
        for seed in seeds:
            inst = mdp_instance(seed, n_states, n_targets, n_actions)
            t0 = time.perf_counter()
            _, table = optimal_policy_iteration(inst.mdp, inst.targets, inst.start)
            rows.append(_exact_row(inst.id, "optimal", n_states, n_targets, table.cover_time,
                                   time.perf_counter() - t0))
            st = run_batch(PlannerConfig("heuristic", gamma=GAMMA_GRAPH), inst, runs, seed)
            rows.append(st.csv_row(inst.id, "heuristic", n_states, n_targets))
    return rows


def multi_agent_rows(inst, m, gamma, runs, seed):
    n_states, n_targets = inst.mdp.n_states, len(inst.targets)
    t0 = time.perf_counter()
    best, value = brute_force_optimal_partition(inst.mdp, inst.targets, m, inst.start)
    rows = [_exact_row(inst.id, "optimal-partition", n_states, n_targets, value,
                       time.perf_counter() - t0, m)]
    t0 = time.perf_counter()
    graph = build_model_graph(inst.mdp, goals=[inst.start, *inst.targets.members])
    part = heuristic_partition(graph, inst.targets.members, m, inst.start)
    elapsed = time.perf_counter() - t0
    vals = part_cover_times(inst.mdp, inst.targets, inst.start)
    heur_value = max(vals[inst.targets.mask_of(p)] for p in part.parts)
    rows.append(_exact_row(inst.id, "heuristic-partition", n_states, n_targets, heur_value, elapsed, m))
    cfg = PlannerConfig("heuristic", gamma=gamma)
    runners = {}
    covers, times = [], []
    for i in range(runs):
        t0 = time.perf_counter()
        covers.append(multi_agent_cover(part, cfg, inst, seed + i, runners))
        times.append(time.perf_counter() - t0)
    rows.append(BatchStats.from_covers(covers, times).csv_row(inst.id, "heuristic-partition+heuristic", n_states, n_targets, m))
    return rows


def table_multi(seeds, runs=1000, m=3):
    """Optimal vs heuristic partitions on random MDPs and gridworlds."""
    rows = []
    for seed in seeds:
        rows += multi_agent_rows(mdp_instance(seed, 30, 8), m, GAMMA_GRAPH, runs, seed)
        rows += multi_agent_rows(grid_instance(seed, 8, 8, 8), m, GAMMA_GRID_MULTI, runs, seed)
    return rows


def table_ocean(seeds, runs=1000, full=False):
    """Discounted heuristic against the optimum on a stochastic gridworld.

    The default is a 6x6 grid with 5 targets; ``full`` runs the 20x20 grid
    with 10 targets, whose exact solve takes a long time.
    """
    w, k = (20, 10) if full else (6, 5)
    rows = []
    for seed in seeds:
        inst = grid_instance(seed, w, w, k)
        t0 = time.perf_counter()
        _, table = optimal_policy_iteration(inst.mdp, inst.targets, inst.start)
        rows.append(_exact_row(inst.id, "optimal", w * w, k, table.cover_time, time.perf_counter() - t0))
        st = run_batch(PlannerConfig("heuristic", gamma=GAMMA_GRID), inst, runs, seed)
        rows.append(st.csv_row(inst.id, "heuristic", w * w, k))
    return rows
