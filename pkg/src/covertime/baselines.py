"""Comparison planners on deterministic graphs: nearest neighbor and exact search."""

from __future__ import annotations

from itertools import permutations

import numpy as np
from scipy.sparse.csgraph import shortest_path

from .environments import neighbors
from .errors import CapExceeded, StepCapExceeded
from .mdp import Mdp
from .records import RolloutRecord

BRUTE_FORCE_CAP = 10
PERMUTATION_LIMIT = 8
STEP_CAP = 10**7


def _require_graph(mdp: Mdp):
    if not mdp.is_deterministic():
        raise ValueError("this baseline needs a deterministic graph MDP")


def nearest_neighbor_rollout(mdp: Mdp, targets, start: int, seed=None, step_cap: int = STEP_CAP,
                             keep_trajectory: bool = True) -> RolloutRecord:
    """Step onto an adjacent unvisited target if there is one, else to a random neighbor.

    Choices are uniform over the candidates. Self-loops added to pad the
    action set are not candidates.
    """
    _require_graph(mdp)
    rng = np.random.default_rng(seed)
    nbrs = [neighbors(mdp, s) for s in range(mdp.n_states)]
    remaining = set(int(t) for t in targets)
    hit = {}
    if start in remaining:
        remaining.discard(start)
        hit[start] = 0
    rec = RolloutRecord(seed=seed, start=start)
    s, t = start, 0
    while remaining:
        if t >= step_cap:
            raise StepCapExceeded(f"no cover after {step_cap} steps")
        near = [x for x in nbrs[s] if x in remaining]
        pool = near or nbrs[s]
        if not pool:
            raise ValueError(f"state {s} has no neighbors")
        nxt = pool[int(rng.integers(len(pool)))]
        if keep_trajectory:
            rec.trajectory.append((t, s, nbrs[s].index(nxt), len(remaining)))
        s, t = nxt, t + 1
        if s in remaining:
            remaining.discard(s)
            hit[s] = t
    if keep_trajectory:
        rec.trajectory.append((t, s, None, 0))
    rec.hit_times = hit
    rec.cover_time = max(hit.values()) if hit else 0
    rec.phases = len(hit) - (start in hit)
    return rec


def bfs_distances(mdp: Mdp, sources) -> np.ndarray:
    """Unweighted shortest-path lengths from ``sources`` to every state."""
    return shortest_path(mdp.support_graph().astype(float), directed=True,
                         unweighted=True, indices=np.asarray(sources))


def brute_force_cover_time_graph(mdp: Mdp, targets, start: int, cap: int = BRUTE_FORCE_CAP):
    """Shortest walk from ``start`` visiting every target.

    Returns
    -------
    order : tuple
        Targets in visiting order (excluding ``start``).
    length : int
    """
    _require_graph(mdp)
    todo = [int(t) for t in targets if t != start]
    if len(todo) > cap:
        raise CapExceeded(f"{len(todo)} targets exceed the exact-search cap of {cap}")
    if not todo:
        return (), 0
    D = bfs_distances(mdp, [start, *todo])
    d0 = D[0, todo]
    dd = D[1:][:, todo]
    if np.isinf(d0).any() or np.isinf(dd).any():
        raise ValueError("targets are not mutually reachable")
    if len(todo) <= PERMUTATION_LIMIT:
        best, best_order = np.inf, None
        for perm in permutations(range(len(todo))):
            length = d0[perm[0]] + sum(dd[a, b] for a, b in zip(perm, perm[1:]))
            if length < best:
                best, best_order = length, perm
    else:
        best, best_order = _held_karp(d0, dd)
    return tuple(todo[i] for i in best_order), int(best)


def _held_karp(d0, dd):
    """Open-path DP over (visited subset, last node)."""
    k = len(d0)
    full = 1 << k
    cost = np.full((full, k), np.inf)
    parent = np.full((full, k), -1, dtype=np.int64)
    for j in range(k):
        cost[1 << j, j] = d0[j]
    for mask in range(1, full):
        row = cost[mask]
        for j in np.flatnonzero(np.isfinite(row)):
            nxt = row[j] + dd[j]
            for n in range(k):
                if mask >> n & 1:
                    continue
                m2 = mask | 1 << n
                if nxt[n] < cost[m2, n]:
                    cost[m2, n] = nxt[n]
                    parent[m2, n] = j
    last = int(np.argmin(cost[full - 1]))
    best = cost[full - 1, last]
    order, mask = [], full - 1
    while last >= 0:
        order.append(last)
        prev = parent[mask, last]
        mask ^= 1 << last
        last = int(prev)
    return best, tuple(reversed(order))
