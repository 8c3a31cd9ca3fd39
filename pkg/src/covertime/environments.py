"""Seeded instance generators: graphs, random MDPs, current-driven gridworlds
and clustered target layouts."""

from __future__ import annotations

from itertools import combinations

import numpy as np
from scipy.ndimage import convolve

from .errors import ConstructionFailed
from .mdp import Mdp, TargetSet
from .model_graph import build_model_graph

# grid actions, as (dx, dy) with y growing southwards
DIRECTIONS = ("N", "W", "S", "E")
_STEP = np.array([(0, -1), (-1, 0), (0, 1), (1, 0)])


# --- graphs ----------------------------------------------------------------

def graph_mdp(n: int, edges, meta=None) -> Mdp:
    """Deterministic MDP of an undirected graph.

    Action ``k`` moves to the ``k``-th neighbor in sorted order; states with
    fewer neighbors than the maximum degree pad with self-loops.
    """
    nbrs = [set() for _ in range(n)]
    for u, v in edges:
        if u == v:
            raise ValueError(f"self-loop edge at {u}")
        nbrs[u].add(v)
        nbrs[v].add(u)
    A = max(1, max(len(x) for x in nbrs))
    rows = {}
    for s in range(n):
        succ = sorted(nbrs[s])
        for a in range(A):
            to = succ[a] if a < len(succ) else s
            rows[(s, a)] = ([to], [1.0])
    m = {"family": "graph"}
    m.update(meta or {})
    return Mdp.from_rows(n, A, rows, meta=m)


def neighbors(mdp: Mdp, s: int) -> list:
    """Distinct successors of ``s`` other than ``s`` itself."""
    out = set()
    for a in range(mdp.n_actions):
        to, _ = mdp.row(s, a)
        out.update(int(x) for x in to)
    out.discard(s)
    return sorted(out)


def path_graph(n: int) -> Mdp:
    return graph_mdp(n, [(i, i + 1) for i in range(n - 1)], {"kind": "path"})


def cycle_graph(n: int) -> Mdp:
    if n < 3:
        raise ValueError("a cycle needs at least 3 vertices")
    return graph_mdp(n, [(i, (i + 1) % n) for i in range(n)], {"kind": "cycle"})


def complete_graph(n: int) -> Mdp:
    return graph_mdp(n, list(combinations(range(n), 2)), {"kind": "complete"})


def random_connected_graph(n: int, edge_density: float, seed) -> Mdp:
    """Random spanning tree plus a fraction ``edge_density`` of the remaining pairs.

    ``edge_density = 0`` gives a tree, ``1`` the complete graph.
    """
    if n < 2:
        raise ValueError("need at least two vertices")
    if not 0.0 <= edge_density <= 1.0:
        raise ValueError("edge_density must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    tree = set()
    for i in range(1, n):
        j = int(rng.integers(i))
        u, v = sorted((int(order[i]), int(order[j])))
        tree.add((u, v))
    rest = [e for e in combinations(range(n), 2) if e not in tree]
    k = int(round(edge_density * len(rest)))
    pick = rng.choice(len(rest), size=k, replace=False) if k else []
    edges = sorted(tree | {rest[i] for i in pick})
    return graph_mdp(n, edges, {"kind": "random", "seed": _seed_meta(seed),
                                "edge_density": edge_density})


def _seed_meta(seed):
    return int(seed) if seed is not None else None


# --- random MDPs -----------------------------------------------------------

def random_mdp(n_states: int, n_actions: int, seed, mode: str = "simplex-uniform") -> Mdp:
    """Dense random MDP.

    ``simplex-uniform`` draws each row from a flat Dirichlet; ``literal-uniform``
    sets every row to ``1 / n_states`` (all policies then coincide).
    """
    if n_states < 1 or n_actions < 1:
        raise ValueError("need at least one state and one action")
    rng = np.random.default_rng(seed)
    if mode == "simplex-uniform":
        T = rng.dirichlet(np.ones(n_states), size=(n_states, n_actions))
    elif mode == "literal-uniform":
        T = np.full((n_states, n_actions, n_states), 1.0 / n_states)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    # renormalize away floating drift so rows sum to 1 within a few ulps
    T /= T.sum(axis=2, keepdims=True)
    return Mdp.from_dense(T, meta={"family": "mdp", "mode": mode, "seed": _seed_meta(seed)})


# --- gridworlds ------------------------------------------------------------

def grid_state(x: int, y: int, width: int) -> int:
    return y * width + x


def grid_xy(s: int, width: int):
    return s % width, s // width


def current_field(width: int, height: int, seed, max_norm: float = 0.5) -> np.ndarray:
    """Smooth random drift vectors of shape ``(height, width, 2)``."""
    rng = np.random.default_rng(seed)
    raw = rng.standard_normal((height, width, 2))
    k = np.full((3, 3), 1.0 / 9.0)
    field = np.stack([convolve(raw[..., i], k, mode="nearest") for i in range(2)], axis=-1)
    norm = np.linalg.norm(field, axis=-1, keepdims=True)
    scale = np.minimum(1.0, max_norm / np.maximum(norm, 1e-300))
    return field * scale


def ocean_gridworld(width: int, height: int, current_field_seed, noise_scale: float = 0.5) -> Mdp:
    """Four-action gridworld whose moves are perturbed by a smooth current.

    For action ``a`` in cell ``c`` the candidate destinations are the in-grid
    neighbors, with logit ``([k == a] + d(c) . u_k) / noise_scale`` for the
    move in direction ``u_k`` under drift ``d(c)``. An intended move off the
    grid keeps the agent in place. ``noise_scale = 0`` gives the
    deterministic gridworld.
    """
    if width < 2 or height < 2:
        raise ValueError("grid must be at least 2x2")
    if noise_scale < 0:
        raise ValueError("noise_scale must be nonnegative")
    drift = current_field(width, height, current_field_seed)
    rows = {}
    for y in range(height):
        for x in range(width):
            s = grid_state(x, y, width)
            d = drift[y, x]
            dest, push = [], []
            for k, (dx, dy) in enumerate(_STEP):
                nx, ny = x + dx, y + dy
                if 0 <= nx < width and 0 <= ny < height:
                    dest.append(grid_state(nx, ny, width))
                else:
                    dest.append(None)
                push.append(float(d @ _STEP[k]))
            for a in range(4):
                to, logit = [], []
                for k in range(4):
                    if dest[k] is None and k != a:
                        continue
                    to.append(s if dest[k] is None else dest[k])
                    logit.append(float(k == a) + push[k])
                logit = np.array(logit)
                if noise_scale == 0:
                    p = (logit == logit.max()).astype(float)
                else:
                    p = np.exp((logit - logit.max()) / noise_scale)
                p /= p.sum()
                rows[(s, a)] = (to, p)
    labels = [f"{x},{y}" for y in range(height) for x in range(width)]
    meta = {"family": "grid", "width": width, "height": height,
            "seed": _seed_meta(current_field_seed), "noise_scale": noise_scale}
    return Mdp.from_rows(width * height, 4, rows, labels=labels, meta=meta)


# --- clustered target layouts -----------------------------------------------

def clustered_instance(m: int, n: int, w_c_target: int, w_l_target: int, seed,
                       jitter: int = 1, require=("optimality", "recovery")):
    """Hub-and-spoke graph with ``m`` clusters of ``n`` targets each.

    State 0 is the hub and start. Each cluster hangs off a gate at the end of
    a path from the hub; path lengths differ by at most ``jitter``. With
    ``w_c_target = 1`` a cluster is a clique, with ``2`` its targets meet at
    the gate and a random half of the target pairs get a direct edge.

    The realized bands are measured from the model graph and each condition
    named in ``require`` is checked.

    Returns
    -------
    (Mdp, TargetSet, ClusterSpec)
    """
    from .partition import ClusterSpec

    if m < 1 or n < 1:
        raise ValueError("need m, n >= 1")
    if w_c_target not in (1, 2):
        raise ConstructionFailed("intra-cluster distance must be 1 or 2 in this construction")
    rng = np.random.default_rng(seed)
    base = max(1, int(np.ceil(w_l_target / 2)) - 1)
    edges, clusters = [], []
    nxt = 1
    for _ in range(m):
        length = base + int(rng.integers(jitter + 1))
        prev = 0
        for _ in range(length):
            edges.append((prev, nxt))
            prev, nxt = nxt, nxt + 1
        gate = prev
        members = list(range(nxt, nxt + n))
        nxt += n
        for t in members:
            edges.append((gate, t))
        for u, v in combinations(members, 2):
            if w_c_target == 1 or rng.random() < 0.5:
                edges.append((u, v))
        clusters.append(tuple(members))
    mdp = graph_mdp(nxt, edges, {"kind": "clustered", "seed": _seed_meta(seed),
                                 "clusters": [list(c) for c in clusters]})
    targets = TargetSet([t for c in clusters for t in c], mdp.n_states)
    graph = build_model_graph(mdp, goals=[0, *targets.members])
    spec = ClusterSpec.measure(graph, clusters, 0)
    for cond in require:
        ok = {"optimality": spec.optimality_bound_holds, "recovery": spec.recovery_bound_holds}[cond]()
        if not ok:
            raise ConstructionFailed(f"realized bands violate {cond}: {spec}")
    return mdp, targets, spec
