"""Multi-agent target allocation on the model graph.

A part's cost is the average Hamiltonian path length

    L_a = W / n,   W = sum_{a, b in part} w(a, b) + sum_{a in part} w(s0, a),

a surrogate for its optimal cover time from ``s0``. The local search moves
targets between pairs of parts (transfers) or exchanges them (swaps),
accepting a move only when it strictly lowers the larger of the two costs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .errors import CapExceeded, EmptyPart, SingletonTransfer, TooManyAgents
from .model_graph import ModelGraph
from .product import optimal_policy_iteration, root_mask

MAX_PASSES = 10**4
BRUTE_FORCE_CAP = 12
# relative slack below which a move does not count as a strict improvement
IMPROVE_RTOL = 1e-12


@dataclass(frozen=True)
class Partition:
    parts: tuple
    m: int
    M_a: float | None = None
    passes: int = 0
    expected_cover_time: float | None = None

    def __post_init__(self):
        parts = tuple(tuple(int(s) for s in p) for p in self.parts)
        object.__setattr__(self, "parts", parts)
        seen = [s for p in parts for s in p]
        if len(seen) != len(set(seen)):
            raise ValueError("parts are not disjoint")
        if len(parts) != self.m:
            raise ValueError(f"{len(parts)} parts for m={self.m} agents")

    def as_sets(self) -> set:
        """Unordered view that ignores empty parts."""
        return {frozenset(p) for p in self.parts if p}

    def to_dict(self) -> dict:
        d = {"schema": 1, "m": self.m, "parts": [list(p) for p in self.parts],
             "M_a": self.M_a, "passes": self.passes}
        if self.expected_cover_time is not None:
            d["expected_cover_time"] = self.expected_cover_time
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d) -> "Partition":
        return cls(tuple(tuple(p) for p in d["parts"]), int(d["m"]), d.get("M_a"),
                   int(d.get("passes", 0)), d.get("expected_cover_time"))


@dataclass(frozen=True)
class SubgraphStats:
    members: tuple
    W: float

    @property
    def n(self) -> int:
        return len(self.members)

    @property
    def L_a(self) -> float:
        if not self.members:
            return 0.0
        return self.W / self.n


@dataclass(frozen=True)
class ClusterSpec:
    """Measured hitting-time bands of a clustered target set.

    ``w_c_min``/``w_c`` bound same-cluster weights, ``w_l``/``w_l_max``
    bound cross-cluster weights and ``w_1``/``w_2`` bound weights from the
    start state.
    """

    clusters: tuple
    n: int
    w_c_min: float
    w_c: float
    w_l: float
    w_l_max: float
    w_1: float
    w_2: float

    @classmethod
    def measure(cls, graph: ModelGraph, clusters, s0: int) -> "ClusterSpec":
        clusters = tuple(tuple(int(s) for s in c) for c in clusters)
        sizes = {len(c) for c in clusters}
        if len(sizes) != 1:
            raise ValueError("clusters must have equal size")
        intra, inter = [], []
        for i, ci in enumerate(clusters):
            for j, cj in enumerate(clusters):
                block = graph.matrix(ci) if i == j else None
                if i == j:
                    off = block[~np.eye(len(ci), dtype=bool)]
                    intra.extend(off.tolist())
                else:
                    inter.extend(graph.weights[np.ix_(ci, [graph._col[x] for x in cj])].ravel().tolist())
        start = [graph.w(s0, t) for c in clusters for t in c]
        intra = intra or [0.0]
        inter = inter or [np.inf]
        return cls(clusters, sizes.pop(), min(intra), max(intra), min(inter), max(inter),
                   min(start), max(start))

    def optimality_bound_holds(self) -> bool:
        """Cluster partition is optimal: ``w_l > (n-1) w_c + (w_2 - w_1)``."""
        return self.w_l > (self.n - 1) * self.w_c + (self.w_2 - self.w_1)

    def recovery_bound_holds(self) -> bool:
        """Wider separation ``w_l > 3 n w_c + w_c' + (w_2 - w_1)/2``.

        Under it the local search recovers two clusters from any equal-size
        start; with three or more clusters it can stall on a cyclic mix.
        """
        return self.w_l > 3 * self.n * self.w_c + self.w_c_min + (self.w_2 - self.w_1) / 2

    def bands_ordered(self) -> bool:
        return self.w_c_min <= self.w_c <= self.w_l <= self.w_l_max and self.w_1 <= self.w_2


# --- formulas on the model graph -------------------------------------------

def subgraph_stats(graph: ModelGraph, part, s0: int) -> SubgraphStats:
    part = tuple(int(s) for s in part)
    if not part:
        return SubgraphStats((), 0.0)
    W = float(graph.matrix(part).sum() + sum(graph.w(s0, s) for s in part))
    return SubgraphStats(part, W)


def avg_hamiltonian_length(graph: ModelGraph, part, s0: int) -> float:
    """Average length of a Hamiltonian path through ``part`` starting at ``s0``."""
    if len(part) == 0:
        raise EmptyPart("average Hamiltonian length of an empty part")
    return subgraph_stats(graph, part, s0).L_a


def contribution(graph: ModelGraph, part, s: int, s0: int) -> float:
    """Weight that state ``s`` adds to (or removes from) ``W`` of ``part``."""
    return float(sum(graph.w(x, s) + graph.w(s, x) for x in part) + graph.w(s0, s))


def transfer_delta(stats_i: SubgraphStats, stats_k: SubgraphStats, graph: ModelGraph,
                   s_i: int, s0: int):
    """``(L_a', L_a')`` of both parts after moving ``s_i`` from part i to part k."""
    if s_i not in stats_i.members:
        raise ValueError(f"{s_i} is not in the source part")
    if stats_i.n < 2:
        raise SingletonTransfer("cannot transfer out of a singleton part")
    Li = (stats_i.W - contribution(graph, stats_i.members, s_i, s0)) / (stats_i.n - 1)
    Lk = (stats_k.W + contribution(graph, stats_k.members, s_i, s0)) / (stats_k.n + 1)
    return Li, Lk


def swap_delta(stats_i: SubgraphStats, stats_k: SubgraphStats, graph: ModelGraph,
               s_i: int, s_k: int, s0: int):
    """``(W', W')`` of both parts after exchanging ``s_i`` and ``s_k``."""
    if s_i not in stats_i.members or s_k not in stats_k.members:
        raise ValueError("swap endpoints must belong to their parts")
    cross = graph.w(s_i, s_k) + graph.w(s_k, s_i)
    Wi = (stats_i.W - contribution(graph, stats_i.members, s_i, s0)
          + contribution(graph, stats_i.members, s_k, s0) - cross)
    Wk = (stats_k.W - contribution(graph, stats_k.members, s_k, s0)
          + contribution(graph, stats_k.members, s_i, s0) - cross)
    return Wi, Wk


def M_a(graph: ModelGraph, partition: Partition, s0: int) -> float:
    return max(subgraph_stats(graph, p, s0).L_a for p in partition.parts)


# --- local search ----------------------------------------------------------

class _Search:
    """Incremental state of the transfer/swap search on local target indices."""

    def __init__(self, graph: ModelGraph, targets, s0, parts):
        self.targets = [int(t) for t in targets]
        self.pos = {t: i for i, t in enumerate(self.targets)}
        self.D = graph.matrix(self.targets)
        self.d0 = np.array([graph.w(s0, t) for t in self.targets])
        self.label = np.full(len(self.targets), -1)
        for i, p in enumerate(parts):
            for s in p:
                self.label[self.pos[int(s)]] = i
        if np.any(self.label < 0):
            raise ValueError("initial partition does not cover every target")
        self.m = len(parts)
        self.W = np.array([self._W_scratch(i) for i in range(self.m)])
        self.n = np.array([np.sum(self.label == i) for i in range(self.m)])

    def members(self, i):
        return np.flatnonzero(self.label == i)

    def _W_scratch(self, i):
        idx = self.members(i)
        return float(self.D[np.ix_(idx, idx)].sum() + self.d0[idx].sum())

    def La(self, i):
        return float(self.W[i] / self.n[i]) if self.n[i] else 0.0

    def Ma(self):
        return float(max(self.La(i) for i in range(self.m)))

    def contrib(self, i):
        """Contribution of every target to part i (vector over local indices)."""
        idx = self.members(i)
        return self.D[idx].sum(axis=0) + self.D[:, idx].sum(axis=1) + self.d0

    def best_swap(self, i, k):
        Pi, Pk = self.members(i), self.members(k)
        if len(Pi) == 0 or len(Pk) == 0:
            return None
        Ci, Ck = self.contrib(i), self.contrib(k)
        cross = self.D[np.ix_(Pi, Pk)] + self.D[np.ix_(Pk, Pi)].T
        Wi = self.W[i] - Ci[Pi][:, None] + Ci[Pk][None, :] - cross
        Wk = self.W[k] - Ck[Pk][None, :] + Ck[Pi][:, None] - cross
        obj = np.maximum(Wi / self.n[i], Wk / self.n[k])
        a, b = np.unravel_index(np.argmin(obj), obj.shape)
        return obj[a, b], (Pi[a], Pk[b], Wi[a, b], Wk[a, b])

    def best_transfer(self, i, k):
        """Best single move between parts i and k in either direction."""
        best = None
        for src, dst in ((i, k), (k, i)):
            if self.n[src] < 2:
                continue
            P = self.members(src)
            Ws = self.W[src] - self.contrib(src)[P]
            Wd = self.W[dst] + self.contrib(dst)[P]
            obj = np.maximum(Ws / (self.n[src] - 1), Wd / (self.n[dst] + 1))
            j = int(np.argmin(obj))
            if best is None or obj[j] < best[0]:
                best = (obj[j], (src, dst, P[j], Ws[j], Wd[j]))
        return best

    def apply_swap(self, i, k, a, b, Wi, Wk):
        self.label[a], self.label[b] = k, i
        self.W[i], self.W[k] = Wi, Wk

    def apply_transfer(self, src, dst, a, Ws, Wd):
        self.label[a] = dst
        self.W[src], self.W[dst] = Ws, Wd
        self.n[src] -= 1
        self.n[dst] += 1

    def parts(self):
        return tuple(tuple(self.targets[j] for j in self.members(i)) for i in range(self.m))


def _improves(new, old):
    return new < old - IMPROVE_RTOL * max(1.0, abs(old))


def partition_transfers_swaps(graph: ModelGraph, targets, m: int, s0: int, init: Partition,
                              max_passes: int = MAX_PASSES, trace: list | None = None) -> Partition:
    """Local search over pairwise transfers and swaps.

    Each pass visits every pair ``(i, k)``, ``i < k``, that is not yet marked
    checked. The best swap (over all ``n_i * n_k`` exchanges) and then the
    best transfer (either direction, never emptying a part) are applied when
    they strictly lower ``max(L_a(i), L_a(k))``; otherwise the pair is marked
    checked for that move type. Marks of pairs touching a changed part are
    cleared. The search stops after a pass that does not lower ``M_a``.

    ``trace``, when given, receives ``(kind, i, k, M_a)`` for every accepted move.
    """
    if init.m != m:
        raise ValueError("initial partition has the wrong number of parts")
    st = _Search(graph, targets, s0, init.parts)
    pairs = list(combinations(range(m), 2))
    checked_swap, checked_transfer = set(), set()

    def touch(*ids):
        for pr in pairs:
            if pr[0] in ids or pr[1] in ids:
                checked_swap.discard(pr)
                checked_transfer.discard(pr)

    passes = 0
    while True:
        passes += 1
        if passes > max_passes:
            raise RuntimeError(f"partition search exceeded {max_passes} passes")
        before = st.Ma()
        for i, k in pairs:
            if (i, k) not in checked_swap:
                s_min = max(st.La(i), st.La(k))
                cand = st.best_swap(i, k)
                if cand is not None and _improves(cand[0], s_min):
                    st.apply_swap(i, k, *cand[1])
                    touch(i, k)
                    if trace is not None:
                        trace.append(("swap", i, k, st.Ma()))
                else:
                    checked_swap.add((i, k))
            if (i, k) not in checked_transfer:
                s_min = max(st.La(i), st.La(k))
                cand = st.best_transfer(i, k)
                if cand is not None and _improves(cand[0], s_min):
                    st.apply_transfer(*cand[1])
                    touch(i, k)
                    if trace is not None:
                        trace.append(("transfer", i, k, st.Ma()))
                else:
                    checked_transfer.add((i, k))
        if not _improves(st.Ma(), before):
            break
    return Partition(st.parts(), m, st.Ma(), passes)


def greedy_m_center_init(graph: ModelGraph, targets, m: int, s0: int) -> Partition:
    """Greedy m-center clustering on symmetrized hitting times.

    The first center is the target farthest from ``s0``; each further center
    maximizes its distance to the nearest chosen center. Targets join their
    nearest center. Ties go to the lowest index.
    """
    targets = [int(t) for t in targets]
    if m > len(targets):
        raise TooManyAgents(f"{m} agents for {len(targets)} targets")
    if m < 1:
        raise ValueError("need at least one agent")
    D = graph.matrix(targets)
    sym = (D + D.T) / 2
    d0 = np.array([graph.w(s0, t) for t in targets])
    centers = [int(np.argmax(d0))]
    nearest = sym[centers[0]].copy()
    while len(centers) < m:
        cand = nearest.copy()
        cand[centers] = -np.inf
        c = int(np.argmax(cand))
        centers.append(c)
        nearest = np.minimum(nearest, sym[c])
    assign = np.argmin(sym[:, centers], axis=1)
    for j, c in enumerate(centers):
        assign[c] = j
    parts = tuple(tuple(targets[t] for t in range(len(targets)) if assign[t] == j) for j in range(m))
    part = Partition(parts, m)
    return Partition(parts, m, M_a(graph, part, s0), 0)


def heuristic_partition(graph: ModelGraph, targets, m: int, s0: int) -> Partition:
    """Greedy m-center start followed by the transfer/swap search."""
    init = greedy_m_center_init(graph, targets, m, s0)
    return partition_transfers_swaps(graph, targets, m, s0, init)


def random_equal_partition(targets, m: int, rng) -> Partition:
    """Uniformly shuffled targets dealt into ``m`` parts of equal size."""
    targets = [int(t) for t in targets]
    if len(targets) % m:
        raise ValueError(f"{len(targets)} targets do not split evenly into {m} parts")
    perm = rng.permutation(len(targets))
    size = len(targets) // m
    parts = tuple(tuple(sorted(targets[j] for j in perm[i * size:(i + 1) * size])) for i in range(m))
    return Partition(parts, m)


# --- brute force -----------------------------------------------------------

def part_cover_times(mdp, targets, s0: int, cap: int = BRUTE_FORCE_CAP) -> np.ndarray:
    """Optimal expected cover time from ``s0`` of every subset mask of ``targets``."""
    from .mdp import TargetSet

    ts = targets if isinstance(targets, TargetSet) else TargetSet(list(targets), mdp.n_states)
    if len(ts) > cap:
        raise CapExceeded(f"{len(ts)} targets exceed the brute-force cap of {cap}")
    _, table = optimal_policy_iteration(mdp, ts, s0, cap=max(cap, len(ts)))
    root = root_mask(ts, s0)
    vals = np.empty(1 << len(ts))
    for mask in range(len(vals)):
        vals[mask] = table.values[mask & root, s0]
    return vals


def brute_force_optimal_partition(mdp, targets, m: int, s0: int, cap: int = BRUTE_FORCE_CAP):
    """Exact min-max partition by enumeration of all set partitions into <= m parts.

    Part costs are optimal expected cover times from the product solver.
    Enumeration is branch and bound; a part's cover time never decreases
    when targets are added, so partial maxima are valid lower bounds.

    Returns
    -------
    (Partition, float)
    """
    from .mdp import TargetSet

    ts = targets if isinstance(targets, TargetSet) else TargetSet(list(targets), mdp.n_states)
    if m < 1:
        raise ValueError("need at least one agent")
    vals = part_cover_times(mdp, ts, s0, cap)
    k = len(ts)
    best = [np.inf, None]
    blocks = []

    def rec(j, cur):
        if cur >= best[0]:
            return
        if j == k:
            best[0], best[1] = cur, list(blocks)
            return
        bit = 1 << j
        for b in range(len(blocks)):
            blocks[b] |= bit
            rec(j + 1, max(cur, vals[blocks[b]]))
            blocks[b] ^= bit
        if len(blocks) < m:
            blocks.append(bit)
            rec(j + 1, max(cur, vals[bit]))
            blocks.pop()

    rec(0, 0.0)
    masks = best[1] + [0] * (m - len(best[1]))
    parts = tuple(tuple(ts.states_of(b)) for b in masks)
    return Partition(parts, m, expected_cover_time=float(best[0])), float(best[0])
