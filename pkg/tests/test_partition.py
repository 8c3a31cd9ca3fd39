import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from covertime.environments import (clustered_instance, complete_graph, graph_mdp, ocean_gridworld,
                                    random_connected_graph, random_mdp)
from covertime.errors import CapExceeded, EmptyPart, SingletonTransfer, TooManyAgents
from covertime.mdp import TargetSet
from covertime.model_graph import build_model_graph
from covertime.partition import (M_a, Partition, SubgraphStats, _Search, avg_hamiltonian_length,
                                 brute_force_optimal_partition, contribution, greedy_m_center_init,
                                 heuristic_partition, part_cover_times, partition_transfers_swaps,
                                 random_equal_partition, subgraph_stats, swap_delta, transfer_delta)
from covertime.product import optimal_cover_time

from oracles import W_from_scratch, set_partitions


def _graph(mdp, targets, s0):
    return build_model_graph(mdp, goals=[s0, *targets])


def _cluster_sets(spec):
    return {frozenset(c) for c in spec.clusters}


# --- formulas ---------------------------------------------------------------

def test_average_length_on_complete_graph():
    g = build_model_graph(complete_graph(4))
    # two ordered pairs inside the part plus two start edges
    assert avg_hamiltonian_length(g, [1, 2], 0) == 2.0
    assert avg_hamiltonian_length(g, [3], 0) == 1.0
    with pytest.raises(EmptyPart):
        avg_hamiltonian_length(g, [], 0)


def test_transfer_matches_recompute_on_k4():
    g = build_model_graph(complete_graph(5))
    si, sk = subgraph_stats(g, [1, 2], 0), subgraph_stats(g, [3], 0)
    Li, Lk = transfer_delta(si, sk, g, 2, 0)
    assert Li == avg_hamiltonian_length(g, [1], 0)
    assert Lk == avg_hamiltonian_length(g, [2, 3], 0)
    with pytest.raises(SingletonTransfer):
        transfer_delta(sk, si, g, 3, 0)
    with pytest.raises(ValueError):
        transfer_delta(si, sk, g, 3, 0)


def test_swap_involution_and_symmetry():
    m = random_mdp(8, 2, 3)
    g = build_model_graph(m)
    si, sk = subgraph_stats(g, [1, 2, 3], 0), subgraph_stats(g, [4, 5], 0)
    Wi, Wk = swap_delta(si, sk, g, 2, 5, 0)
    si2, sk2 = SubgraphStats((1, 5, 3), Wi), SubgraphStats((4, 2), Wk)
    back = swap_delta(si2, sk2, g, 5, 2, 0)
    np.testing.assert_allclose(back, (si.W, sk.W), atol=1e-9)
    # on K_n every target is interchangeable
    g = build_model_graph(complete_graph(6))
    si, sk = subgraph_stats(g, [1, 2], 0), subgraph_stats(g, [3, 4, 5], 0)
    assert swap_delta(si, sk, g, 1, 4, 0) == (si.W, sk.W)


def test_swap_matches_recompute_on_random_instance():
    m = random_mdp(12, 3, 5)
    targets = list(range(1, 9))
    g = _graph(m, targets, 0)
    rng = np.random.default_rng(0)
    for _ in range(100):
        perm = rng.permutation(targets)
        cut = int(rng.integers(1, 8))
        Pi, Pk = sorted(perm[:cut].tolist()), sorted(perm[cut:].tolist())
        a, b = int(rng.choice(Pi)), int(rng.choice(Pk))
        Wi, Wk = swap_delta(subgraph_stats(g, Pi, 0), subgraph_stats(g, Pk, 0), g, a, b, 0)
        newi = [x for x in Pi if x != a] + [b]
        newk = [x for x in Pk if x != b] + [a]
        assert Wi == pytest.approx(subgraph_stats(g, newi, 0).W, abs=1e-9)
        assert Wk == pytest.approx(subgraph_stats(g, newk, 0).W, abs=1e-9)


def test_contribution_is_weight_difference():
    g = build_model_graph(random_mdp(7, 2, 1))
    part = [1, 3, 4]
    d = subgraph_stats(g, part + [6], 0).W - subgraph_stats(g, part, 0).W
    assert contribution(g, part, 6, 0) == pytest.approx(d, abs=1e-12)


@settings(max_examples=10)
@given(st.integers(0, 10**6))
def test_incremental_stats_match_recompute(seed):
    rng = np.random.default_rng(seed)
    m = random_mdp(14, 2, seed)
    targets = sorted(rng.choice(np.arange(1, 14), 10, replace=False).tolist())
    g = _graph(m, targets, 0)
    D = g.matrix(targets)
    d0 = np.array([g.w(0, t) for t in targets])
    k = 3
    parts = [list(p) for p in random_equal_partition(targets[:9], k, rng).parts]
    parts[0].append(targets[9])
    stats = [subgraph_stats(g, p, 0) for p in parts]
    search = _Search(g, targets, 0, parts)
    pos = {t: i for i, t in enumerate(targets)}
    for _ in range(100):
        i, j = rng.choice(k, 2, replace=False)
        if rng.random() < 0.5 and len(parts[i]) > 1:
            s = int(rng.choice(parts[i]))
            Li, Lj = transfer_delta(stats[i], stats[j], g, s, 0)
            parts[i].remove(s)
            parts[j].append(s)
            stats[i] = SubgraphStats(tuple(parts[i]), Li * len(parts[i]))
            stats[j] = SubgraphStats(tuple(parts[j]), Lj * len(parts[j]))
            Ws = search.W[i] - search.contrib(i)[pos[s]]
            Wd = search.W[j] + search.contrib(j)[pos[s]]
            search.apply_transfer(i, j, pos[s], Ws, Wd)
        else:
            a, b = int(rng.choice(parts[i])), int(rng.choice(parts[j]))
            Wi, Wj = swap_delta(stats[i], stats[j], g, a, b, 0)
            parts[i][parts[i].index(a)] = b
            parts[j][parts[j].index(b)] = a
            stats[i] = SubgraphStats(tuple(parts[i]), Wi)
            stats[j] = SubgraphStats(tuple(parts[j]), Wj)
            cross = D[pos[a], pos[b]] + D[pos[b], pos[a]]
            Ci, Cj = search.contrib(i), search.contrib(j)
            search.apply_swap(i, j, pos[a], pos[b],
                              search.W[i] - Ci[pos[a]] + Ci[pos[b]] - cross,
                              search.W[j] - Cj[pos[b]] + Cj[pos[a]] - cross)
        for p, s_ in zip(parts, stats):
            ref = W_from_scratch(D, d0, [pos[t] for t in p])
            assert s_.W == pytest.approx(ref, abs=1e-9)
            assert s_.L_a == pytest.approx(ref / len(p), abs=1e-9)
        for q in range(k):
            assert search.W[q] == pytest.approx(W_from_scratch(D, d0, search.members(q)), abs=1e-9)
            assert search.n[q] == len(parts[q])


def test_partition_json_and_validation():
    p = Partition(((1, 2), (3,)), 2, M_a=4.5, passes=2)
    d = json.loads(p.to_json())
    assert d == {"schema": 1, "m": 2, "parts": [[1, 2], [3]], "M_a": 4.5, "passes": 2}
    assert Partition.from_dict(d) == p
    with pytest.raises(ValueError):
        Partition(((1, 2), (2,)), 2)
    with pytest.raises(ValueError):
        Partition(((1,),), 2)


# --- initial partition ----------------------------------------------------------

def test_m_center_extremes():
    m = random_mdp(9, 2, 0)
    targets = [1, 2, 4, 7]
    g = _graph(m, targets, 0)
    assert greedy_m_center_init(g, targets, 4, 0).as_sets() == {frozenset([t]) for t in targets}
    assert greedy_m_center_init(g, targets, 1, 0).as_sets() == {frozenset(targets)}
    with pytest.raises(TooManyAgents):
        greedy_m_center_init(g, targets, 5, 0)


def test_m_center_separates_grid_corners():
    # deterministic 10x10 grid: two tight groups in opposite corners
    mdp = ocean_gridworld(10, 10, 0, noise_scale=0.0)
    a = [0, 1, 10]
    b = [88, 98, 99]
    g = _graph(mdp, a + b, 44)
    part = greedy_m_center_init(g, a + b, 2, 44)
    assert part.as_sets() == {frozenset(a), frozenset(b)}


# --- local search --------------------------------------------------------------------

def test_single_part_unchanged():
    m = random_mdp(8, 2, 2)
    targets = [1, 3, 5]
    g = _graph(m, targets, 0)
    init = Partition((tuple(targets),), 1)
    out = partition_transfers_swaps(g, targets, 1, 0, init)
    assert out.parts == init.parts and out.passes == 1


@settings(max_examples=25)
@given(st.integers(0, 10**6), st.integers(2, 4))
def test_search_monotone_and_terminates(seed, m):
    rng = np.random.default_rng(seed)
    mdp = random_connected_graph(20, 0.1, seed)
    targets = sorted(rng.choice(np.arange(1, 20), 8, replace=False).tolist())
    g = _graph(mdp, targets, 0)
    init = Partition(tuple(tuple(p) for p in np.array_split(rng.permutation(targets), m)), m)
    trace = []
    out = partition_transfers_swaps(g, targets, m, 0, init, trace=trace)
    seq = [M_a(g, init, 0)] + [t[3] for t in trace]
    assert all(b <= a + 1e-9 for a, b in zip(seq, seq[1:]))
    assert out.passes < 10**4
    assert out.M_a == pytest.approx(M_a(g, out, 0), abs=1e-9)
    assert sorted(t for p in out.parts for t in p) == targets
    assert all(p for p in out.parts)


def test_search_stops_at_pairwise_local_optimum():
    rng = np.random.default_rng(1)
    mdp = random_mdp(15, 3, 9)
    targets = sorted(rng.choice(np.arange(1, 15), 9, replace=False).tolist())
    g = _graph(mdp, targets, 0)
    out = heuristic_partition(g, targets, 3, 0)
    P = [list(p) for p in out.parts]
    L = lambda p: avg_hamiltonian_length(g, p, 0)
    for i, k in itertools.combinations(range(3), 2):
        cur = max(L(P[i]), L(P[k]))
        for a, b in itertools.product(P[i], P[k]):
            A = [x for x in P[i] if x != a] + [b]
            B = [x for x in P[k] if x != b] + [a]
            assert max(L(A), L(B)) >= cur - 1e-9
        for src, dst in ((i, k), (k, i)):
            for a in P[src]:
                A = [x for x in P[src] if x != a]
                if A:
                    assert max(L(A), L(P[dst] + [a])) >= cur - 1e-9


def test_search_is_deterministic():
    mdp = random_connected_graph(25, 0.1, 4)
    targets = list(range(1, 13))
    g = _graph(mdp, targets, 0)
    assert heuristic_partition(g, targets, 3, 0) == heuristic_partition(g, targets, 3, 0)


def test_barbell_partition_matches_brute_force():
    # two triangles joined through the start state
    mdp = graph_mdp(7, [(0, 1), (1, 2), (2, 3), (1, 3), (0, 4), (4, 5), (5, 6), (4, 6)])
    targets = [1, 2, 3, 4, 5, 6]
    ts = TargetSet(targets, 7)
    g = _graph(mdp, targets, 0)
    part = heuristic_partition(g, targets, 2, 0)
    best, value = brute_force_optimal_partition(mdp, ts, 2, 0)
    vals = part_cover_times(mdp, ts, 0)
    assert max(vals[ts.mask_of(p)] for p in part.parts) == value
    assert part.as_sets() == {frozenset([1, 2, 3]), frozenset([4, 5, 6])} == best.as_sets()


def test_random_equal_partition():
    p = random_equal_partition(range(6), 3, np.random.default_rng(0))
    assert sorted(len(x) for x in p.parts) == [2, 2, 2]
    with pytest.raises(ValueError):
        random_equal_partition(range(5), 3, np.random.default_rng(0))


# --- brute force ------------------------------------------------------------------------

def test_brute_force_single_agent_is_optimal_cover():
    m = random_mdp(6, 2, 7)
    ts = TargetSet([1, 2, 4])
    part, value = brute_force_optimal_partition(m, ts, 1, 0)
    assert value == pytest.approx(optimal_cover_time(m, ts, 0), rel=1e-12)
    assert part.parts == ((1, 2, 4),) and part.expected_cover_time == value


def test_brute_force_many_agents_gives_singletons():
    m = random_mdp(6, 2, 8)
    ts = TargetSet([1, 3, 5])
    part, value = brute_force_optimal_partition(m, ts, 4, 0)
    g = build_model_graph(m)
    assert value == pytest.approx(max(g.w(0, t) for t in ts.members), rel=1e-9)
    # singletons attain the optimum (ties with coarser parts are possible)
    vals = part_cover_times(m, ts, 0)
    assert max(vals[ts.mask_of([t])] for t in ts.members) == value
    assert max(vals[ts.mask_of(p)] for p in part.parts) == value


def test_brute_force_matches_enumeration():
    m = random_mdp(7, 2, 11)
    ts = TargetSet([1, 2, 4, 5, 6])
    vals = part_cover_times(m, ts, 0)
    ref = min(max(vals[ts.mask_of(b)] for b in p) for p in set_partitions(ts.members, 2))
    assert brute_force_optimal_partition(m, ts, 2, 0)[1] == pytest.approx(ref, rel=1e-12)


def test_part_cover_times_monotone():
    m = random_mdp(7, 2, 12)
    ts = TargetSet([1, 2, 4, 5])
    vals = part_cover_times(m, ts, 0)
    assert vals[0] == 0.0
    for a in range(16):
        for b in range(16):
            if a & b == a:
                assert vals[a] <= vals[b] + 1e-9


def test_brute_force_cap():
    with pytest.raises(CapExceeded):
        brute_force_optimal_partition(random_mdp(5, 2, 0), TargetSet([1, 2, 3]), 2, 0, cap=2)


# --- clustered instances ----------------------------------------------------------------

@pytest.mark.parametrize("seed", range(5))
def test_two_clusters_optimal_and_recovered(seed):
    mdp, ts, spec = clustered_instance(2, 3, 2, 26, seed)
    assert spec.optimality_bound_holds() and spec.recovery_bound_holds()
    R = _cluster_sets(spec)
    assert brute_force_optimal_partition(mdp, ts, 2, 0)[0].as_sets() == R
    g = _graph(mdp, ts.members, 0)
    rng = np.random.default_rng(seed)
    for _ in range(10):
        init = random_equal_partition(ts.members, 2, rng)
        assert partition_transfers_swaps(g, ts.members, 2, 0, init).as_sets() == R


def test_three_clusters_brute_force_recovers_clusters():
    mdp, ts, spec = clustered_instance(3, 2, 1, 10, 0)
    assert brute_force_optimal_partition(mdp, ts, 3, 0)[0].as_sets() == _cluster_sets(spec)


def test_three_cluster_cyclic_mix_is_a_local_optimum():
    # each part holds half of two different clusters, in a cycle; every
    # swap or transfer leaves the larger of the two pair costs unchanged,
    # so the search stops short of the cluster partition even though the
    # separation conditions hold
    mdp, ts, spec = clustered_instance(3, 2, 1, 10, 4)
    assert spec.recovery_bound_holds()
    (a1, a2), (b1, b2), (c1, c2) = spec.clusters
    init = Partition(((a2, b1), (a1, c2), (b2, c1)), 3)
    g = _graph(mdp, ts.members, 0)
    out = partition_transfers_swaps(g, ts.members, 3, 0, init)
    assert out.as_sets() == init.as_sets()
    assert out.M_a > M_a(g, Partition(spec.clusters, 3), 0)
