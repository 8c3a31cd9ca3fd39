import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from covertime.environments import (complete_graph, cycle_graph, neighbors, path_graph,
                                    random_connected_graph, random_mdp)
from covertime.errors import NonConvergence, StepCapExceeded
from covertime.heuristic import (_q_table, greedy_action, phase_value_iteration, plan_and_execute,
                                 sample_successor)
from covertime.mdp import Mdp, hitting_times, policy_matrix
from covertime.records import RolloutRecord

from oracles import bfs, expected_time_to, graph_adjacency


# --- phase values ------------------------------------------------------------

def test_k3_closed_form():
    # from 0 or 1 the target is one step away; from 2 it is two steps away
    # shifted frame: V(0) = 1 + g V(2), V(2) = g V(0)  =>  V(0) = 1 / (1 - g^2)
    g = 0.5
    ph = phase_value_iteration(complete_graph(3), {2}, g, 1e-14)
    np.testing.assert_allclose(ph.shifted, [4 / 3, 4 / 3, 2 / 3], atol=1e-12)
    np.testing.assert_allclose(ph.values, [4 / 3 - 2, 4 / 3 - 2, 2 / 3 - 2], atol=1e-12)


def test_path3_monotone_toward_target():
    ph = phase_value_iteration(path_graph(3), {2}, 0.5, 1e-12)
    # the end states carry a padding self-loop, so the agent may sit on 2:
    # V(2) = 1 + g V(2), V(1) = 1 + g V(2), V(0) = g V(1)
    np.testing.assert_allclose(ph.shifted, [1.0, 2.0, 2.0], atol=1e-11)
    assert ph.values[1] - ph.values[0] > 0


def test_unshifted_iteration_agrees():
    m = random_mdp(6, 3, 5)
    rem = {1, 4}
    g = 0.5
    ph = phase_value_iteration(m, rem, g, 1e-13)
    r = ph.reward(6)
    assert sorted(set(r)) == [-2.0, -1.0]
    V = np.full(6, r.min() / (1 - g))
    T = m.dense()
    for _ in range(200):
        V = (T @ (r + g * V)).max(axis=1)
    np.testing.assert_allclose(ph.values, V, atol=1e-10)


def test_all_states_remaining_gives_flat_q():
    m = random_mdp(5, 3, 2)
    ph = phase_value_iteration(m, range(5), 0.3, 1e-14)
    q = _q_table(m, ph)
    np.testing.assert_allclose(q, q[0, 0], rtol=1e-12)


def test_phase_argument_checks():
    m = path_graph(3)
    with pytest.raises(ValueError):
        phase_value_iteration(m, set(), 0.5)
    with pytest.raises(ValueError):
        phase_value_iteration(m, {1}, 1.0)
    with pytest.raises(ValueError):
        phase_value_iteration(m, {1}, 0.5, epsilon=0)
    with pytest.raises(NonConvergence):
        phase_value_iteration(m, {2}, 0.9, 1e-12, max_sweeps=3)


def test_phase_value_at_gamma_zero():
    ph = phase_value_iteration(path_graph(4), {3}, 0.0)
    # state 3 can stay on itself through its padding self-loop
    np.testing.assert_array_equal(ph.shifted, [0, 0, 1, 1])


# --- greedy action ------------------------------------------------------------

def test_greedy_takes_one_step_target():
    # action 1 reaches the target 2 surely; action 0 wanders
    m = Mdp.from_dense([[[0.5, 0.5, 0], [0, 0, 1]], [[1, 0, 0], [1, 0, 0]], [[1, 0, 0], [1, 0, 0]]])
    ph = phase_value_iteration(m, {2}, 0.3)
    assert greedy_action(m, ph, 0, np.random.default_rng(0)) == 1


def test_identical_actions_reproducible():
    m = Mdp.from_dense(np.full((3, 4, 3), 1 / 3))
    ph = phase_value_iteration(m, {2}, 0.3)
    a = [greedy_action(m, ph, 0, np.random.default_rng(7)) for _ in range(5)]
    assert len(set(a)) == 1
    picks = {greedy_action(m, ph, 0, np.random.default_rng(s)) for s in range(50)}
    assert picks == {0, 1, 2, 3}
    assert greedy_action(m, ph, 0, tie_break="lowest") == 0


@pytest.mark.parametrize("mk, n", [(cycle_graph, 7), (complete_graph, 5), (path_graph, 2)])
def test_gamma_zero_matches_nearest_neighbor_rule(mk, n):
    # on graphs without padded self-loops the maximizers at gamma=0 are the
    # moves onto adjacent unvisited targets, else every neighbor
    m = mk(n)
    for r in range(1, n + 1):
        for rem in itertools.combinations(range(n), r):
            q = _q_table(m, phase_value_iteration(m, rem, 0.0))
            for s in range(n):
                best = {int(m.row(s, a)[0][0]) for a in np.flatnonzero(q[s] == q[s].max())}
                nb = neighbors(m, s)
                near = [x for x in nb if x in rem]
                assert best == set(near or nb)


# --- per-phase behaviour ----------------------------------------------------------

@given(st.integers(0, 10**6), st.sampled_from([0.1, 0.3]))
def test_phase_policy_reaches_nearest_target_on_graphs(seed, gamma):
    # with gamma < 1/2 a nearer target always outweighs any bonus behind a farther one
    m = random_connected_graph(12, 0.1, seed)
    rng = np.random.default_rng(seed)
    rem = sorted(rng.choice(12, int(rng.integers(1, 5)), replace=False).tolist())
    ph = phase_value_iteration(m, rem, gamma, 1e-14)
    acts = _q_table(m, ph).argmax(axis=1)
    h = hitting_times(policy_matrix(m, acts), rem)
    adj = graph_adjacency(m.dense())
    for s in range(12):
        assert h[s] == min(bfs(adj, s).get(t, np.inf) for t in rem)


@given(st.integers(0, 10**6))
def test_phase_policy_reaches_remaining_set_surely(seed):
    m = random_mdp(6, 2, seed)
    rem = {int(seed % 6)}
    for g in (0.1, 0.5, 0.9):
        acts = _q_table(m, phase_value_iteration(m, rem, g, 1e-12)).argmax(axis=1)
        assert np.all(np.isfinite(hitting_times(policy_matrix(m, acts), sorted(rem))))


def test_phase_policy_can_be_slower_than_ssp_optimum():
    # a stochastic fixture where the greedy policy is the same for every gamma
    # probed, yet its expected time to the remaining set is not minimal
    m = random_mdp(5, 2, 20)
    rem = [1, 4]
    pols = {tuple(_q_table(m, phase_value_iteration(m, rem, g, 1e-12)).argmax(axis=1))
            for g in (0.1, 0.5, 0.9)}
    assert len(pols) == 1
    h = hitting_times(policy_matrix(m, np.array(pols.pop())), rem)
    T = m.dense()
    best = np.full(5, np.inf)
    for acts in itertools.product(range(2), repeat=5):
        P = T[np.arange(5), list(acts)].copy()
        P[rem] = 0.0
        P[rem, rem] = 1.0
        best = np.minimum(best, expected_time_to(P, rem))
    assert h[0] > best[0] + 1e-3


# --- rollouts ------------------------------------------------------------------

def test_path_terminal_start_is_optimal():
    for n in range(2, 9):
        rec = plan_and_execute(path_graph(n), range(n), 0, gamma=0.5, epsilon=1e-12, seed=n)
        assert rec.cover_time == n - 1


def test_cycle_all_states():
    for start in range(6):
        assert plan_and_execute(cycle_graph(6), range(6), start, seed=start).cover_time == 5


def test_seeded_rollouts_reproducible():
    m = random_mdp(10, 3, 1)
    a = plan_and_execute(m, [2, 5, 7], 0, seed=42)
    b = plan_and_execute(m, [2, 5, 7], 0, seed=42)
    assert a.trajectory == b.trajectory and a.cover_time == b.cover_time


def test_rollouts_terminate_and_are_consistent():
    m = random_mdp(8, 3, 6)
    targets = [1, 3, 6]
    T = m.dense()
    cache = {}
    for seed in range(200):
        rec = plan_and_execute(m, targets, 0, seed=seed, cache=cache)
        assert set(rec.hit_times) == set(targets)
        assert rec.cover_time == max(rec.hit_times.values())
        assert rec.trajectory[-1][2] is None and rec.trajectory[-1][0] == rec.cover_time
        for (t, s, a, _), (_, s2, _, _) in zip(rec.trajectory, rec.trajectory[1:]):
            assert T[s, a, s2] > 0
    assert len(cache) <= 2 ** len(targets)


def test_start_on_target_and_step_cap():
    rec = plan_and_execute(path_graph(3), [0, 2], 0, seed=0)
    assert rec.hit_times[0] == 0 and rec.cover_time == 2
    with pytest.raises(StepCapExceeded):
        plan_and_execute(path_graph(6), [5], 0, step_cap=3)


def test_record_jsonl_round_trip():
    rec = plan_and_execute(random_mdp(6, 2, 0), [1, 4], 0, seed=3)
    rec.meta["width"] = 3
    back = RolloutRecord.from_jsonl(rec.to_jsonl())
    assert back.trajectory == [tuple(r) for r in rec.trajectory]
    assert back.cover_time == rec.cover_time and back.hit_times == rec.hit_times
    assert back.phases == rec.phases and back.meta == {"width": 3}


def test_sample_successor_frequencies():
    m = Mdp.from_dense([[[0.2, 0.3, 0.5]], [[0, 1, 0]], [[0, 0, 1]]])
    rng = np.random.default_rng(1)
    draws = np.bincount([sample_successor(m, 0, 0, rng) for _ in range(20000)], minlength=3) / 20000
    np.testing.assert_allclose(draws, [0.2, 0.3, 0.5], atol=0.015)
