"""Suboptimal per-phase value iteration planner.

While the set of unvisited targets is fixed, the agent follows the greedy
policy of a discounted problem whose reward is ``-|remaining|`` on
non-targets and ``-|remaining| + 1`` on unvisited targets. Values are
recomputed only when a target is visited.

Internally the reward is shifted by ``+|remaining|`` (1 on unvisited
targets, 0 elsewhere). The shift changes every value by the same constant
``|remaining| / (1 - gamma)`` and leaves the argmax untouched, but keeps the
look-ahead terms ``gamma**d`` representable for small ``gamma``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonConvergence, StepCapExceeded
from .mdp import Mdp
from .records import RolloutRecord

DEFAULT_EPSILON = 1e-20
MAX_SWEEPS = 10**6
STEP_CAP = 10**7
TIE_RTOL = 1e-12

GAMMA_GRAPH = 0.01
GAMMA_GRID = 0.4
GAMMA_GRID_MULTI = 0.7


@dataclass(frozen=True)
class PhaseValue:
    shifted: np.ndarray
    remaining: frozenset
    gamma: float
    epsilon: float
    sweeps: int

    @property
    def values(self) -> np.ndarray:
        """Converged values under the unshifted phase reward."""
        return self.shifted - len(self.remaining) / (1.0 - self.gamma)

    def reward(self, n_states: int) -> np.ndarray:
        """Phase reward per state (unshifted)."""
        r = np.full(n_states, -float(len(self.remaining)))
        r[list(self.remaining)] += 1.0
        return r

    def backup_target(self) -> np.ndarray:
        """Shifted ``R(s') + gamma * V(s')``."""
        r = np.zeros(len(self.shifted))
        r[list(self.remaining)] = 1.0
        return r + self.gamma * self.shifted


def phase_value_iteration(mdp: Mdp, remaining, gamma: float, epsilon: float = DEFAULT_EPSILON,
                          max_sweeps: int = MAX_SWEEPS) -> PhaseValue:
    """Value iteration for one phase until the max-norm change drops below ``epsilon``."""
    remaining = frozenset(int(s) for s in remaining)
    if not remaining:
        raise ValueError("a phase needs at least one unvisited target")
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"gamma must lie in [0, 1), got {gamma}")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    S, A = mdp.n_states, mdp.n_actions
    r = np.zeros(S)
    r[list(remaining)] = 1.0
    # pessimistic start: min reward / (1 - gamma), i.e. zero in the shifted frame
    V = np.zeros(S)
    for sweep in range(1, max_sweeps + 1):
        Vn = (mdp.P @ (r + gamma * V)).reshape(S, A).max(axis=1)
        delta = np.max(np.abs(Vn - V))
        V = Vn
        if delta < epsilon:
            return PhaseValue(V, remaining, gamma, epsilon, sweep)
    raise NonConvergence(f"phase value iteration did not converge in {max_sweeps} sweeps")


def _q_table(mdp: Mdp, phase: PhaseValue) -> np.ndarray:
    return (mdp.P @ phase.backup_target()).reshape(mdp.n_states, mdp.n_actions)


def _pick(q, rng, tie_break):
    qmax = q.max()
    best = np.flatnonzero(q >= qmax - TIE_RTOL * abs(qmax))
    if len(best) == 1 or tie_break == "lowest":
        return int(best[0])
    return int(best[rng.integers(len(best))])


def greedy_action(mdp: Mdp, phase: PhaseValue, state: int, rng=None, tie_break: str = "random") -> int:
    """Greedy action of the phase value; ties are uniform-random (seeded) or lowest-index."""
    lo, hi = state * mdp.n_actions, (state + 1) * mdp.n_actions
    q = mdp.P[lo:hi] @ phase.backup_target()
    if rng is None:
        rng = np.random.default_rng()
    return _pick(q, rng, tie_break)


def sample_successor(mdp: Mdp, state: int, action: int, rng) -> int:
    to, p = mdp.row(state, action)
    if len(to) == 1:
        return int(to[0])
    u = rng.random() * p.sum()
    k = int(np.searchsorted(np.cumsum(p), u, side="right"))
    return int(to[min(k, len(to) - 1)])


def plan_and_execute(mdp: Mdp, targets, start: int, gamma: float = GAMMA_GRAPH,
                     epsilon: float = DEFAULT_EPSILON, seed: int | None = None,
                     tie_break: str = "random", step_cap: int = STEP_CAP,
                     cache: dict | None = None, keep_trajectory: bool = True) -> RolloutRecord:
    """Simulate the per-phase greedy planner until every target has been visited.

    ``cache`` maps a remaining set to its Q-table and may be shared between
    rollouts on the same ``(mdp, gamma, epsilon)``.
    """
    rng = np.random.default_rng(seed)
    targets = [int(t) for t in targets]
    remaining = set(targets)
    hit = {}
    if start in remaining:
        remaining.discard(start)
        hit[start] = 0
    rec = RolloutRecord(seed=seed, start=start)
    if cache is None:
        cache = {}
    s, t, phases = start, 0, 0
    qtab = None
    while remaining:
        key = frozenset(remaining)
        qtab = cache.get(key)
        if qtab is None:
            qtab = _q_table(mdp, phase_value_iteration(mdp, key, gamma, epsilon))
            cache[key] = qtab
        phases += 1
        while True:
            if t >= step_cap:
                raise StepCapExceeded(f"no cover after {step_cap} steps")
            a = _pick(qtab[s], rng, tie_break)
            if keep_trajectory:
                rec.trajectory.append((t, s, a, len(remaining)))
            s = sample_successor(mdp, s, a, rng)
            t += 1
            if s in remaining:
                remaining.discard(s)
                hit[s] = t
                break
    if keep_trajectory:
        rec.trajectory.append((t, s, None, 0))
    rec.hit_times = hit
    rec.cover_time = max(hit.values()) if hit else 0
    rec.phases = phases
    return rec
