"""Complete weighted digraph of optimal expected hitting times."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import AssumptionViolated, NonConvergence
from .mdp import Mdp, exists_irreducible_policy

DENSE_LIMIT = 4096
VI_TOL = 1e-10
MAX_SWEEPS = 10**6
_CHUNK = 256


@dataclass(frozen=True, eq=False)
class ModelGraph:
    """``weights[s, j]`` is the optimal expected hitting time from ``s`` to ``goals[j]``.

    When built for all states, ``goals`` is ``arange(n_states)`` and
    ``weights`` is square with a zero diagonal.
    """

    weights: np.ndarray
    goals: np.ndarray
    labels: tuple | None = None

    def __post_init__(self):
        self.weights.flags.writeable = False
        object.__setattr__(self, "_col", {int(g): j for j, g in enumerate(self.goals)})

    @property
    def n_states(self):
        return self.weights.shape[0]

    def w(self, s1: int, s2: int) -> float:
        return float(self.weights[s1, self._col[s2]])

    def matrix(self, nodes) -> np.ndarray:
        """Weights among ``nodes``: ``out[i, j] = w(nodes[i], nodes[j])``."""
        nodes = [int(x) for x in nodes]
        cols = [self._col[x] for x in nodes]
        return self.weights[np.ix_(nodes, cols)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        names = self.labels or tuple(str(s) for s in range(self.n_states))
        wr.writerow([names[g] for g in self.goals])
        for row in self.weights:
            wr.writerow([repr(float(x)) for x in row])
        return buf.getvalue()


def optimal_hitting_times(mdp: Mdp, goals, tol: float = VI_TOL, max_sweeps: int = MAX_SWEEPS) -> np.ndarray:
    """Value iteration on ``h = 1 + min_a T h`` with ``h(goal) = 0``, one column per goal."""
    goals = np.asarray(goals, dtype=np.int64)
    S, A = mdp.n_states, mdp.n_actions
    out = np.empty((S, len(goals)))
    for lo in range(0, len(goals), _CHUNK):
        g = goals[lo:lo + _CHUNK]
        cols = np.arange(len(g))
        H = np.zeros((S, len(g)))
        for _ in range(max_sweeps):
            Hn = 1.0 + (mdp.P @ H).reshape(S, A, len(g)).min(axis=1)
            Hn[g, cols] = 0.0
            delta = np.max(np.abs(Hn - H))
            H = Hn
            if delta < tol:
                break
        else:
            raise NonConvergence(f"hitting-time value iteration exceeded {max_sweeps} sweeps")
        out[:, lo:lo + len(g)] = H
    return out


def build_model_graph(mdp: Mdp, goals=None, tol: float = VI_TOL, check_assumption: bool = True) -> ModelGraph:
    """Optimal expected hitting time between every pair of states.

    For MDPs above ``DENSE_LIMIT`` states pass ``goals`` (e.g. the targets and
    the start state) to restrict the columns that are computed.
    """
    if check_assumption and not exists_irreducible_policy(mdp):
        raise AssumptionViolated("model graph weights are infinite without an irreducible policy")
    if goals is None:
        if mdp.n_states > DENSE_LIMIT:
            raise ValueError(f"more than {DENSE_LIMIT} states: pass the goal states to compute")
        goals = np.arange(mdp.n_states)
    goals = np.unique(np.asarray(goals, dtype=np.int64))
    W = optimal_hitting_times(mdp, goals, tol)
    return ModelGraph(W, goals, mdp.labels)
