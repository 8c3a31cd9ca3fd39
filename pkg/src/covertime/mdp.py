"""Finite MDP data model, validation, induced chains and hitting times.

Transitions are stored as one CSR matrix of shape ``(n_states * n_actions,
n_states)``; row ``s * n_actions + a`` is the distribution ``T(s, a, .)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from ._linalg import solve_first_passage
from .errors import RowSumError, StateIndexError

ROW_SUM_ATOL = 1e-9
SCHEMA_VERSION = 1


@dataclass(frozen=True, eq=False)
class Mdp:
    n_states: int
    n_actions: int
    P: sp.csr_matrix
    labels: tuple[str, ...] | None = None
    meta: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if self.n_states < 1 or self.n_actions < 1:
            raise ValueError("an MDP needs at least one state and one action")
        if self.P.shape != (self.n_states * self.n_actions, self.n_states):
            raise ValueError(f"transition matrix has shape {self.P.shape}")
        for arr in (self.P.data, self.P.indices, self.P.indptr):
            arr.flags.writeable = False

    @classmethod
    def from_rows(cls, n_states, n_actions, rows, labels=None, meta=None, check=True):
        """Build from ``{(s, a): (successors, probabilities)}``.

        Missing ``(s, a)`` pairs are empty rows and fail validation.
        """
        r, c, v = [], [], []
        for (s, a), (to, p) in rows.items():
            if not (0 <= s < n_states):
                raise StateIndexError(f"state {s} out of range [0, {n_states})")
            if not (0 <= a < n_actions):
                raise StateIndexError(f"action {a} out of range [0, {n_actions})")
            to = np.asarray(to, dtype=np.int64)
            p = np.asarray(p, dtype=float)
            if to.shape != p.shape:
                raise ValueError(f"row (s={s}, a={a}): 'to' and 'p' lengths differ")
            bad = (to < 0) | (to >= n_states)
            if bad.any():
                raise StateIndexError(
                    f"row (s={s}, a={a}) references state {int(to[bad][0])} "
                    f"in a {n_states}-state MDP"
                )
            r.append(np.full(len(to), s * n_actions + a))
            c.append(to)
            v.append(p)
        if r:
            r, c, v = np.concatenate(r), np.concatenate(c), np.concatenate(v)
        P = sp.csr_matrix((v, (r, c)), shape=(n_states * n_actions, n_states))
        P.sum_duplicates()
        P.eliminate_zeros()
        P.sort_indices()
        mdp = cls(n_states, n_actions, P, tuple(labels) if labels is not None else None,
                  dict(meta or {}))
        if check:
            validate(mdp)
        return mdp

    @classmethod
    def from_dense(cls, T, labels=None, meta=None, check=True):
        """Build from a dense ``(S, A, S)`` tensor."""
        T = np.asarray(T, dtype=float)
        S, A, S2 = T.shape
        if S != S2:
            raise ValueError("transition tensor must have shape (S, A, S)")
        P = sp.csr_matrix(T.reshape(S * A, S))
        P.eliminate_zeros()
        P.sort_indices()
        mdp = cls(S, A, P, tuple(labels) if labels is not None else None, dict(meta or {}))
        if check:
            validate(mdp)
        return mdp

    def row(self, s, a):
        """Successor states and probabilities of ``T(s, a, .)``."""
        k = s * self.n_actions + a
        lo, hi = self.P.indptr[k], self.P.indptr[k + 1]
        return self.P.indices[lo:hi], self.P.data[lo:hi]

    def dense(self):
        """Transition tensor as a dense ``(S, A, S)`` array."""
        return self.P.toarray().reshape(self.n_states, self.n_actions, self.n_states)

    def is_deterministic(self):
        return bool(np.all((self.P.data == 1.0) | (self.P.data == 0.0)))

    def support_graph(self):
        """Boolean adjacency ``s -> s'`` iff ``T(s, a, s') > 0`` for some ``a``."""
        coo = self.P.tocoo()
        pos = coo.data > 0
        rows = coo.row[pos] // self.n_actions
        g = sp.csr_matrix(
            (np.ones(pos.sum(), dtype=bool), (rows, coo.col[pos])),
            shape=(self.n_states, self.n_states),
        )
        return g

    def __repr__(self):
        return f"Mdp(n_states={self.n_states}, n_actions={self.n_actions}, nnz={self.P.nnz})"


@dataclass(frozen=True)
class StationaryPolicy:
    action_of: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.action_of, dtype=np.int64)
        a.flags.writeable = False
        object.__setattr__(self, "action_of", a)

    def check(self, mdp):
        if self.action_of.shape != (mdp.n_states,):
            raise ValueError(f"policy length {len(self.action_of)} != n_states {mdp.n_states}")
        if np.any((self.action_of < 0) | (self.action_of >= mdp.n_actions)):
            raise StateIndexError("policy selects an action outside [0, n_actions)")


class TargetSet:
    """Ordered set of target states; bit ``i`` of a subset mask is ``members[i]``."""

    def __init__(self, members: Sequence[int], n_states: int | None = None):
        members = tuple(int(m) for m in members)
        if len(members) == 0:
            raise ValueError("target set must be nonempty")
        if len(set(members)) != len(members):
            raise ValueError(f"duplicate targets in {members}")
        if n_states is not None:
            for m in members:
                if not 0 <= m < n_states:
                    raise StateIndexError(f"target {m} out of range [0, {n_states})")
        self.members = members
        self.index_of = {m: i for i, m in enumerate(members)}

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __contains__(self, s):
        return s in self.index_of

    @property
    def full_mask(self):
        return (1 << len(self.members)) - 1

    def mask_of(self, states):
        m = 0
        for s in states:
            m |= 1 << self.index_of[s]
        return m

    def states_of(self, mask):
        return [s for i, s in enumerate(self.members) if mask >> i & 1]

    def __repr__(self):
        return f"TargetSet({list(self.members)})"


def validate(mdp: Mdp) -> None:
    """Raise if any transition row is negative or does not sum to one."""
    P = mdp.P
    if P.indices.size and (P.indices.min() < 0 or P.indices.max() >= mdp.n_states):
        raise StateIndexError("successor index out of range")
    if P.data.size and P.data.min() < 0:
        row_of = np.repeat(np.arange(P.shape[0]), np.diff(P.indptr))
        s, a = divmod(int(row_of[np.flatnonzero(P.data < 0)[0]]), mdp.n_actions)
        raise ValueError(f"row (s={s}, a={a}) has a negative probability")
    sums = np.asarray(P.sum(axis=1)).ravel()
    bad = np.flatnonzero(np.abs(sums - 1.0) > ROW_SUM_ATOL)
    if len(bad):
        s, a = divmod(int(bad[0]), mdp.n_actions)
        raise RowSumError(s, a, float(sums[bad[0]]))


def policy_matrix(mdp: Mdp, action_of) -> sp.csr_matrix:
    """Sparse ``n_states x n_states`` chain induced by a deterministic policy."""
    rows = np.arange(mdp.n_states) * mdp.n_actions + np.asarray(action_of)
    return mdp.P[rows]


def uniform_policy_matrix(mdp: Mdp) -> sp.csr_matrix:
    """Chain induced by choosing every action with equal probability."""
    S, A = mdp.n_states, mdp.n_actions
    avg = sp.csr_matrix(
        (np.full(S * A, 1.0 / A), (np.repeat(np.arange(S), A), np.arange(S * A))),
        shape=(S, S * A),
    )
    return (avg @ mdp.P).tocsr()


def induced_chain(mdp: Mdp, policy: StationaryPolicy) -> np.ndarray:
    """Dense stochastic matrix whose row ``s`` is ``T(s, policy(s), .)``."""
    policy.check(mdp)
    return policy_matrix(mdp, policy.action_of).toarray()


def exists_irreducible_policy(mdp: Mdp) -> bool:
    """True iff the union-of-actions support graph is strongly connected.

    Every state's union support is realized by the uniformly randomized
    stationary policy, so strong connectivity of that graph is exactly the
    condition for some stationary policy to induce an irreducible chain.
    """
    if mdp.n_states == 1:
        return True
    n, _ = connected_components(mdp.support_graph(), directed=True, connection="strong")
    return n == 1


def expected_hitting_times_for_policy(mdp: Mdp, policy: StationaryPolicy, goal: int) -> np.ndarray:
    """Expected first-passage times into ``goal`` under a stationary policy.

    Entries are ``inf`` for states from which ``goal`` is not reached with
    probability one.
    """
    policy.check(mdp)
    if not 0 <= goal < mdp.n_states:
        raise StateIndexError(f"goal {goal} out of range")
    return hitting_times(policy_matrix(mdp, policy.action_of), goal)


def hitting_times(chain, goal) -> np.ndarray:
    """Expected hitting times of ``goal`` (int or iterable of states) for a chain."""
    chain = sp.csr_matrix(chain)
    n = chain.shape[0]
    goals = np.zeros(n, dtype=bool)
    goals[np.atleast_1d(goal)] = True
    unknown = np.flatnonzero(~goals)
    h = np.zeros(n)
    if len(unknown) == 0:
        return h
    Q = chain[unknown][:, unknown]
    exits = np.asarray(chain[unknown][:, np.flatnonzero(goals)].sum(axis=1)).ravel() > 0
    h[unknown] = solve_first_passage(Q, np.ones(len(unknown)), exits)
    return h


# --- JSON instance format -------------------------------------------------

_CORE_KEYS = {"n_states", "n_actions", "transitions", "labels", "schema"}


def mdp_to_dict(mdp: Mdp) -> dict:
    transitions = []
    for k in range(mdp.n_states * mdp.n_actions):
        s, a = divmod(k, mdp.n_actions)
        to, p = mdp.row(s, a)
        transitions.append({"s": s, "a": a, "to": [int(x) for x in to], "p": [float(x) for x in p]})
    out = {"schema": SCHEMA_VERSION, "n_states": mdp.n_states, "n_actions": mdp.n_actions,
           "transitions": transitions}
    if mdp.labels is not None:
        out["labels"] = list(mdp.labels)
    for key, value in mdp.meta.items():
        out[key] = value
    return out


def mdp_from_dict(d: dict) -> Mdp:
    try:
        n_states = int(d["n_states"])
        n_actions = int(d["n_actions"])
        raw = d["transitions"]
    except KeyError as exc:
        raise ValueError(f"MDP JSON missing field {exc}") from None
    rows = {}
    for t in raw:
        key = (int(t["s"]), int(t["a"]))
        if key in rows:
            raise ValueError(f"duplicate transition row for (s={key[0]}, a={key[1]})")
        rows[key] = (t["to"], t["p"])
    meta = {k: v for k, v in d.items() if k not in _CORE_KEYS}
    return Mdp.from_rows(n_states, n_actions, rows, labels=d.get("labels"), meta=meta)


def dumps_mdp(mdp: Mdp) -> str:
    return json.dumps(mdp_to_dict(mdp), separators=(",", ":"), sort_keys=False) + "\n"


def loads_mdp(text: str) -> Mdp:
    return mdp_from_dict(json.loads(text))


def save_mdp(mdp: Mdp, path) -> None:
    Path(path).write_text(dumps_mdp(mdp))


def load_mdp(path) -> Mdp:
    return loads_mdp(Path(path).read_text())
