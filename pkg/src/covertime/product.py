"""Exact minimum expected cover time on the product space ``S x 2^V``.

A product state is ``(s, remaining)`` with ``remaining`` a bit mask over
``targets.members``. Transitions can only clear bits, so the product MDP is a
DAG of levels (one per remaining-set mask). Each level is a stochastic
shortest path problem over the states outside the mask, with exits into
strictly smaller masks; levels are solved in order of increasing cardinality.

Convention: for a target ``t`` in mask ``M`` the table stores
``C(t, M) = C(t, M - {t})`` (the target is visited on arrival), which gives
the base cases ``C(s, {}) = C(s, {s}) = 0``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from ._linalg import solve_first_passage
from .errors import AssumptionViolated, CapExceeded, InfiniteCoverTime, StateIndexError
from .mdp import Mdp, TargetSet, exists_irreducible_policy, uniform_policy_matrix

DEFAULT_TARGET_CAP = 14
# below 1, a near-tie can never select an action that closes a cycle (costs are 1 per step)
TIE_ATOL = 1e-9


class ProductState(NamedTuple):
    state: int
    remaining: int


def root_mask(targets: TargetSet, start: int) -> int:
    """Initial remaining mask: all targets except the start state."""
    mask = targets.full_mask
    if start in targets:
        mask &= ~(1 << targets.index_of[start])
    return mask


def submasks_by_size(root: int) -> list[int]:
    """All submasks of ``root`` ordered by increasing popcount, then value."""
    subs = []
    m = root
    while True:
        subs.append(m)
        if m == 0:
            break
        m = (m - 1) & root
    subs.sort(key=lambda x: (bin(x).count("1"), x))
    return subs


@dataclass
class CoverValueTable:
    """Expected remaining cover time for every computed product state.

    ``values[mask, s]`` is ``nan`` for masks that are not submasks of ``root``.
    """

    targets: TargetSet
    values: np.ndarray
    root: int
    start: int

    def value(self, state: int, remaining: int) -> float:
        v = self.values[remaining, state]
        if np.isnan(v):
            raise KeyError(f"product state ({state}, {remaining:#b}) was not computed")
        return float(v)

    @property
    def cover_time(self) -> float:
        """Expected cover time from ``(start, root)``."""
        return self.value(self.start, self.root)

    def masks(self):
        return submasks_by_size(self.root)

    def entries(self):
        for m in self.masks():
            for s, v in enumerate(self.values[m]):
                yield {"state": s, "remaining": m, "value": None if np.isinf(v) else float(v)}

    def to_json(self) -> str:
        doc = {"schema": 1, "targets": list(self.targets.members), "start": self.start,
               "root": self.root, "entries": list(self.entries())}
        return json.dumps(doc, separators=(",", ":"))


@dataclass
class ProductPolicy:
    """Deterministic policy on product states; ``actions[mask, s]`` (``-1`` = undefined)."""

    targets: TargetSet
    actions: np.ndarray

    def action(self, state: int, remaining: int) -> int:
        return int(self.actions[remaining, state])

    def entries(self, root: int):
        for m in submasks_by_size(root):
            for s, a in enumerate(self.actions[m]):
                if a >= 0:
                    yield {"state": s, "remaining": m, "action": int(a)}

    def to_json(self, root: int) -> str:
        doc = {"schema": 1, "targets": list(self.targets.members), "entries": list(self.entries(root))}
        return json.dumps(doc, separators=(",", ":"))


def product_transition(mdp: Mdp, targets: TargetSet, frm: ProductState, action: int):
    """Successors ``((s', remaining - {s'}), T(s, a, s'))`` of a product state."""
    to, p = mdp.row(frm.state, action)
    out = []
    for s2, prob in zip(to, p):
        if prob <= 0:
            continue
        rem = frm.remaining
        i = targets.index_of.get(int(s2))
        if i is not None:
            rem &= ~(1 << i)
        out.append((ProductState(int(s2), rem), float(prob)))
    return out


class _Levels:
    """Per-level bookkeeping shared by evaluation and policy iteration."""

    def __init__(self, mdp: Mdp, targets: TargetSet, root: int):
        for t in targets:
            if t >= mdp.n_states:
                raise StateIndexError(f"target {t} out of range")
        self.mdp = mdp
        self.targets = targets
        self.root = root
        self.P = mdp.P
        self.S, self.A = mdp.n_states, mdp.n_actions
        self.values = np.full((1 << len(targets), self.S), np.nan)
        self.members = np.asarray(targets.members)

    def known(self, mask):
        """Return (values with target entries filled, target indices in mask)."""
        v = np.full(self.S, np.nan)
        bits = [i for i in range(len(self.members)) if mask >> i & 1]
        K = self.members[bits] if bits else np.empty(0, dtype=np.int64)
        for i, t in zip(bits, K):
            v[t] = self.values[mask & ~(1 << i), t]
        return v, K

    def evaluate(self, mask, chain, v, K):
        """Solve the level system for the chain rows (``S x S`` sparse)."""
        unknown = np.ones(self.S, dtype=bool)
        unknown[K] = False
        U = np.flatnonzero(unknown)
        rows = chain[U]
        Q = rows[:, U]
        if len(K):
            toK = rows[:, K]
            b = 1.0 + toK @ v[K]
            exits = np.asarray(toK.sum(axis=1)).ravel() > 0
        else:
            b = np.ones(len(U))
            exits = np.zeros(len(U), dtype=bool)
        out = v.copy()
        out[U] = solve_first_passage(Q, b, exits)
        return out, U

    def q_values(self, v):
        return (1.0 + self.P @ np.nan_to_num(v, nan=np.inf, posinf=np.inf)).reshape(self.S, self.A)


def _level_chain(mdp, actions):
    rows = np.arange(mdp.n_states) * mdp.n_actions + actions
    return mdp.P[rows]


def _argmin_lowest(q, tol=TIE_ATOL):
    qmin = q.min(axis=1, keepdims=True)
    finite = np.isfinite(qmin)
    thresh = np.where(finite, qmin + tol * np.maximum(1.0, np.abs(np.where(finite, qmin, 0))), np.inf)
    return np.argmax(q <= thresh, axis=1)


def evaluate_policy(mdp: Mdp, targets: TargetSet, policy: ProductPolicy, start: int,
                    strict: bool = False) -> CoverValueTable:
    """Expected cover time of a deterministic product policy from every product state.

    Solved level by level with exact linear solves. Entries are ``inf`` where
    the policy does not finish covering with probability one; with
    ``strict=True`` that raises :class:`InfiniteCoverTime` at the start state.
    """
    root = root_mask(targets, start)
    lv = _Levels(mdp, targets, root)
    for mask in submasks_by_size(root):
        v, K = lv.known(mask)
        if mask == 0:
            lv.values[0] = 0.0
            continue
        acts = np.asarray(policy.actions[mask]).copy()
        acts[K] = 0
        if np.any((acts < 0) | (acts >= mdp.n_actions)):
            bad = int(np.flatnonzero((acts < 0) | (acts >= mdp.n_actions))[0])
            raise ValueError(f"policy undefined at product state ({bad}, {mask:#b})")
        lv.values[mask], _ = lv.evaluate(mask, _level_chain(mdp, acts), v, K)
    table = CoverValueTable(targets, lv.values, root, start)
    if strict and np.isinf(table.cover_time):
        raise InfiniteCoverTime(f"policy never covers {targets.states_of(root)} from {start}")
    return table


def greedy_improve(mdp: Mdp, targets: TargetSet, table: CoverValueTable) -> ProductPolicy:
    """One-step greedy policy for a value table; ties go to the lowest action index."""
    lv = _Levels(mdp, targets, table.root)
    lv.values = table.values
    actions = np.full(table.values.shape, -1, dtype=np.int64)
    for mask in submasks_by_size(table.root):
        if mask == 0:
            actions[0] = 0
            continue
        v, K = lv.known(mask)
        full = table.values[mask]
        actions[mask] = _argmin_lowest(lv.q_values(full))
        # visited-on-arrival convention: reuse the decision of the smaller mask
        for t in K:
            i = targets.index_of[int(t)]
            actions[mask, t] = actions[mask & ~(1 << i), t]
    return ProductPolicy(targets, actions)


def optimal_policy_iteration(mdp: Mdp, targets: TargetSet, start: int,
                             cap: int = DEFAULT_TARGET_CAP,
                             callback: Callable | None = None,
                             check_assumption: bool = True):
    """Optimal product policy and its value table via policy iteration.

    Each level starts from the uniformly randomized policy (proper whenever
    some stationary policy is irreducible), then alternates exact evaluation
    and greedy improvement until the deterministic policy stops changing.
    An action only changes when it improves the Q-value by more than the tie
    tolerance, which makes the iteration terminate.

    ``callback(mask, iteration, values, actions)`` is invoked after every
    evaluation; ``actions`` is ``None`` for the randomized initial policy.

    Returns
    -------
    (ProductPolicy, CoverValueTable)
    """
    if len(targets) > cap:
        raise CapExceeded(f"{len(targets)} targets exceed the product-solver cap of {cap}")
    if not 0 <= start < mdp.n_states:
        raise StateIndexError(f"start {start} out of range")
    if check_assumption and not exists_irreducible_policy(mdp):
        raise AssumptionViolated("no stationary policy induces an irreducible chain")
    root = root_mask(targets, start)
    lv = _Levels(mdp, targets, root)
    uniform = uniform_policy_matrix(mdp)
    for mask in submasks_by_size(root):
        if mask == 0:
            lv.values[0] = 0.0
            continue
        v, K = lv.known(mask)
        vals, U = lv.evaluate(mask, uniform, v, K)
        if callback is not None:
            callback(mask, 0, vals.copy(), None)
        acts = None
        it = 0
        while True:
            q = lv.q_values(vals)
            new = _argmin_lowest(q)
            if acts is not None:
                cur = q[np.arange(lv.S), acts]
                best = q[np.arange(lv.S), new]
                keep = ~(best < cur - TIE_ATOL * np.maximum(1.0, np.abs(np.nan_to_num(cur, posinf=0))))
                new = np.where(keep, acts, new)
                if np.array_equal(new[U], acts[U]):
                    break
            acts = new
            it += 1
            vals, _ = lv.evaluate(mask, _level_chain(mdp, acts), v, K)
            if callback is not None:
                callback(mask, it, vals.copy(), acts.copy())
        lv.values[mask] = vals
    table = CoverValueTable(targets, lv.values, root, start)
    return greedy_improve(mdp, targets, table), table


def optimal_cover_time(mdp: Mdp, targets: TargetSet, start: int, **kw) -> float:
    """Minimum expected time to visit every target from ``start``."""
    return optimal_policy_iteration(mdp, targets, start, **kw)[1].cover_time
