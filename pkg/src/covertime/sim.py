"""Monte-Carlo rollouts and batch statistics."""

from __future__ import annotations

import csv
import io
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .baselines import nearest_neighbor_rollout
from .errors import StepCapExceeded
from .heuristic import DEFAULT_EPSILON, GAMMA_GRAPH, STEP_CAP, plan_and_execute, sample_successor
from .mdp import Mdp, TargetSet
from .product import ProductPolicy, optimal_policy_iteration
from .records import RolloutRecord

CSV_COLUMNS = ("instance_id", "algorithm", "n_states", "n_targets", "m", "runs",
               "mean_cover", "var_cover", "mean_runtime_sec")


@dataclass(eq=False)
class Instance:
    mdp: Mdp
    targets: TargetSet
    start: int
    id: str = ""

    def __post_init__(self):
        if not isinstance(self.targets, TargetSet):
            self.targets = TargetSet(list(self.targets), self.mdp.n_states)
        if not 0 <= self.start < self.mdp.n_states:
            raise ValueError(f"start {self.start} out of range")


@dataclass(frozen=True)
class PlannerConfig:
    """``kind`` is ``heuristic``, ``nearest`` or ``optimal``."""

    kind: str = "heuristic"
    gamma: float = GAMMA_GRAPH
    epsilon: float = DEFAULT_EPSILON
    tie_break: str = "random"
    step_cap: int = STEP_CAP

    def __post_init__(self):
        if self.kind not in ("heuristic", "nearest", "optimal"):
            raise ValueError(f"unknown planner kind {self.kind!r}")


@dataclass
class BatchStats:
    runs: int
    mean_cover: float
    var_cover: float
    mean_runtime_sec: float
    records: list = field(default_factory=list, repr=False)

    @property
    def std_err(self) -> float:
        return float(np.sqrt(self.var_cover / self.runs)) if self.runs else float("nan")

    def csv_row(self, instance_id, algorithm, n_states, n_targets, m=1) -> dict:
        return {"instance_id": instance_id, "algorithm": algorithm, "n_states": n_states,
                "n_targets": n_targets, "m": m, "runs": self.runs,
                "mean_cover": repr(self.mean_cover), "var_cover": repr(self.var_cover),
                "mean_runtime_sec": repr(self.mean_runtime_sec)}

    @classmethod
    def from_covers(cls, covers, runtimes, records=()):
        c = np.asarray(covers, dtype=float)
        var = float(c.var(ddof=1)) if len(c) > 1 else 0.0
        return cls(len(c), float(c.mean()), var, float(np.mean(runtimes)), list(records))


def write_csv(rows, fh=None) -> str:
    buf = fh or io.StringIO()
    wr = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    wr.writeheader()
    for row in rows:
        wr.writerow(row)
    return buf.getvalue() if fh is None else ""


def rollout_product_policy(mdp: Mdp, targets: TargetSet, policy: ProductPolicy, start: int,
                           seed=None, step_cap: int = STEP_CAP, keep_trajectory: bool = True) -> RolloutRecord:
    """Simulate a fixed product policy until every target has been visited."""
    rng = np.random.default_rng(seed)
    remaining = set(targets.members)
    hit = {}
    if start in remaining:
        remaining.discard(start)
        hit[start] = 0
    rec = RolloutRecord(seed=seed, start=start)
    s, t = start, 0
    while remaining:
        if t >= step_cap:
            raise StepCapExceeded(f"no cover after {step_cap} steps")
        a = policy.action(s, targets.mask_of(remaining))
        if keep_trajectory:
            rec.trajectory.append((t, s, a, len(remaining)))
        s, t = sample_successor(mdp, s, a, rng), t + 1
        if s in remaining:
            remaining.discard(s)
            hit[s] = t
    if keep_trajectory:
        rec.trajectory.append((t, s, None, 0))
    rec.hit_times = hit
    rec.cover_time = max(hit.values()) if hit else 0
    rec.phases = len(hit) - (start in hit)
    return rec


def make_runner(config: PlannerConfig, instance: Instance, keep_trajectory: bool = False):
    """Return ``seed -> RolloutRecord`` with any one-off planning done up front."""
    mdp, targets, start = instance.mdp, instance.targets, instance.start
    if config.kind == "heuristic":
        cache = {}

        def run(seed):
            return plan_and_execute(mdp, targets.members, start, gamma=config.gamma,
                                    epsilon=config.epsilon, seed=seed, tie_break=config.tie_break,
                                    step_cap=config.step_cap, cache=cache,
                                    keep_trajectory=keep_trajectory)
    elif config.kind == "nearest":
        def run(seed):
            return nearest_neighbor_rollout(mdp, targets.members, start, seed=seed,
                                            step_cap=config.step_cap, keep_trajectory=keep_trajectory)
    else:
        policy, _ = optimal_policy_iteration(mdp, targets, start)

        def run(seed):
            return rollout_product_policy(mdp, targets, policy, start, seed=seed,
                                          step_cap=config.step_cap, keep_trajectory=keep_trajectory)
    return run


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("COVERTIME_THREADS", "1")))
    except ValueError:
        return 1


def run_batch(config: PlannerConfig, instance: Instance, n_runs: int, base_seed: int = 0,
              keep_records: bool = False) -> BatchStats:
    """``n_runs`` independent rollouts with seeds ``base_seed + i``.

    Results are collected by run index, so the statistics do not depend on
    the number of worker threads.
    """
    if n_runs < 1:
        raise ValueError("n_runs must be positive")
    run = make_runner(config, instance, keep_trajectory=keep_records)

    def one(i):
        t0 = time.perf_counter()
        rec = run(base_seed + i)
        return rec, time.perf_counter() - t0

    n = _threads()
    if n == 1:
        out = [one(i) for i in range(n_runs)]
    else:
        with ThreadPoolExecutor(n) as ex:
            out = list(ex.map(one, range(n_runs)))
    recs = [r for r, _ in out]
    for r in recs:
        assert r.cover_time == max(r.hit_times.values(), default=0)
    return BatchStats.from_covers([r.cover_time for r in recs], [dt for _, dt in out],
                                  recs if keep_records else ())


def agent_seed(seed: int, i: int) -> int:
    """Independent per-agent seed derived from a mission seed."""
    return int(np.random.SeedSequence([int(seed), int(i)]).generate_state(1)[0])


def multi_agent_cover(partition, config: PlannerConfig, instance: Instance, seed: int,
                      runners: dict | None = None) -> int:
    """Largest realized cover time when agent ``i`` covers ``partition.parts[i]``.

    ``runners`` may cache per-part runners across missions.
    """
    covered = set()
    worst = 0
    for i, part in enumerate(partition.parts):
        covered.update(part)
        if not part:
            continue
        key = tuple(part)
        run = runners.get(key) if runners is not None else None
        if run is None:
            sub = Instance(instance.mdp, TargetSet(list(part), instance.mdp.n_states), instance.start)
            run = make_runner(config, sub)
            if runners is not None:
                runners[key] = run
        worst = max(worst, run(agent_seed(seed, i)).cover_time)
    if covered != set(instance.targets.members):
        raise ValueError("partition does not match the instance's targets")
    return worst
