"""Rollout records shared by the planners and the simulation harness."""

from __future__ import annotations

import json
from dataclasses import dataclass, field


@dataclass
class RolloutRecord:
    """One simulated trajectory.

    ``trajectory`` holds ``(t, state, action, remaining_count)`` tuples; the
    last entry is the terminal state with ``action=None``.
    """

    seed: int | None
    start: int
    trajectory: list = field(default_factory=list)
    hit_times: dict = field(default_factory=dict)
    cover_time: int = 0
    phases: int = 0
    completed: bool = True
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.completed and self.hit_times:
            assert self.cover_time == max(self.hit_times.values())

    def states(self):
        return [row[1] for row in self.trajectory]

    def to_jsonl(self) -> str:
        lines = []
        for t, s, a, left in self.trajectory:
            lines.append(json.dumps({"t": t, "state": s, "action": a, "remaining_count": left}))
        summary = {"schema": 1, "cover_time": self.cover_time, "phases": self.phases,
                   "seed": self.seed, "start": self.start,
                   "hit_times": {str(k): v for k, v in self.hit_times.items()}}
        summary.update(self.meta)
        lines.append(json.dumps(summary))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "RolloutRecord":
        rows = [json.loads(line) for line in text.splitlines() if line.strip()]
        if not rows or "cover_time" not in rows[-1]:
            raise ValueError("trajectory file has no summary record")
        summary = rows[-1]
        traj = [(r["t"], r["state"], r["action"], r["remaining_count"]) for r in rows[:-1]]
        known = {"schema", "cover_time", "phases", "seed", "start", "hit_times"}
        return cls(
            seed=summary.get("seed"),
            start=summary.get("start", traj[0][1] if traj else 0),
            trajectory=traj,
            hit_times={int(k): v for k, v in summary.get("hit_times", {}).items()},
            cover_time=summary["cover_time"],
            phases=summary.get("phases", 0),
            meta={k: v for k, v in summary.items() if k not in known},
        )
