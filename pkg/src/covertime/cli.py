"""Command-line interface.

Exit codes: 0 success, 1 invalid arguments, 2 invalid instance, 3 solver cap
exceeded. Errors are reported as one JSON object on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import bench
from .baselines import nearest_neighbor_rollout
from .environments import clustered_instance, ocean_gridworld, random_connected_graph, random_mdp
from .errors import CapExceeded, CoverTimeError, StateIndexError
from .heuristic import DEFAULT_EPSILON, GAMMA_GRAPH, plan_and_execute
from .mdp import TargetSet, dumps_mdp, load_mdp, save_mdp
from .model_graph import build_model_graph
from .partition import brute_force_optimal_partition, heuristic_partition
from .product import optimal_policy_iteration
from .records import RolloutRecord
from .sim import Instance, PlannerConfig, run_batch, write_csv

EXIT_ARGS, EXIT_INSTANCE, EXIT_CAP = 1, 2, 3


class UsageError(Exception):
    pass


class InstanceError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _number(x):
    x = float(x)
    return int(x) if x.is_integer() else x


def _seeds(text):
    return [int(s) for s in text.split(",") if s.strip()]


def _write(path, text):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


# --- instance and target loading -------------------------------------------

def load_instance(path):
    try:
        return load_mdp(path)
    except FileNotFoundError as exc:
        raise InstanceError(f"no such instance file: {path}") from exc
    except (ValueError, KeyError, TypeError, IndexError) as exc:
        raise InstanceError(f"{path}: {exc}") from exc


def parse_targets(text, mdp, xy=False):
    """Comma list of states, ``all``, or ``x,y`` pairs separated by ``;``."""
    text = text.strip()
    if text == "all":
        return list(range(mdp.n_states))
    if xy or ";" in text:
        width = mdp.meta.get("width")
        if width is None:
            raise UsageError("x,y targets need a gridworld instance")
        out = []
        for pair in filter(None, (p.strip() for p in text.split(";"))):
            try:
                x, y = (int(v) for v in pair.split(","))
            except ValueError:
                raise UsageError(f"bad x,y pair {pair!r}") from None
            if not (0 <= x < width and 0 <= y < mdp.meta["height"]):
                raise InstanceError(f"cell {pair} lies outside the grid")
            out.append(y * width + x)
        return out
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"bad target list {text!r}") from None


def resolve_targets(args, mdp):
    if args.targets_file:
        try:
            text = Path(args.targets_file).read_text().replace("\n", ",")
        except FileNotFoundError:
            raise UsageError(f"no such targets file: {args.targets_file}") from None
        text = text.strip(",")
    elif args.targets:
        text = args.targets
    else:
        raise UsageError("pass --targets or --targets-file")
    targets = parse_targets(text, mdp, getattr(args, "xy", False))
    try:
        return TargetSet(targets, mdp.n_states)
    except (StateIndexError, ValueError) as exc:
        raise InstanceError(str(exc)) from exc


def _start(args, mdp):
    if not 0 <= args.start < mdp.n_states:
        raise InstanceError(f"start {args.start} out of range [0, {mdp.n_states})")
    return args.start


# --- subcommands -----------------------------------------------------------

def cmd_gen(args):
    if args.family == "graph":
        mdp = random_connected_graph(args.n, args.density, args.seed)
    elif args.family == "mdp":
        mdp = random_mdp(args.n, args.actions, args.seed, args.mode)
    elif args.family == "grid":
        mdp = ocean_gridworld(args.w, args.h, args.seed, args.noise)
    else:
        mdp, targets, spec = clustered_instance(args.m, args.n, args.wc, args.wl, args.seed,
                                                require=tuple(args.require))
        if args.targets_out:
            Path(args.targets_out).write_text(",".join(map(str, targets.members)) + "\n")
    if args.out:
        save_mdp(mdp, args.out)
    else:
        sys.stdout.write(dumps_mdp(mdp))


def cmd_plan(args):
    mdp = load_instance(args.instance)
    targets = resolve_targets(args, mdp)
    start = _start(args, mdp)
    if args.algo == "optimal":
        policy, table = optimal_policy_iteration(mdp, targets, start, cap=args.cap)
        if args.policy_out:
            Path(args.policy_out).write_text(policy.to_json(table.root))
        if args.values_out:
            Path(args.values_out).write_text(table.to_json())
        print(_number(table.cover_time))
        return
    if args.algo == "nn" and not mdp.is_deterministic():
        raise InstanceError("the nearest-neighbor baseline needs a deterministic graph")
    if args.runs > 1:
        kind = "heuristic" if args.algo == "heur" else "nearest"
        cfg = PlannerConfig(kind, gamma=args.gamma, epsilon=args.epsilon, tie_break=args.tie_break)
        st = run_batch(cfg, Instance(mdp, targets, start), args.runs, args.seed)
        doc = {"schema": 1, "runs": st.runs, "mean_cover": st.mean_cover, "var_cover": st.var_cover}
        if args.timing:
            doc["mean_runtime_sec"] = st.mean_runtime_sec
        print(json.dumps(doc))
        return
    if args.algo == "heur":
        rec = plan_and_execute(mdp, targets.members, start, gamma=args.gamma, epsilon=args.epsilon,
                               seed=args.seed, tie_break=args.tie_break)
    else:
        rec = nearest_neighbor_rollout(mdp, targets.members, start, seed=args.seed)
    for key in ("width", "height"):
        if key in mdp.meta:
            rec.meta[key] = mdp.meta[key]
    if args.record_out:
        Path(args.record_out).write_text(rec.to_jsonl())
    print(rec.cover_time)


def cmd_partition(args):
    mdp = load_instance(args.instance)
    targets = resolve_targets(args, mdp)
    start = _start(args, mdp)
    if args.agents < 1:
        raise UsageError("--agents must be positive")
    if args.algo == "heur":
        graph = build_model_graph(mdp, goals=[start, *targets.members])
        part = heuristic_partition(graph, targets.members, args.agents, start)
    else:
        part, _ = brute_force_optimal_partition(mdp, targets, args.agents, start, cap=args.cap)
    _write(args.out, part.to_json() + "\n")


def cmd_bench(args):
    seeds = _seeds(args.seeds)
    if args.table == "tableI":
        rows = bench.table_graphs(seeds, runs=args.runs)
    elif args.table == "tableIII":
        rows = bench.table_mdps(seeds, runs=args.runs)
    elif args.table == "tableIV":
        rows = bench.table_multi(seeds, runs=args.runs)
    else:
        rows = bench.table_ocean(seeds, runs=args.runs, full=args.full)
    if not args.timing:
        for r in rows:
            r["mean_runtime_sec"] = ""
    _write(args.out, write_csv(rows))


def cmd_path_dump(args):
    try:
        rec = RolloutRecord.from_jsonl(Path(args.record).read_text())
    except FileNotFoundError:
        raise UsageError(f"no such record file: {args.record}") from None
    width = rec.meta.get("width")
    if args.instance:
        width = load_instance(args.instance).meta.get("width", width)
    cols = ["t", "state"] + (["x", "y"] if width else [])
    rows = []
    for t, s, _, _ in rec.trajectory:
        row = [t, s]
        if width:
            row += [s % width, s // width]
        rows.append(row)
    import io

    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(cols)
    wr.writerows(rows)
    _write(args.out, buf.getvalue())


# --- parser ----------------------------------------------------------------

def _target_args(p):
    p.add_argument("--instance", required=True)
    p.add_argument("--targets", help="comma list, 'all', or x,y pairs joined by ';'")
    p.add_argument("--targets-file")
    p.add_argument("--xy", action="store_true", help="read --targets as x,y grid cells")
    p.add_argument("--start", type=int, default=0)


def build_parser():
    ap = _Parser(prog="covertime", description="Minimum-time target coverage on MDPs.")
    sub = ap.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="generate an instance")
    g.add_argument("family", choices=["graph", "mdp", "grid", "clustered"])
    g.add_argument("--out")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--n", type=int, default=50, help="states (graph, mdp) or cluster size")
    g.add_argument("--density", type=float, default=bench.GRAPH_DENSITY)
    g.add_argument("--actions", type=int, default=4)
    g.add_argument("--mode", default="simplex-uniform", choices=["simplex-uniform", "literal-uniform"])
    g.add_argument("--w", type=int, default=6)
    g.add_argument("--h", type=int, default=6)
    g.add_argument("--noise", type=float, default=0.5)
    g.add_argument("--m", type=int, default=3)
    g.add_argument("--wc", type=int, default=2)
    g.add_argument("--wl", type=int, default=26)
    g.add_argument("--require", nargs="*", default=["optimality", "recovery"],
                   choices=["optimality", "recovery"], help="separation bounds to enforce")
    g.add_argument("--targets-out")
    g.set_defaults(func=cmd_gen)

    p = sub.add_parser("plan", help="solve or simulate a single-agent mission")
    p.add_argument("algo", choices=["optimal", "heur", "nn"])
    _target_args(p)
    p.add_argument("--gamma", type=float, default=GAMMA_GRAPH)
    p.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--runs", type=int, default=1)
    p.add_argument("--tie-break", default="random", choices=["random", "lowest"])
    p.add_argument("--cap", type=int, default=14, help="largest target set for the exact solver")
    p.add_argument("--policy-out")
    p.add_argument("--values-out")
    p.add_argument("--record-out")
    p.add_argument("--timing", action="store_true")
    p.set_defaults(func=cmd_plan)

    q = sub.add_parser("partition", help="assign targets to agents")
    q.add_argument("algo", choices=["heur", "brute"])
    _target_args(q)
    q.add_argument("--agents", type=int, required=True)
    q.add_argument("--cap", type=int, default=12)
    q.add_argument("--out")
    q.set_defaults(func=cmd_partition)

    b = sub.add_parser("bench", help="regenerate desk-scale result tables")
    b.add_argument("table", choices=["tableI", "tableIII", "tableIV", "ocean"])
    b.add_argument("--seeds", default="0,1,2")
    b.add_argument("--runs", type=int, default=1000)
    b.add_argument("--full", action="store_true", help="ocean: 20x20 grid with 10 targets")
    b.add_argument("--timing", action="store_true", help="fill the runtime column")
    b.add_argument("--out")
    b.set_defaults(func=cmd_bench)

    d = sub.add_parser("path-dump", help="trajectory record to CSV")
    d.add_argument("--record", required=True)
    d.add_argument("--instance")
    d.add_argument("--out")
    d.set_defaults(func=cmd_path_dump)
    return ap


def _fail(code, kind, message):
    sys.stderr.write(json.dumps({"schema": 1, "error": kind, "message": message, "exit_code": code}) + "\n")
    return code


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        args.func(args)
    except UsageError as exc:
        return _fail(EXIT_ARGS, "usage", str(exc))
    except InstanceError as exc:
        return _fail(EXIT_INSTANCE, "instance", str(exc))
    except CapExceeded as exc:
        return _fail(EXIT_CAP, "cap_exceeded", str(exc))
    except CoverTimeError as exc:
        return _fail(EXIT_INSTANCE, type(exc).__name__, str(exc))
    return 0


if __name__ == "__main__":
    sys.exit(main())
