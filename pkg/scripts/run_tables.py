"""Regenerate the desk-scale benchmark tables as CSV files.

Usage: python scripts/run_tables.py [--seeds 0,1,2,3,4] [--runs 1000] [--outdir results]
"""

import argparse
from pathlib import Path

from covertime import bench
from covertime.sim import write_csv

TABLES = {
    "graphs": bench.table_graphs,
    "mdps": bench.table_mdps,
    "multi": bench.table_multi,
    "ocean": bench.table_ocean,
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", default="0,1,2,3,4")
    ap.add_argument("--runs", type=int, default=1000)
    ap.add_argument("--outdir", default="results")
    ap.add_argument("--only", choices=sorted(TABLES), nargs="*")
    args = ap.parse_args()
    seeds = [int(s) for s in args.seeds.split(",")]
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    for name in args.only or TABLES:
        rows = TABLES[name](seeds, runs=args.runs)
        path = out / f"{name}.csv"
        path.write_text(write_csv(rows))
        print(f"wrote {path} ({len(rows)} rows)")


if __name__ == "__main__":
    main()
