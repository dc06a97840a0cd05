"""Uniform sweep with per-case epoch statistics.

Thin wrapper around ``splinequad sweep`` that also prints the epoch
distribution per number of elements.

    python scripts/run_sweep.py --max-degree 8 --max-elements 12 --out results/sweep
"""
import argparse
import csv
from collections import defaultdict
from pathlib import Path

import numpy as np

from splinequad.cli import main as cli_main


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--max-degree", type=int, default=8)
    ap.add_argument("--max-elements", type=int, default=12)
    ap.add_argument("--min-degree", type=int, default=2)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="results/sweep")
    args = ap.parse_args()
    code = cli_main(["sweep", "--max-degree", str(args.max_degree), "--max-elements", str(args.max_elements),
                     "--min-degree", str(args.min_degree), "--out-dir", args.out, "--workers",
                     str(args.workers), "--resume"])
    by_ne = defaultdict(list)
    with open(Path(args.out) / "sweep.csv") as fh:
        for row in csv.DictReader(fh):
            if row["converged"] == "1":
                by_ne[int(row["ne"])].append(int(row["epochs"]))
    for ne in sorted(by_ne):
        e = np.array(by_ne[ne])
        print(f"ne={ne:3d}: median {np.median(e):6.0f}  p90 {np.percentile(e, 90):6.0f}  max {e.max():6d}")
    return code


if __name__ == "__main__":
    raise SystemExit(main())
