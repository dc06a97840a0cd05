"""Loss L over (x1, w1) for the symmetric 3-point rule on S_0^1 with five elements.

Writes a CSV grid; the landscape has several local minima and one global
optimum at x1 = 2/15, w1 = 0.3.

    python scripts/loss_surface.py --out results/loss_surface.csv --n 201
"""
import argparse
import csv

import numpy as np

from splinequad.discovery import FreeParams, expand_symmetric
from splinequad.loss import build_context, loss_value
from splinequad.splines import Partition, make_space


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="loss_surface.csv")
    ap.add_argument("--n", type=int, default=201)
    args = ap.parse_args()
    ctx = build_context(make_space(1, 0, Partition.uniform(5)))
    xs = np.linspace(0.0, 0.5, args.n)
    ws = np.linspace(0.0, 0.5, args.n)
    best = (np.inf, None, None)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x1", "w1", "loss"])
        for x1 in xs:
            for w1 in ws:
                L = loss_value(ctx, expand_symmetric(FreeParams([x1], [w1]), 3))
                writer.writerow([repr(float(x1)), repr(float(w1)), repr(L)])
                best = min(best, (L, x1, w1), key=lambda t: t[0])
    print(f"grid minimum L={best[0]:.3e} at x1={best[1]:.4f}, w1={best[2]:.4f}")


if __name__ == "__main__":
    main()
