"""Regenerate the rule table shipped in src/splinequad/data/rules.

Covers the Laplace integrand spaces S_{p-2}^{2p} for p = 2..5: every uniform
chain member up to ne = 50 and the non-uniform 21-knot partition for p = 2..4.
Each stored rule is re-verified when it is loaded.

    python scripts/build_rule_table.py [--ne-max 50] [--out DIR]
"""
import argparse
import logging
import time

from splinequad import casestudies, discovery
from splinequad.splines import Partition
from splinequad.store import RuleStore, bundled_rule_dir


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--ne-max", type=int, default=50)
    ap.add_argument("--p", type=int, nargs="+", default=[2, 3, 4, 5])
    ap.add_argument("--nonuniform-p", type=int, nargs="+", default=[2, 3, 4])
    ap.add_argument("--out", default=str(bundled_rule_dir()))
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    store = RuleStore(args.out)
    config = discovery.SearchConfig()
    for p in args.p:
        d, k = 2 * p, p - 2
        t0 = time.perf_counter()
        known = store.known_chain(d, k, args.ne_max)
        failed = []
        for ne, result in discovery.uniform_chain(d, k, args.ne_max, config, known):
            if result is None:
                continue
            if result.converged:
                store.put(result)
            else:
                failed.append(ne)
        print(f"p={p} (d={d}, k={k}): chain to ne={args.ne_max} in {time.perf_counter() - t0:.1f}s"
              + (f", failed ne={failed}" if failed else ""))

    partition = Partition(casestudies.NONUNIFORM_KNOTS)
    for p in args.nonuniform_p:
        d, k = 2 * p, p - 2
        if store.get(d, k, partition) is not None:
            continue
        t0 = time.perf_counter()
        base = store.get(d, k, Partition.uniform(partition.ne))
        result = discovery.discover_nonuniform(d, k, partition, config, uniform_rule=base)
        status = "converged" if result.converged else "FAILED"
        if result.converged:
            store.put(result)
        print(f"p={p} non-uniform: {status} after {result.epochs} epochs "
              f"({time.perf_counter() - t0:.1f}s)")


if __name__ == "__main__":
    main()
