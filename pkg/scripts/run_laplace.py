"""Laplace eigenvalue-error curves for the uniform, macroelement and non-uniform studies.

Writes one CSV per (p, configuration, rule source) into the output directory;
plotting is left to external tools.

    python scripts/run_laplace.py --out results/laplace
"""
import argparse
from pathlib import Path

import numpy as np

from splinequad import casestudies as cs
from splinequad.splines import Partition
from splinequad.store import RuleStore


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="results/laplace")
    ap.add_argument("--rule-dir", help="writable cache for rules not in the bundled table")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    store = RuleStore.bundled(args.rule_dir)

    for p in (2, 3, 4, 5):
        spectra = {src: cs.laplace_study(p, 50, rule_source=src, rules=store) for src in ("ewg", "optimal")}
        for src, rep in spectra.items():
            rep.write_csv(out / f"uniform_p{p}_ne50_{src}.csv")
        diff = np.max(np.abs(spectra["ewg"].errors - spectra["optimal"].errors))
        print(f"uniform p={p}, ne=50: max |EVerr difference| {diff:.2e}")

    for p in (2, 3):
        errs = [cs.laplace_study(p, ne, rule_source="optimal", rules=store).errors[0] for ne in (10, 20, 40)]
        slope = -np.polyfit(np.log([10, 20, 40]), np.log(errs), 1)[0]
        print(f"p={p}: mode-1 convergence rate {slope:.3f}")

    for p in (2, 3, 4, 5):
        riga = cs.laplace_study(p, 128, rule_source="riga:16", rules=store)
        iga = cs.laplace_study(p, 128, rule_source="ewg")
        riga.write_csv(out / f"riga_p{p}_ne128_b16.csv")
        iga.write_csv(out / f"iga_p{p}_ne128_ewg.csv")
        print(f"rIGA p={p}: {riga.eigenvalues.size} dofs vs {iga.eigenvalues.size}; "
              f"min EVerr {riga.errors.min():.2e}")

    partition = Partition(cs.NONUNIFORM_KNOTS)
    for p in (2, 3, 4):
        for src in ("ewg", "optimal"):
            cs.laplace_study(p, partition=partition, rule_source=src, rules=store).write_csv(
                out / f"nonuniform_p{p}_{src}.csv")
        print(f"non-uniform p={p} written")


if __name__ == "__main__":
    main()
