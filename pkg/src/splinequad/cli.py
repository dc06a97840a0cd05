"""Command line interface: ``splinequad {discover,sweep,verify,savings,laplace}``.

Exit status: 0 success, 1 non-convergence or failed verification, 2 usage or I/O error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import casestudies, discovery, quadrature
from .splines import Partition, SplineSpace
from .store import RuleStore, case_name

CONFIG_ENV = "SPLINEQUAD_CONFIG"

log = logging.getLogger("splinequad")


class UsageError(Exception):
    pass


def load_config(path=None) -> discovery.SearchConfig:
    """Search settings from a JSON object of SearchConfig fields; ``$SPLINEQUAD_CONFIG`` is the default path."""
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return discovery.SearchConfig()
    try:
        data = json.loads(Path(path).read_text())
        return discovery.SearchConfig.from_mapping(data)
    except (OSError, ValueError, TypeError) as exc:
        raise UsageError(f"bad config file {path}: {exc}") from exc


def read_partition(path) -> Partition:
    try:
        knots = [float(tok) for tok in Path(path).read_text().split()]
        return Partition(tuple(knots))
    except (OSError, ValueError) as exc:
        raise UsageError(f"bad partition file {path}: {exc}") from exc


# ---- discover ---------------------------------------------------------------------


def cmd_discover(args) -> int:
    config = load_config(args.config)
    d, k, ne = args.degree, args.continuity, args.elements
    try:
        quadrature.optimal_point_count(d, k, ne)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    store = RuleStore(args.rule_dir, tol=config.exactness_tol) if args.rule_dir else None
    if args.partition_file:
        partition = read_partition(args.partition_file)
        if partition.ne != ne:
            raise UsageError(f"partition has {partition.ne} elements, --elements says {ne}")
    else:
        partition = Partition.uniform(ne)

    known = store.known_chain(d, k, ne) if store is not None else {}
    if partition.is_uniform():
        result = discovery.discover_uniform(d, k, ne, config, known)
    else:
        base = discovery.discover_uniform(d, k, ne, config, known)
        if not base.converged:
            log.error("no uniform rule to initialise from (rel err %.3g)", base.max_rel_error)
            return 1
        result = discovery.discover_nonuniform(d, k, partition, config, uniform_rule=base.rule)

    out = args.out or case_name(d, k, partition)
    space = SplineSpace(d, k, partition)
    quadrature.write_rule(out, result.rule, space, result.max_rel_error,
                          epochs=result.epochs, converged=result.converged)
    status = "converged" if result.converged else "NOT converged"
    print(f"S_{k}^{d}, ne={ne}: q={result.rule.count} {status}, max rel error "
          f"{result.max_rel_error:.3e}, {result.epochs} epochs -> {out}")
    return 0 if result.converged else 1


# ---- sweep ------------------------------------------------------------------------


def _run_chain(task):
    d, k, ne_max, config, known_files = task
    known = {}
    for ne, path in known_files.items():
        rule, _, _ = quadrature.read_rule(path)
        known[ne] = rule
    rows = []
    for ne, result in discovery.uniform_chain(d, k, ne_max, config, known):
        rows.append((ne, result))
    return d, k, rows


def _stored_case(path: Path, tol: float):
    rule, space, data = quadrature.read_rule(path)
    ok = bool(data.get("converged")) and quadrature.verify_exactness(rule, space).passed(tol)
    return ok, int(data.get("epochs", 0)), rule.count


def cmd_sweep(args) -> int:
    config = load_config(args.config)
    out = Path(args.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create {out}: {exc}") from exc
    tasks = []
    stats = {}
    d_max = args.max_degree if args.max_degree is not None else config.max_degree
    ne_max = args.max_elements if args.max_elements is not None else config.max_elements
    for d, k, nes in discovery.sweep_cases(d_max, ne_max, args.min_degree):
        known_files = {}
        if args.resume:
            for ne in nes:
                path = out / case_name(d, k, Partition.uniform(ne))
                if path.exists():
                    ok, epochs, q = _stored_case(path, config.exactness_tol)
                    if ok:
                        known_files[ne] = path
                        stats[(d, k, ne)] = (q, epochs, True)
        if len(known_files) < len(nes):
            tasks.append((d, k, nes[-1], config, known_files))

    def collect(d, k, rows):
        for ne, result in rows:
            if result is None:
                continue
            q = quadrature.optimal_point_count(d, k, ne)
            stats[(d, k, ne)] = (q, result.epochs, result.converged)
            if np.all(np.isfinite(result.rule.points)):
                quadrature.write_rule(out / case_name(d, k, Partition.uniform(ne)), result.rule,
                                      result.space, result.max_rel_error, epochs=result.epochs,
                                      converged=result.converged)
            if not result.converged:
                log.warning("d=%d k=%d ne=%d did not converge", d, k, ne)

    if args.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            for d, k, rows in pool.map(_run_chain, tasks):
                collect(d, k, rows)
    else:
        for task in tasks:
            collect(*_run_chain(task))

    with open(out / "sweep.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["d", "k", "ne", "q", "epochs", "converged"])
        for key in sorted(stats):
            q, epochs, conv = stats[key]
            writer.writerow([*key, q, epochs, int(conv)])
    n_ok = sum(1 for v in stats.values() if v[2])
    epochs = [v[1] for v in stats.values() if v[2]]
    median = float(np.median(epochs)) if epochs else float("nan")
    print(f"{n_ok}/{len(stats)} cases converged; median epochs {median:g} -> {out}")
    return 0 if n_ok == len(stats) else 1


# ---- verify -----------------------------------------------------------------------


def cmd_verify(args) -> int:
    path = args.rule_file or args.rule_file_opt
    if not path:
        raise UsageError("give a rule file")
    try:
        rule, space, _ = quadrature.read_rule(path)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read rule {path}: {exc}") from exc
    report = quadrature.verify_exactness(rule, space)
    ok = report.passed(args.tol)
    print(f"S_{space.continuity}^{space.degree}, ne={space.ne}, q={rule.count}")
    print(f"max abs error {report.max_abs_error:.3e}")
    print(f"max rel error {report.max_rel_error:.3e} (basis {report.worst_basis_index})")
    print(("PASS" if ok else "FAIL") + f" at tolerance {args.tol:g}")
    return 0 if ok else 1


# ---- savings ----------------------------------------------------------------------


def cmd_savings(args) -> int:
    try:
        for dim in args.dims:
            s = quadrature.savings_report(args.p, args.elements, dim)
            print(f"{dim}D p={args.p} ne={args.elements}: EWG {s.ewg_count:,}  "
                  f"optimal {s.optimal_count:,}  savings {s.percent:.1f}%")
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    return 0


# ---- laplace ----------------------------------------------------------------------


def cmd_laplace(args) -> int:
    config = load_config(args.config)
    partition = read_partition(args.partition_file) if args.partition_file else None
    if partition is not None and args.elements is not None and partition.ne != args.elements:
        raise UsageError(f"partition has {partition.ne} elements, --elements says {args.elements}")
    if partition is None and args.elements is None:
        raise UsageError("give --elements or --partition-file")
    store = RuleStore.bundled(args.rule_dir, tol=config.exactness_tol)
    try:
        report = casestudies.laplace_study(args.p, args.elements, partition, args.source,
                                           rules=store,
                                           config=config)
    except RuntimeError as exc:
        log.error("%s", exc)
        return 1
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    out = args.out_csv or f"spectrum_p{args.p}_ne{(partition or Partition.uniform(args.elements)).ne}_{args.source.replace(':', '')}.csv"
    report.write_csv(out)
    print(f"{len(report.errors)} modes; max EVerr {np.max(report.errors):.6e}; "
          f"mode-1 EVerr {report.errors[0]:.6e} -> {out}")
    return 0


# ---- entry point ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="splinequad", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("discover", help="find the optimal rule for one spline space")
    p.add_argument("--degree", type=int, required=True)
    p.add_argument("--continuity", type=int, required=True)
    p.add_argument("--elements", type=int, required=True)
    p.add_argument("--partition-file")
    p.add_argument("--config")
    p.add_argument("--rule-dir", help="reuse converged chain rules stored here")
    p.add_argument("--out", help="output JSON (default: <case>.json)")
    p.set_defaults(func=cmd_discover)

    p = sub.add_parser("sweep", help="discover rules for all (d, k, ne) of a uniform grid")
    p.add_argument("--max-degree", type=int, help="default: max_degree of the config")
    p.add_argument("--max-elements", type=int, help="default: max_elements of the config")
    p.add_argument("--min-degree", type=int, default=2)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--resume", action="store_true")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--config")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="check a rule file for exactness")
    p.add_argument("rule_file", nargs="?")
    p.add_argument("--rule-file", dest="rule_file_opt")
    p.add_argument("--tol", type=float, default=1e-12)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("savings", help="EWG vs optimal point counts")
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--elements", type=int, required=True)
    p.add_argument("--dims", type=int, nargs="+", default=[1, 2, 3])
    p.set_defaults(func=cmd_savings)

    p = sub.add_parser("laplace", help="1D Laplace eigenvalue errors")
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--elements", type=int)
    p.add_argument("--source", default="ewg", help="ewg | optimal | riga:<block>")
    p.add_argument("--partition-file")
    p.add_argument("--rule-dir", help="writable rule cache (bundled rules are always consulted)")
    p.add_argument("--out-csv")
    p.add_argument("--config")
    p.set_defaults(func=cmd_laplace)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
