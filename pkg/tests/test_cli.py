import json

import numpy as np

from splinequad import casestudies
from splinequad.cli import main
from splinequad.quadrature import QuadratureRule, ewg_rule, read_rule, write_rule
from splinequad.splines import Partition, SplineSpace
from splinequad.store import RuleStore, case_name


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_discover_table_count(tmp_path, capsys):
    out = tmp_path / "r.json"
    code, text, _ = run(capsys, "discover", "--degree", "4", "--continuity", "0", "--elements", "20",
                        "--out", str(out))
    assert code == 0 and "q=41 converged" in text
    rule, space, data = read_rule(out)
    assert rule.count == 41 and data["converged"] and data["max_rel_error"] <= 1e-12


def test_discover_midpoint(tmp_path, capsys):
    out = tmp_path / "m.json"
    assert run(capsys, "discover", "--degree", "1", "--continuity", "0", "--elements", "1",
               "--out", str(out))[0] == 0
    rule, _, _ = read_rule(out)
    np.testing.assert_array_equal(rule.points, [0.5])
    np.testing.assert_array_equal(rule.weights, [1.0])


def test_discover_nonuniform_partition(tmp_path, capsys):
    knots = tmp_path / "knots.txt"
    knots.write_text("0 0.1 0.25 0.3 0.45 0.6 0.7 0.85 1\n")
    out = tmp_path / "nu.json"
    code, text, _ = run(capsys, "discover", "--degree", "6", "--continuity", "1", "--elements", "8",
                        "--partition-file", str(knots), "--out", str(out))
    # either a converged rule or a flagged failure, but always a written rule
    rule, space, data = read_rule(out)
    assert code == (0 if data["converged"] else 1)
    assert space.partition.knots[2] == 0.25


def test_discover_nonconvergence_writes_flagged_rule(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"max_epochs": 3}))
    out = tmp_path / "bad.json"
    code, text, _ = run(capsys, "discover", "--degree", "6", "--continuity", "0", "--elements", "5",
                        "--config", str(cfg), "--out", str(out))
    assert code == 1 and "NOT converged" in text
    assert read_rule(out)[2]["converged"] is False


def test_config_from_environment(tmp_path, capsys, monkeypatch):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"max_epochs": 2}))
    monkeypatch.setenv("SPLINEQUAD_CONFIG", str(cfg))
    code, _, _ = run(capsys, "discover", "--degree", "6", "--continuity", "0", "--elements", "5",
                     "--out", str(tmp_path / "x.json"))
    assert code == 1


def test_usage_errors(tmp_path, capsys):
    assert run(capsys, "discover", "--degree", "2", "--continuity", "2", "--elements", "3")[0] == 2
    assert run(capsys, "discover", "--degree", "2")[0] == 2
    bad = tmp_path / "cfg.json"
    bad.write_text("{")
    assert run(capsys, "discover", "--degree", "2", "--continuity", "0", "--elements", "3",
               "--config", str(bad))[0] == 2
    assert run(capsys, "verify", str(tmp_path / "missing.json"))[0] == 2
    (tmp_path / "broken.json").write_text("not json")
    assert run(capsys, "verify", str(tmp_path / "broken.json"))[0] == 2
    assert run(capsys, "laplace", "--p", "2")[0] == 2
    assert run(capsys, "savings", "--p", "1", "--elements", "4")[0] == 2


def test_sweep_and_resume(tmp_path, capsys):
    out = tmp_path / "sweep"
    code, text, _ = run(capsys, "sweep", "--max-degree", "3", "--max-elements", "3", "--out-dir", str(out))
    assert code == 0 and text.startswith("10/10")
    table = (out / "sweep.csv").read_text()
    assert len(table.splitlines()) == 11
    files = {p.name: p.read_bytes() for p in out.glob("*.json")}
    assert len(files) == 10
    stamps = {p.name: p.stat().st_mtime_ns for p in out.glob("*.json")}

    code, _, _ = run(capsys, "sweep", "--max-degree", "3", "--max-elements", "3", "--out-dir", str(out),
                     "--resume")
    assert code == 0
    assert (out / "sweep.csv").read_text() == table
    assert {p.name: p.stat().st_mtime_ns for p in out.glob("*.json")} == stamps


def test_sweep_is_deterministic(tmp_path, capsys):
    for name in ("a", "b"):
        run(capsys, "sweep", "--max-degree", "3", "--max-elements", "4", "--out-dir", str(tmp_path / name),
            "--workers", "2")
    a, b = tmp_path / "a", tmp_path / "b"
    assert (a / "sweep.csv").read_bytes() == (b / "sweep.csv").read_bytes()
    for f in a.glob("*.json"):
        assert f.read_bytes() == (b / f.name).read_bytes()


def test_verify_pass_and_fail(tmp_path, capsys):
    src = tmp_path / "r.json"
    run(capsys, "discover", "--degree", "4", "--continuity", "1", "--elements", "6", "--out", str(src))
    code, text, _ = run(capsys, "verify", str(src))
    assert code == 0 and "PASS" in text

    rule, space, data = read_rule(src)
    w = rule.weights.copy()
    w[3] += 1e-6
    bad = tmp_path / "bad.json"
    write_rule(bad, QuadratureRule(rule.points, w), space, data["max_rel_error"])
    code, text, _ = run(capsys, "verify", "--rule-file", str(bad))
    assert code == 1 and "FAIL" in text
    rel = float(text.split("max rel error ")[1].split()[0])
    assert 1e-7 < rel < 1e-4

    ewg = tmp_path / "ewg.json"
    write_rule(ewg, ewg_rule(3, space.partition), space, 0.0)
    assert run(capsys, "verify", str(ewg))[0] == 0


def test_savings_output(capsys):
    code, text, _ = run(capsys, "savings", "--p", "2", "--elements", "50", "--dims", "1")
    assert code == 0 and "EWG 150" in text and "optimal 101" in text and "32.7%" in text
    code, text, _ = run(capsys, "savings", "--p", "4", "--elements", "50", "--dims", "3")
    assert "15,625,000" in text and "3,511,808" in text and "77.5%" in text


def test_laplace_optimal_vs_ewg(tmp_path, capsys):
    a, b = tmp_path / "opt.csv", tmp_path / "ewg.csv"
    assert run(capsys, "laplace", "--p", "2", "--elements", "50", "--source", "optimal",
               "--out-csv", str(a))[0] == 0
    assert run(capsys, "laplace", "--p", "2", "--elements", "50", "--source", "ewg",
               "--out-csv", str(b))[0] == 0
    ea = casestudies.read_spectrum_csv(a).errors
    eb = casestudies.read_spectrum_csv(b).errors
    assert ea.size == 50 and np.max(np.abs(ea - eb)) <= 1e-9


def test_laplace_riga_and_nonuniform(tmp_path, capsys):
    code, text, _ = run(capsys, "laplace", "--p", "3", "--elements", "128", "--source", "riga:16",
                        "--out-csv", str(tmp_path / "riga.csv"))
    assert code == 0 and "mode-1 EVerr" in text
    knots = tmp_path / "tschirn_knots.txt"
    knots.write_text(" ".join(repr(u) for u in casestudies.NONUNIFORM_KNOTS))
    code, _, _ = run(capsys, "laplace", "--p", "2", "--elements", "20", "--partition-file", str(knots),
                     "--source", "ewg", "--out-csv", str(tmp_path / "nu.csv"))
    assert code == 0
    assert casestudies.read_spectrum_csv(tmp_path / "nu.csv").errors.size == 20


def test_laplace_writes_to_rule_dir(tmp_path, capsys):
    rules = tmp_path / "rules"
    code, _, _ = run(capsys, "laplace", "--p", "6", "--elements", "4", "--source", "optimal",
                     "--rule-dir", str(rules), "--out-csv", str(tmp_path / "s.csv"))
    assert code == 0
    assert (rules / case_name(12, 4, Partition.uniform(4))).exists()


def test_store_ignores_inexact_rules(tmp_path):
    space = SplineSpace(4, 0, Partition.uniform(3))
    store = RuleStore(tmp_path)
    good = ewg_rule(3, space.partition)
    write_rule(tmp_path / case_name(4, 0, space.partition), good, space, 0.0, converged=True)
    assert store.get(4, 0, space.partition) is not None
    w = good.weights.copy()
    w[0] += 1e-5
    write_rule(tmp_path / case_name(4, 0, space.partition), QuadratureRule(good.points, w), space, 0.0)
    assert store.get(4, 0, space.partition) is None
    assert store.get(4, 0, Partition.uniform(9)) is None
    assert RuleStore().put(object()) is None


def test_bundled_rules_cover_laplace_cases():
    store = RuleStore.bundled()
    for p in (2, 3, 4, 5):
        for ne in (10, 16, 20, 40, 50):
            assert store.get(2 * p, p - 2, Partition.uniform(ne)) is not None
    nonuniform = Partition(casestudies.NONUNIFORM_KNOTS)
    for p in (2, 3, 4):
        assert store.get(2 * p, p - 2, nonuniform) is not None
    assert case_name(4, 0, nonuniform).startswith("d04_k00_ne020_")
