import json
from pathlib import Path

import pytest

from rdarp import cli
from rdarp.fixtures import random_instance
from rdarp.instance import emit_realworld, parse_realworld

FIXTURES = Path(__file__).resolve().parent.parent / "data" / "realworld"


@pytest.fixture
def small_json(tmp_path):
    inst = random_instance(4, n=3, fleet_size=2)
    path = tmp_path / "inst.json"
    path.write_text(emit_realworld(inst))
    return path


def test_solve_writes_solution(tmp_path, small_json):
    out = tmp_path / "sol.json"
    rc = cli.run(["solve", str(small_json), "--eps-risk", "inf", "--out", str(out)])
    assert rc == 0
    doc = json.loads(out.read_text())
    assert doc["status"] == "Optimal"
    assert doc["objective"] > 0
    assert doc["routes"] and doc["stats"]["nodes"] >= 1
    for route in doc["routes"]:
        assert set(route) == {"sequence", "schedule", "cost", "H", "Q"}


def test_solve_output_byte_stable(tmp_path, small_json):
    out1, out2 = tmp_path / "a.json", tmp_path / "b.json"
    assert cli.run(["solve", str(small_json), "--out", str(out1)]) == 0
    assert cli.run(["solve", str(small_json), "--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_validate_roundtrip_and_violation(tmp_path, small_json, capsys):
    sol = tmp_path / "sol.json"
    assert cli.run(["solve", str(small_json), "--out", str(sol)]) == 0
    assert cli.run(["validate", str(small_json), str(sol)]) == 0
    doc = json.loads(sol.read_text())
    doc["routes"][0]["schedule"][1] += 500.0
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    rc = cli.run(["validate", str(small_json), str(bad)])
    captured = capsys.readouterr()
    assert rc == 2
    assert "vs" in captured.err  # both sides of the violated inequality


def test_validate_rejects_missing_coverage(tmp_path, small_json):
    sol = tmp_path / "sol.json"
    assert cli.run(["solve", str(small_json), "--out", str(sol)]) == 0
    doc = json.loads(sol.read_text())
    doc["routes"] = doc["routes"][:0]
    partial = tmp_path / "partial.json"
    partial.write_text(json.dumps(doc))
    assert cli.run(["validate", str(small_json), str(partial)]) == 2


def test_pareto_csv_matches_brute_force_front(tmp_path):
    import math

    from rdarp.oracle import brute_force_solve

    inst = random_instance(4, n=2, fleet_size=2)
    path = tmp_path / "fixture2.json"
    path.write_text(emit_realworld(inst))
    out = tmp_path / "front.csv"
    rc = cli.run(["pareto", str(path), "--step", "0.5", "--out", str(out)])
    assert rc == 0
    rows = out.read_text().strip().splitlines()
    assert rows[0] == "epsilon_risk,cost,max_risk,n_routes,t_master_s,t_pricing_s"
    got = [(float(r.split(",")[1]), float(r.split(",")[2])) for r in rows[1:]]

    solutions = []
    caps = [math.inf] + [h for _, h in got]
    for cap in caps:
        bf = brute_force_solve(inst, eps_risk=cap)
        if bf.status == "Optimal":
            peak = max((r.max_exposure for r in bf.routes), default=0.0)
            solutions.append((round(bf.objective, 5), round(peak, 5)))
    front = sorted(
        (c, h) for c, h in set(solutions)
        if not any((oc, oh) != (c, h) and oc <= c + 1e-9 and oh <= h + 1e-9
                   for oc, oh in solutions)
    )
    assert sorted((round(c, 5), round(h, 5)) for c, h in got) == front


def test_convert_roundtrip(tmp_path):
    cordeau = tmp_path / "toy.txt"
    cordeau.write_text(
        "1 2 480 3 30\n"
        "0 0.0 0.0 0 0 0 480\n"
        "1 3.0 4.0 2 1 10 40\n"
        "2 6.0 8.0 2 1 20 60\n"
        "3 0.0 4.0 2 -1 10 200\n"
        "4 6.0 0.0 2 -1 20 200\n"
        "5 0.0 0.0 0 0 0 480\n"
    )
    as_json = tmp_path / "toy.json"
    assert cli.run(["convert", str(cordeau), str(as_json)]) == 0
    inst = parse_realworld(as_json.read_text())
    assert inst.n == 2 and inst.risk[1] == 1.0
    back = tmp_path / "back.txt"
    assert cli.run(["convert", str(as_json), str(back)]) == 0
    from rdarp.cli import load_instance

    again = load_instance(str(back))
    assert again.n == inst.n
    assert again.travel == inst.travel


def test_shipped_fixtures_roundtrip():
    for path in sorted(FIXTURES.glob("*.json")):
        text = path.read_text()
        inst = parse_realworld(text)
        assert parse_realworld(emit_realworld(inst)) == inst


def test_usage_errors():
    assert cli.run(["solve"]) == 1
    assert cli.run(["solve", "/nonexistent/file.json"]) == 1
    assert cli.run([]) == 1


def test_version(capsys):
    rc = cli.run(["--version"])
    assert rc == 0
    assert "rdarp" in capsys.readouterr().out


def test_infeasible_exit_code(tmp_path):
    from dataclasses import replace

    from tests.test_oracle import corridor_instance

    inst = replace(corridor_instance(), fleet_size=1,
                   late=(100.0, 3.0, 3.0, 100.0, 100.0, 100.0))
    path = tmp_path / "inf.json"
    path.write_text(emit_realworld(inst))
    assert cli.run(["solve", str(path), "--eps-risk", "0.5"]) == 2
