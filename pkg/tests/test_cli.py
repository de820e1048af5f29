from __future__ import annotations

import csv
import json

import pytest

from conftest import make_map
from fibreplan.bench import synth_instance, tiny_spec
from fibreplan.cli import main
from fibreplan.model import BusinessRules, rules_to_text, save_map

SMALL_GA = ["--generations", "5", "--population", "10"]


@pytest.fixture
def tiny_map(tmp_path):
    path = tmp_path / "tiny.json"
    save_map(synth_instance(tiny_spec(1)), path)
    return path


def read_json(path):
    return json.loads(path.read_text())


class TestDesign:
    def test_artifacts(self, tmp_path, tiny_map, capsys):
        out = tmp_path / "out"
        rc = main(["design", "--map", str(tiny_map), "--out", str(out), "--seed", "1", "--runs", "2", *SMALL_GA])
        report = read_json(out / "report.json")
        assert rc == (0 if report["feasible"] else 1)
        for name in ("solution.json", "report.json", "bill.json", "metrics.csv", "summary.csv",
                     "trace.csv", "design.geojson", "design.svg", "timing.json"):
            assert (out / name).exists(), name
        geo = read_json(out / "design.geojson")
        layers = {f["properties"]["layer"] for f in geo["features"]}
        assert {"client", "olt"} <= layers
        assert (out / "design.svg").read_text().startswith("<svg")
        with (out / "metrics.csv").open() as fh:
            assert len(list(csv.DictReader(fh))) == 2
        assert "best fitness" in capsys.readouterr().out

    def test_format_selection(self, tmp_path, tiny_map):
        out = tmp_path / "out"
        main(["design", "--map", str(tiny_map), "--out", str(out), "--format", "svg", "--allow-infeasible", *SMALL_GA])
        assert (out / "design.svg").exists()
        assert not (out / "design.geojson").exists()
        assert not (out / "metrics.csv").exists()

    def test_zero_generations(self, tmp_path, tiny_map):
        out = tmp_path / "out"
        rc = main(["design", "--map", str(tiny_map), "--out", str(out), "--generations", "0",
                   "--population", "8", "--allow-infeasible"])
        assert rc == 0
        with (out / "trace.csv").open() as fh:
            assert len(list(csv.DictReader(fh))) == 1

    def test_byte_identical_csv(self, tmp_path, tiny_map):
        for name in ("a", "b"):
            main(["design", "--map", str(tiny_map), "--out", str(tmp_path / name), "--seed", "7",
                  "--runs", "2", "--allow-infeasible", *SMALL_GA])
        for f in ("metrics.csv", "summary.csv", "trace.csv"):
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()

    def test_infeasible_exit_code(self, tmp_path):
        net = make_map([(0, 0, 0), (1, 50, 0)], [(0, 1)], [(5, 50, 10), (6, 900, 900)])
        path = tmp_path / "m.json"
        save_map(net, path)
        args = ["design", "--map", str(path), "--out", str(tmp_path / "o"), *SMALL_GA]
        assert main(args) == 1
        assert main(args + ["--allow-infeasible"]) == 0

    def test_rules_from_environment(self, tmp_path, tiny_map, monkeypatch):
        rules_path = tmp_path / "rules.ini"
        rules_path.write_text(rules_to_text(BusinessRules(cost_pdo=1000.0)))
        monkeypatch.setenv("FIBREPLAN_RULES", str(rules_path))
        out = tmp_path / "o"
        main(["design", "--map", str(tiny_map), "--out", str(out), "--allow-infeasible", *SMALL_GA])
        cost = read_json(out / "solution.json")["cost"]
        assert cost["c_mat"] >= 1000 * cost["n_pdo"]

    def test_parse_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text('{"nodes": [\n  {"id": 0 "x_m": 1}\n], "edges": []}')
        assert main(["design", "--map", str(bad), "--out", str(tmp_path / "o")]) == 2
        assert "bad.json:2:" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main(["design", "--map", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o")]) == 2

    def test_bad_runs(self, tiny_map, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["design", "--map", str(tiny_map), "--out", str(tmp_path / "o"), "--runs", "0"])
        assert exc.value.code == 2


class TestValidate:
    def test_round_trip(self, tmp_path, tiny_map, capsys):
        out = tmp_path / "out"
        main(["design", "--map", str(tiny_map), "--out", str(out), "--allow-infeasible", *SMALL_GA])
        saved = read_json(out / "solution.json")["cost"]
        report_path = tmp_path / "check.json"
        main(["validate", "--map", str(tiny_map), "--solution", str(out / "solution.json"), "--out", str(report_path)])
        assert read_json(report_path)["cost"] == saved

    def test_handmade_cost(self, tmp_path, capsys):
        net = make_map([(0, 0, 0), (1, 100, 0), (2, 200, 0)], [(0, 1), (1, 2)],
                       [(5, 100, 30), (6, 200, 40), (7, 210, 0)])
        map_path = tmp_path / "m.json"
        save_map(net, map_path)
        sol = tmp_path / "s.json"
        sol.write_text(json.dumps({"pdos": [1, 2], "assignments": [
            {"client": 5, "pdo": 1}, {"client": 6, "pdo": 2}, {"client": 7, "pdo": 2}]}))
        out = tmp_path / "r.json"
        rc = main(["validate", "--map", str(map_path), "--solution", str(sol), "--out", str(out)])
        assert rc == 0
        # 2 PDOs, drops 30 + 40 + 10 m, distribution 200 m
        assert read_json(out)["cost"]["c_mat"] == pytest.approx(2 * 300 + 2 * 80 + 5 * 200)
        assert "feasible" in capsys.readouterr().out

    def test_empty_on_clientless(self, tmp_path):
        map_path = tmp_path / "m.json"
        save_map(make_map([(0, 0, 0), (1, 10, 0)], [(0, 1)]), map_path)
        sol = tmp_path / "s.json"
        sol.write_text(json.dumps({"pdos": [], "assignments": []}))
        out = tmp_path / "r.json"
        assert main(["validate", "--map", str(map_path), "--solution", str(sol), "--out", str(out)]) == 0
        doc = read_json(out)
        assert doc["cost"]["fitness"] == 0 and doc["report"]["feasible"]

    def test_over_capacity(self, tmp_path, capsys):
        clients = [(10 + k, 100 + k, 5) for k in range(12)]
        map_path = tmp_path / "m.json"
        save_map(make_map([(0, 0, 0), (1, 100, 0)], [(0, 1)], clients), map_path)
        sol = tmp_path / "s.json"
        sol.write_text(json.dumps({"pdos": [1], "assignments": [{"client": c[0], "pdo": 1} for c in clients]}))
        assert main(["validate", "--map", str(map_path), "--solution", str(sol)]) == 1
        assert "capacity" in capsys.readouterr().out

    def test_unknown_node(self, tmp_path, tiny_map, capsys):
        sol = tmp_path / "s.json"
        sol.write_text(json.dumps({"pdos": [9999], "assignments": []}))
        assert main(["validate", "--map", str(tiny_map), "--solution", str(sol)]) == 2
        assert "9999" in capsys.readouterr().err


class TestBenchAndSynth:
    def test_tiny_suite(self, tmp_path):
        spec = tmp_path / "spec.json"
        spec.write_text(json.dumps({"instances": [
            {"name": "tiny", "count": 2, "n_candidates": 6, "n_sdu": 5, "n_mdu": 0,
             "area_m2": 12000, "topology": "grid", "seed": 3},
        ]}))
        out = tmp_path / "bench"
        assert main(["bench", "--spec", str(spec), "--out", str(out), *SMALL_GA]) == 0
        with (out / "comparison.csv").open() as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 2
        assert all(r["oracle"] != "" for r in rows)
        assert (out / "table_tiny-0.csv").exists()

    def test_empty_spec(self, tmp_path, capsys):
        spec = tmp_path / "spec.json"
        spec.write_text(json.dumps({"instances": []}))
        assert main(["bench", "--spec", str(spec), "--out", str(tmp_path / "b")]) == 2
        assert "no instances" in capsys.readouterr().err

    def test_synth(self, tmp_path):
        out = tmp_path / "m.json"
        assert main(["synth", "--out", str(out), "--seed", "3"]) == 0
        doc = read_json(out)
        assert len(doc["nodes"]) == 188 and len(doc["edges"]) == 81
