"""Tests for the scenario runner, report writing and the CLI."""
import csv
import json
from pathlib import Path

import pytest

from krylov_query.__main__ import main
from krylov_query.core import duality
from krylov_query.core.runner import (
    execute_scenario,
    render_summary,
    run,
    run_scenarios,
    validate,
    write_outputs,
)
from krylov_query.core.scenario import load_scenarios, parse_scenarios
from scripts.check_corpus import compare_reports, run_corpus

CORPUS = Path(__file__).parent.parent / "config" / "scenarios"
PAULI = CORPUS / "pauli_x.json"


def scenario(name, **fields):
    entry = {
        "name": name,
        "mode": "duality",
        "operator": {"kind": "dense", "entries": [[0, 1], [1, 0]]},
        "state": {"kind": "basis_index", "index": 0},
        "function": {"kind": "time_evolution", "t": 1.0},
        "epsilon": 0.0,
    }
    entry.update(fields)
    return entry


def write_document(path: Path, *entries) -> Path:
    path.write_text(json.dumps({"schema_version": 1, "scenarios": list(entries)}))
    return path


def broken_state():
    return {"kind": "amplitudes", "values": [1.0, 0.0, 0.0]}


class TestExecuteScenario:
    def test_pauli_duality_record(self):
        sc = load_scenarios(PAULI).scenarios[0]
        result = execute_scenario(sc)
        assert result.ok
        record = result.record
        assert record["name"] == "pauli-x-duality"
        assert record["config_hash"] == sc.config_hash
        assert record["lanczos"]["krylov_dimension"] == 2
        assert record["report"]["n_mu"] == 1
        assert record["measure"]["weights"] == pytest.approx([0.5, 0.5])
        assert "tail_curve" in record["curves"]
        assert "wall_time_ms" not in record

    def test_dynamics_record(self):
        sc = load_scenarios(PAULI).scenarios[1]
        result = execute_scenario(sc)
        assert result.ok
        assert set(result.curves) == {"mean_position", "survival"}
        assert result.record["compression_error"] <= 1e-9
        assert result.record["correlator"]["gap"] <= 1e-12

    def test_failure_becomes_error_record(self):
        sc = parse_scenarios(
            {"schema_version": 1, "scenarios": [scenario("bad", state=broken_state())]}
        ).scenarios[0]
        result = execute_scenario(sc)
        assert not result.ok
        assert result.record["error"]["type"] == "DimensionMismatch"
        assert result.curves == {}

    def test_shipped_hhl_reports_are_certified(self):
        for sc in load_scenarios(CORPUS / "hhl.json").scenarios:
            result = execute_scenario(sc)
            assert result.ok, result.record["error"]
            report = result.record["report"]
            assert report["certified"] is True
            assert report["n_mu"] < report["worst_case_degree"]

    def test_family_record(self):
        sc = load_scenarios(CORPUS / "family.json").scenarios[0]
        record = execute_scenario(sc).record
        assert record["m_fam"] == 4
        assert record["query_complexity"] == 3
        assert set(record["query_complexity_by_criterion"]) == {"max_state", "averaged"}


class TestRunScenarios:
    @pytest.mark.asyncio
    async def test_results_follow_input_order(self, tmp_path):
        entries = [scenario(f"s{i}", function={"kind": "monomial", "k": i % 2}) for i in range(6)]
        entries[2] = scenario("s2", state=broken_state())
        path = write_document(tmp_path / "many.json", *entries)
        results = await run_scenarios(load_scenarios(path).scenarios, max_workers=3)
        assert [r.name for r in results] == [f"s{i}" for i in range(6)]
        assert [r.ok for r in results] == [True, True, False, True, True, True]


class TestOutputs:
    def test_json_format_writes_reports_and_summary(self, tmp_path):
        results = [execute_scenario(sc) for sc in load_scenarios(PAULI).scenarios]
        written = write_outputs(results, tmp_path, "json", PAULI)
        names = sorted(p.name for p in written)
        assert names == ["pauli-x-chain.report.json", "pauli-x-duality.report.json", "summary.md"]

    def test_csv_format_writes_curves(self, tmp_path):
        results = [execute_scenario(sc) for sc in load_scenarios(PAULI).scenarios]
        write_outputs(results, tmp_path, "csv", PAULI)
        with open(tmp_path / "pauli-x-chain.mean_position.csv", newline="") as f:
            rows = list(csv.reader(f))
        assert rows[0] == ["t", "C"]
        assert len(rows) == 34
        assert float(rows[1][1]) == pytest.approx(0.0, abs=1e-14)
        assert (tmp_path / "pauli-x-duality.tail_curve.csv").exists()

    def test_unknown_format(self, tmp_path):
        with pytest.raises(ValueError):
            write_outputs([], tmp_path, "xml", PAULI)

    def test_summary_lists_errors(self, tmp_path):
        bad = scenario("bad", state=broken_state())
        path = write_document(tmp_path / "s.json", scenario("good"), bad)
        results = [execute_scenario(sc) for sc in load_scenarios(path).scenarios]
        text = render_summary(results, path)
        assert "| good | duality | ok |" in text
        assert "| bad | duality | error |" in text
        assert "## Errors" in text
        assert "DimensionMismatch" in text


class TestRun:
    def test_success(self, tmp_path):
        assert run(PAULI, tmp_path / "out") == 0
        record = json.loads((tmp_path / "out" / "pauli-x-duality.report.json").read_text())
        assert record["error"] is None
        assert record["schema_version"] == 1

    def test_failing_scenario_exits_one(self, tmp_path):
        bad = scenario("bad", state=broken_state())
        path = write_document(tmp_path / "s.json", scenario("good"), bad)
        assert run(path, tmp_path / "out") == 1
        record = json.loads((tmp_path / "out" / "bad.report.json").read_text())
        assert record["error"]["type"] == "DimensionMismatch"
        assert (tmp_path / "out" / "good.report.json").exists()

    def test_certificate_failure_exits_one(self, tmp_path, monkeypatch):
        counted = duality.apply_polynomial_counted

        def overcount(*args):
            state, matvecs = counted(*args)
            return state, matvecs + 1

        monkeypatch.setattr(duality, "apply_polynomial_counted", overcount)
        path = write_document(tmp_path / "s.json", scenario("miscounted"))
        assert run(path, tmp_path / "out") == 1
        record = json.loads((tmp_path / "out" / "miscounted.report.json").read_text())
        assert record["error"]["type"] == "CertificateFailure"
        assert record["report"]["certified"] is False

    def test_parse_error_exits_two(self, tmp_path):
        path = write_document(tmp_path / "s.json", scenario("neg", epsilon=-1.0))
        assert run(path, tmp_path / "out") == 2
        assert not (tmp_path / "out").exists()

    def test_missing_file_exits_two(self, tmp_path):
        assert run(tmp_path / "absent.json", tmp_path / "out") == 2

    def test_unwritable_output_exits_one(self, tmp_path):
        blocker = tmp_path / "blocker"
        blocker.write_text("not a directory")
        assert run(PAULI, blocker) == 1

    def test_reports_are_byte_reproducible(self, tmp_path):
        assert run(PAULI, tmp_path / "first", "both") == 0
        assert run(PAULI, tmp_path / "second", "both") == 0
        assert compare_reports(tmp_path / "first", tmp_path / "second") == []

    def test_corpus_is_byte_reproducible(self, tmp_path):
        first = run_corpus(CORPUS, tmp_path / "first")
        second = run_corpus(CORPUS, tmp_path / "second")
        assert set(first.values()) == set(second.values()) == {0}
        assert compare_reports(tmp_path / "first", tmp_path / "second") == []

    def test_seed_override_changes_hash(self, tmp_path):
        path = CORPUS / "random_duality.yaml"
        assert run(path, tmp_path / "a", "json", seed_override=1) == 0
        assert run(path, tmp_path / "b", "json", seed_override=2) == 0
        name = "random-gaussian-filter.report.json"
        first = json.loads((tmp_path / "a" / name).read_text())
        second = json.loads((tmp_path / "b" / name).read_text())
        assert first["config_hash"] != second["config_hash"]


class TestCompareReports:
    def test_detects_difference_and_missing(self, tmp_path):
        for side in ("first", "second"):
            (tmp_path / side).mkdir()
            (tmp_path / side / "a.report.json").write_text("{}\n")
        (tmp_path / "second" / "a.report.json").write_text('{"x": 1}\n')
        (tmp_path / "first" / "b.report.json").write_text("{}\n")
        assert compare_reports(tmp_path / "first", tmp_path / "second") == [
            "b.report.json",
            "a.report.json",
        ]


class TestValidate:
    @pytest.mark.parametrize("path", sorted(CORPUS.iterdir()), ids=lambda p: p.name)
    def test_corpus_is_valid(self, path, capsys):
        assert validate(path) == 0
        assert "✓" in capsys.readouterr().out

    def test_dimension_mismatch_is_invalid(self, tmp_path, capsys):
        path = write_document(tmp_path / "s.json", scenario("bad", state=broken_state()))
        assert validate(path) == 2
        assert "scenarios[0]" in capsys.readouterr().err


class TestCli:
    def test_run(self, tmp_path):
        assert main(["run", str(PAULI), "--out", str(tmp_path), "--format", "both"]) == 0
        assert (tmp_path / "summary.md").exists()
        assert (tmp_path / "pauli-x-chain.survival.csv").exists()

    def test_validate(self):
        assert main(["validate", str(PAULI)]) == 0

    def test_missing_command(self):
        assert main([]) == 2

    def test_bad_format(self, tmp_path):
        assert main(["run", str(PAULI), "--format", "xml"]) == 2

    def test_negative_seed_override(self, tmp_path):
        assert main(["run", str(PAULI), "--out", str(tmp_path), "--seed-override", "-3"]) == 2
        assert not (tmp_path / "summary.md").exists()
