import json
from pathlib import Path

import pytest

from prefelicit import QueryPlan, UncertaintyModel, PreferencePolyhedron
from prefelicit.cli import format_plan, parse_plan, run

E1_PATH = str(Path(__file__).parents[1] / "data" / "e1.csv")


class TestPlanSyntax:
    def test_roundtrip(self):
        plan = parse_plan("1:2,3:4")
        assert format_plan(plan) == "1:2,3:4"

    def test_bad_syntax(self, capsys):
        assert run(["evaluate", "--bank", E1_PATH, "--plan", "12"]) == 2


class TestSolveOffline:
    def test_e1_mmu(self, capsys):
        code = run(["solve-offline", "--bank", E1_PATH, "--criterion", "mmu",
                    "--k", "1", "--gamma", "0", "--json"])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["plan"] == "1:2"
        assert payload["value"] == pytest.approx(0.5, abs=1e-6)
        assert payload["normalized"] == pytest.approx(1.0, abs=1e-6)

    def test_k_zero_is_a_validation_error(self, capsys):
        assert run(["solve-offline", "--bank", E1_PATH, "--k", "0"]) == 2

    def test_unknown_flag(self):
        assert run(["solve-offline", "--bank", E1_PATH, "--k", "1",
                    "--bogus"]) == 2

    def test_missing_bank(self):
        assert run(["solve-offline", "--bank", "/nope.csv", "--k", "1"]) == 2


class TestEvaluate:
    def test_e1_mmr_plan_13(self, capsys):
        code = run(["evaluate", "--bank", E1_PATH, "--criterion", "mmr",
                    "--plan", "1:3", "--gamma", "0"])
        assert code == 0
        out = capsys.readouterr().out.strip()
        assert float(out) == pytest.approx(0.2, abs=1e-6)

    def test_matches_library_bit_for_bit(self, capsys, e1_bank):
        from prefelicit import evaluate_queries_mmr

        run(["evaluate", "--bank", E1_PATH, "--criterion", "mmr",
             "--plan", "1:3", "--gamma", "0", "--json"])
        payload = json.loads(capsys.readouterr().out)
        lib = evaluate_queries_mmr(QueryPlan.of((1, 3)), e1_bank,
                                   UncertaintyModel(
                                       PreferencePolyhedron.simplex(2)))
        assert payload["value"] == lib


class TestSimulateOffline:
    def test_runs_and_writes_csv(self, tmp_path, capsys):
        out = tmp_path / "rows.csv"
        code = run(["simulate-offline", "--bank", E1_PATH, "--k-values", "1",
                    "--rand-draws", "3", "--method", "ccg", "--seed", "7",
                    "--output", str(out)])
        assert code == 0
        header = out.read_text().splitlines()[0]
        assert header == ("method,criterion,K,sigma_true,sigma_assumed,"
                          "agent_seed,guarantee,normalized,true_rank,"
                          "true_regret,wall_ms")
        assert "ccg" in capsys.readouterr().out


class TestSimulateOnline:
    def test_small_run_json(self, capsys):
        code = run(["simulate-online", "--bank", E1_PATH, "--agents", "2",
                    "--k-max", "1", "--seed", "3",
                    "--methods", "lookahead", "--json"])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert len(payload["rows"]) == 2
        assert payload["final_sets_contain_truth"] in (True, None)

    def test_parallel_jobs_match_serial(self, capsys):
        def rows_for(jobs):
            code = run(["simulate-online", "--bank", E1_PATH, "--agents", "2",
                        "--k-max", "2", "--seed", "8", "--methods",
                        "lookahead", "--jobs", jobs, "--json"])
            assert code == 0
            payload = json.loads(capsys.readouterr().out)
            return [
                {k: v for k, v in row.items() if k != "wall_ms"}
                for row in payload["rows"]
            ]

        assert rows_for("1") == rows_for("2")
