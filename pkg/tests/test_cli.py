"""Command-line flows: tiny end-to-end runs and exit-code contracts."""

import json
import shutil

import pytest

from sheetsynth.cli import main
from sheetsynth.benchmarks import PACKAGED_DIR
from sheetsynth.reporting import read_results_csv


def write_task(path, name, inputs, output):
    path.write_text(json.dumps({"name": name, "inputs": inputs, "output": output}))
    return str(path)


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """One tiny dataset + trained model + premise model, shared by the tests."""
    root = tmp_path_factory.mktemp("cliws")
    assert main(["gen-data", "--out", str(root / "data.jsonl"),
                 "--searches", "6", "--budget", "8000", "--seed", "3"]) == 0
    assert main(["train", "--data", str(root / "data.jsonl"),
                 "--out", str(root / "guidance.json"),
                 "--epochs", "4", "--seed", "1"]) == 0
    assert main(["gen-data", "--out", str(root / "premise.jsonl"),
                 "--kind", "premise", "--searches", "6", "--budget", "8000",
                 "--seed", "3"]) == 0
    assert main(["train", "--data", str(root / "premise.jsonl"),
                 "--out", str(root / "premise.json"), "--kind", "premise",
                 "--epochs", "4", "--seed", "1"]) == 0
    return root


class TestGenData:
    def test_deterministic_file(self, tmp_path):
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        args = ["gen-data", "--searches", "3", "--budget", "4000", "--seed", "9"]
        assert main(args + ["--out", str(a)]) == 0
        assert main(args + ["--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_premise_records_lack_value_signature(self, workspace):
        line = (workspace / "premise.jsonl").read_text().splitlines()[1]
        record = json.loads(line)
        assert "svo" not in record and isinstance(record["label"], list)

    def test_bad_searches_value(self, tmp_path):
        assert main(["gen-data", "--out", str(tmp_path / "x.jsonl"),
                     "--searches", "0"]) == 1


class TestTrain:
    def test_weight_file_loads(self, workspace):
        from sheetsynth.model import load_params
        params = load_params(workspace / "guidance.json")
        assert params.kind == "guidance"

    def test_zero_epochs_is_usage_error(self, workspace, tmp_path):
        assert main(["train", "--data", str(workspace / "data.jsonl"),
                     "--out", str(tmp_path / "w.json"), "--epochs", "0"]) == 1

    def test_kind_mismatch_rejected(self, workspace, tmp_path):
        assert main(["train", "--data", str(workspace / "premise.jsonl"),
                     "--out", str(tmp_path / "w.json"), "--kind", "guidance"]) == 1

    def test_seeded_rerun_identical_metrics(self, workspace, tmp_path, capsys):
        for out in ("r1.json", "r2.json"):
            assert main(["train", "--data", str(workspace / "data.jsonl"),
                         "--out", str(tmp_path / out),
                         "--epochs", "2", "--seed", "7"]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        half = len(lines) // 2
        assert lines[:half] == lines[half:]


class TestSynthesize:
    def test_solved_exit_zero(self, tmp_path, capsys):
        task = write_task(tmp_path / "t.json", "id", [["a", "b"]], ["a", "b"])
        assert main(["synthesize", "--task", task]) == 0
        out = capsys.readouterr().out
        assert out.splitlines()[0] == "var_0"
        assert "expressions: 0" in out

    def test_unsolved_exit_two(self, tmp_path):
        task = write_task(tmp_path / "t.json", "hard", [["a", "b"]], ["@1", "#2"])
        assert main(["synthesize", "--task", task, "--max-expressions", "2000"]) == 2

    def test_model_guidance_flow(self, workspace, tmp_path, capsys):
        task = write_task(tmp_path / "t.json", "slash",
                          [["2020-01-02", "1999-12-31"]], ["2020/01/02", "1999/12/31"])
        assert main(["synthesize", "--task", task, "--guidance", "model",
                     "--model", str(workspace / "guidance.json")]) == 0
        assert 'SUBSTITUTE(var_0, "-", "/")' in capsys.readouterr().out

    def test_missing_model_is_usage_error(self, tmp_path):
        task = write_task(tmp_path / "t.json", "id", [["a"], ], ["a"])
        assert main(["synthesize", "--task", task, "--guidance", "model"]) == 1

    def test_premise_filter_composes(self, workspace, tmp_path):
        task = write_task(tmp_path / "t.json", "slash",
                          [["2020-01-02", "1999-12-31"]], ["2020/01/02", "1999/12/31"])
        assert main(["synthesize", "--task", task,
                     "--premise", str(workspace / "premise.json"),
                     "--premise-k", "2"]) in (0, 2)

    def test_usage_error_exit_one(self):
        assert main(["synthesize"]) == 1
        assert main(["no-such-command"]) == 1


@pytest.fixture(scope="module")
def mini_suite(tmp_path_factory):
    """Four shipped cases, enough for a fast bench."""
    root = tmp_path_factory.mktemp("minisuite")
    for name in ("string_length", "date_dashes_to_slashes",
                 "trim_and_lowercase", "word_or_number"):
        shutil.copy(PACKAGED_DIR / f"{name}.json", root / f"{name}.json")
    return root


class TestBench:
    def test_bench_outputs(self, workspace, mini_suite, tmp_path):
        out = tmp_path / "report"
        assert main(["bench", "--benchmarks", str(mini_suite),
                     "--out-dir", str(out), "--modes", "none,model,heuristic",
                     "--model", str(workspace / "guidance.json"),
                     "--max-expressions", "30000"]) == 0
        rows = read_results_csv(out / "results.csv")
        assert len(rows) == 12  # 4 cases x 3 modes
        assert (out / "solved_vs_expressions.svg").exists()
        assert (out / "solved_vs_seconds.svg").exists()
        assert (out / "histogram.csv").exists()
        solved = [r for r in rows if r.solved]
        assert {r.name for r in solved} >= {"string_length", "date_dashes_to_slashes"}
        manifest = json.loads((out / "run.json").read_text())
        assert manifest["modes"] == ["none", "model", "heuristic"]
        assert manifest["max_expressions"] == 30000
        assert manifest["totals"]["none"]["cases"] == 4

    def test_parallel_matches_serial(self, workspace, mini_suite, tmp_path):
        serial, parallel = tmp_path / "serial", tmp_path / "parallel"
        base = ["bench", "--benchmarks", str(mini_suite), "--modes", "none",
                "--max-expressions", "20000"]
        assert main(base + ["--out-dir", str(serial)]) == 0
        assert main(base + ["--out-dir", str(parallel), "--parallel", "3"]) == 0
        a = read_results_csv(serial / "results.csv")
        b = read_results_csv(parallel / "results.csv")

        def strip(rows):  # everything except wall-clock seconds
            return [(r.name, r.mode, r.solved, r.expressions,
                     r.solve_weight, r.formula) for r in rows]

        assert strip(a) == strip(b)

    def test_unknown_mode_rejected(self, mini_suite, tmp_path):
        assert main(["bench", "--benchmarks", str(mini_suite),
                     "--out-dir", str(tmp_path / "x"), "--modes", "fancy"]) == 1

    def test_premise_mode_needs_weights(self, mini_suite, tmp_path):
        assert main(["bench", "--benchmarks", str(mini_suite),
                     "--out-dir", str(tmp_path / "x"), "--modes", "premise"]) == 1

    def test_premise_mode_runs(self, workspace, mini_suite, tmp_path):
        out = tmp_path / "prem"
        assert main(["bench", "--benchmarks", str(mini_suite),
                     "--out-dir", str(out), "--modes", "premise",
                     "--premise", str(workspace / "premise.json"),
                     "--max-expressions", "20000"]) == 0
        rows = read_results_csv(out / "results.csv")
        assert all(r.mode == "premise" for r in rows)


class TestReport:
    def test_regeneration_is_byte_identical(self, workspace, mini_suite, tmp_path):
        bench_dir = tmp_path / "bench"
        assert main(["bench", "--benchmarks", str(mini_suite),
                     "--out-dir", str(bench_dir), "--modes", "none",
                     "--max-expressions", "20000"]) == 0
        report_dir = tmp_path / "report"
        assert main(["report", "--results", str(bench_dir / "results.csv"),
                     "--out-dir", str(report_dir)]) == 0
        # same rows, same drawing, except the budget line that bench knows about
        a = (bench_dir / "solved_vs_seconds.svg").read_bytes()
        b = (report_dir / "solved_vs_seconds.svg").read_bytes()
        assert a == b
        again = tmp_path / "again"
        assert main(["report", "--results", str(bench_dir / "results.csv"),
                     "--out-dir", str(again)]) == 0
        assert (again / "solved_vs_seconds.svg").read_bytes() == b

    def test_missing_results_errors(self, tmp_path):
        assert main(["report", "--results", str(tmp_path / "no.csv"),
                     "--out-dir", str(tmp_path)]) == 1


class TestEnvSeed:
    def test_env_overrides_default(self, tmp_path, monkeypatch):
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        monkeypatch.setenv("BUSTLE_SEED", "77")
        assert main(["gen-data", "--out", str(a), "--searches", "2",
                     "--budget", "3000"]) == 0
        monkeypatch.delenv("BUSTLE_SEED")
        assert main(["gen-data", "--out", str(b), "--searches", "2",
                     "--budget", "3000", "--seed", "77"]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_explicit_seed_wins(self, tmp_path, monkeypatch):
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        monkeypatch.setenv("BUSTLE_SEED", "99")
        assert main(["gen-data", "--out", str(a), "--searches", "2",
                     "--budget", "3000", "--seed", "5"]) == 0
        monkeypatch.delenv("BUSTLE_SEED")
        assert main(["gen-data", "--out", str(b), "--searches", "2",
                     "--budget", "3000", "--seed", "5"]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_invalid_env_seed(self, tmp_path, monkeypatch):
        monkeypatch.setenv("BUSTLE_SEED", "abc")
        assert main(["gen-data", "--out", str(tmp_path / "x.jsonl"),
                     "--searches", "2", "--budget", "3000"]) == 1
