from __future__ import annotations

import json
import subprocess
import sys
from pathlib import Path


from agenttrace.cli import EXIT_DATA, EXIT_IO, EXIT_OK, EXIT_USAGE, main
from agenttrace.simgen import SimConfig, generate_corpus


def _corpus_bytes(root: Path, exclude: str = "meta.json") -> dict[str, bytes]:
    return {
        str(p.relative_to(root)): p.read_bytes()
        for p in sorted(root.rglob("*"))
        if p.is_file() and p.name != exclude
    }


class TestValidateCommand:
    def test_simgen_corpus_validates_clean(self, tmp_path: Path, capsys) -> None:
        generate_corpus(SimConfig(architecture="round_robin", n_runs=3, seed=1), tmp_path / "corpus")
        assert main(["validate", str(tmp_path / "corpus")]) == EXIT_OK

    def test_corrupted_duration_fails_with_violation(self, tmp_path: Path, capsys) -> None:
        generate_corpus(SimConfig(architecture="round_robin", n_runs=1, seed=1), tmp_path / "corpus")
        trace = next((tmp_path / "corpus").rglob("*.trace.json"))
        doc = json.loads(trace.read_text())
        doc[0]["duration_ns"] += 1
        trace.write_text(json.dumps(doc))
        assert main(["validate", str(trace)]) == EXIT_DATA
        out = capsys.readouterr().out
        assert "duration" in out

    def test_nonexistent_path_is_io_error(self, tmp_path: Path, capsys) -> None:
        assert main(["validate", str(tmp_path / "missing.trace.json")]) == EXIT_IO


class TestSimulateCommand:
    def test_twenty_manifests(self, tmp_path: Path, capsys) -> None:
        out = tmp_path / "corpus"
        assert main(["simulate", "--arch", "round-robin", "--runs", "20", "--seed", "7", "--out", str(out)]) == EXIT_OK
        assert len(list(out.rglob("run.manifest.json"))) == 20

    def test_zero_runs_is_usage_error(self, tmp_path: Path, capsys) -> None:
        assert main(["simulate", "--arch", "round-robin", "--runs", "0", "--seed", "1",
                     "--out", str(tmp_path / "x")]) == EXIT_USAGE

    def test_same_flags_twice_byte_identical(self, tmp_path: Path, capsys) -> None:
        args = ["simulate", "--arch", "corrective-rag", "--runs", "3", "--seed", "5", "--tools", "on"]
        assert main(args + ["--out", str(tmp_path / "a")]) == EXIT_OK
        assert main(args + ["--out", str(tmp_path / "b")]) == EXIT_OK
        assert _corpus_bytes(tmp_path / "a") == _corpus_bytes(tmp_path / "b")

    def test_unknown_arch_is_usage_or_data_error(self, tmp_path: Path, capsys) -> None:
        code = main(["simulate", "--arch", "moebius", "--runs", "1", "--out", str(tmp_path / "x")])
        assert code == EXIT_DATA


class TestAnalyzeCommand:
    def test_round_robin_similarity_all_ones(self, tmp_path: Path, capsys) -> None:
        corpus = tmp_path / "corpus"
        generate_corpus(SimConfig(architecture="round_robin", n_runs=5, seed=2), corpus)
        out = tmp_path / "out"
        assert main(["analyze", "--corpus", str(corpus), "--out", str(out)]) == EXIT_OK
        summary = json.loads((out / "summary.json").read_text())
        for metric in ("jaccard", "lcs"):
            values = summary["similarity"][metric]["values"]
            assert all(v == 1.0 for row in values for v in row)

    def test_empty_corpus_zero_groups_exit_zero(self, tmp_path: Path, capsys) -> None:
        corpus = tmp_path / "corpus"
        corpus.mkdir()
        out = tmp_path / "out"
        assert main(["analyze", "--corpus", str(corpus), "--out", str(out)]) == EXIT_OK
        summary = json.loads((out / "summary.json").read_text())
        assert summary["groups"] == []

    def test_every_report_family_has_artifacts(self, tmp_path: Path, capsys) -> None:
        corpus = tmp_path / "corpus"
        generate_corpus(SimConfig(architecture="corrective_rag", n_runs=3, seed=3, tools_enabled=True), corpus)
        out = tmp_path / "out"
        assert main(["analyze", "--corpus", str(corpus), "--out", str(out), "--group-by", "model_label"]) == EXIT_OK
        # One artifact minimum per post-processing family.
        assert list((out / "plotdata" / "token_series").glob("*.csv"))          # tokens, single-run
        assert (out / "plotdata" / "token_series_mean.csv").is_file()           # tokens, multi-run
        assert (out / "tables" / "latency_breakdown.csv").is_file()             # delay
        assert list((out / "plotdata" / "flame").glob("*.folded"))              # delay flame graph
        assert (out / "tables" / "resources.csv").is_file()                     # cpu/memory aggregates
        assert list((out / "plotdata" / "resource_series").glob("*.csv"))       # cpu/memory series
        assert (out / "tables" / "message_sizes.csv").is_file()                 # message sizes
        assert list((out / "callgraphs").glob("*.dot"))                         # call graph
        assert (out / "tables" / "similarity_jaccard.csv").is_file()            # similarity
        assert (out / "plots" / "heatmap_similarity_lcs.svg").is_file()
        assert (out / "plots" / "boxplot_cost.svg").is_file()

    def test_determinism_across_invocations(self, tmp_path: Path, capsys) -> None:
        corpus = tmp_path / "corpus"
        generate_corpus(SimConfig(architecture="plan_execute", n_runs=6, seed=4), corpus)
        for name in ("out1", "out2"):
            assert main(["analyze", "--corpus", str(corpus), "--out", str(tmp_path / name)]) == EXIT_OK
        assert _corpus_bytes(tmp_path / "out1") == _corpus_bytes(tmp_path / "out2")

    def test_same_out_and_corpus_rejected(self, tmp_path: Path, capsys) -> None:
        corpus = tmp_path / "corpus"
        corpus.mkdir()
        assert main(["analyze", "--corpus", str(corpus), "--out", str(corpus)]) == EXIT_DATA

    def test_prices_flag_fills_cost(self, tmp_path: Path, capsys) -> None:
        corpus = tmp_path / "corpus"
        generate_corpus(SimConfig(architecture="round_robin", n_runs=2, seed=2), corpus)
        prices = tmp_path / "prices.json"
        prices.write_text(json.dumps({"sim-model-a": {"input_per_1m": 0.15, "output_per_1m": 0.6}}))
        out = tmp_path / "out"
        assert main(["analyze", "--corpus", str(corpus), "--out", str(out), "--prices", str(prices)]) == EXIT_OK
        summary = json.loads((out / "summary.json").read_text())
        assert summary["groups"][0]["metrics"]["cost"]["mean"] > 0

    def test_bad_metric_is_usage_error(self, tmp_path: Path, capsys) -> None:
        assert main(["analyze", "--corpus", str(tmp_path), "--out", str(tmp_path / "o"),
                     "--metric", "cosine"]) == EXIT_USAGE

    def test_injected_composition_tracks_intended_rates(self, tmp_path: Path, capsys) -> None:
        # Quota-based injection keeps the 200-run composition within half a
        # percentage point of the configured rates.
        raw = {
            "missing_or_underspecified_output": 0.4761,
            "wrong_fact_or_entity": 0.2766,
            "empty_prediction": 0.1596,
            "exception": 0.0638,
            "timeout": 0.0186,
            "other": 0.0054,
        }
        total = sum(raw.values())
        injection = {k: v / total for k, v in raw.items()}
        corpus = tmp_path / "corpus"
        generate_corpus(
            SimConfig(
                architecture="corrective_rag", n_runs=200, seed=77,
                wall_clock_limit_s=30.0, failure_injection=injection,
            ),
            corpus,
        )
        out = tmp_path / "out"
        assert main(["analyze", "--corpus", str(corpus), "--out", str(out)]) == EXIT_OK
        summary = json.loads((out / "summary.json").read_text())
        assert summary["failures"]["n_failures"] == 200
        for category, p in injection.items():
            assert abs(summary["failures"]["composition"][category] - 100.0 * p) <= 0.5


class TestCompareCommand:
    def _paired_corpus(self, tmp_path: Path) -> Path:
        corpus = tmp_path / "corpus"
        for tools in (True, False):
            generate_corpus(
                SimConfig(architecture="corrective_rag", n_runs=4, seed=9, tools_enabled=tools),
                corpus,
            )
        return corpus

    def test_paired_tool_delta_rows(self, tmp_path: Path, capsys) -> None:
        corpus = self._paired_corpus(tmp_path)
        out = tmp_path / "cmp"
        assert main([
            "compare", "--corpus", str(corpus),
            "--filter-on", "tools_enabled=true", "--filter-off", "tools_enabled=false",
            "--metric-name", "latency", "--paired", "on", "--out", str(out),
        ]) == EXIT_OK
        doc = json.loads((out / "deltas.json").read_text())
        assert len(doc["deltas"]) == 4
        assert (out / "deltas.csv").read_text().count("\n") == 5  # header + 4 rows

    def test_identical_filters_all_zero(self, tmp_path: Path, capsys) -> None:
        corpus = self._paired_corpus(tmp_path)
        out = tmp_path / "cmp"
        assert main([
            "compare", "--corpus", str(corpus),
            "--filter-on", "tools_enabled=true", "--filter-off", "tools_enabled=true",
            "--metric-name", "latency", "--paired", "on", "--out", str(out),
        ]) == EXIT_OK
        doc = json.loads((out / "deltas.json").read_text())
        assert all(d["delta"] == 0.0 for d in doc["deltas"])

    def test_disjoint_task_ids_paired_is_no_pairs(self, tmp_path: Path, capsys) -> None:
        corpus = tmp_path / "corpus"
        generate_corpus(SimConfig(architecture="round_robin", n_runs=2, seed=1), corpus / "a")
        (corpus / "b").mkdir(parents=True)
        # Second group with shifted task ids.
        generate_corpus(SimConfig(architecture="round_robin", n_runs=2, seed=2, model_label="other"), corpus / "b")
        for manifest in (corpus / "b").rglob("run.manifest.json"):
            data = json.loads(manifest.read_text())
            data["task_id"] = data["task_id"] + "-shifted"
            manifest.write_text(json.dumps(data))
        code = main([
            "compare", "--corpus", str(corpus),
            "--filter-on", "model_label=sim-model-a", "--filter-off", "model_label=other",
            "--metric-name", "latency", "--paired", "on",
        ])
        assert code == EXIT_DATA

    def test_filter_matching_nothing_is_data_error(self, tmp_path: Path, capsys) -> None:
        corpus = self._paired_corpus(tmp_path)
        assert main([
            "compare", "--corpus", str(corpus),
            "--filter-on", "model_label=unobtainium", "--filter-off", "tools_enabled=false",
        ]) == EXIT_DATA


class TestEntryPoint:
    def test_module_invocation(self, tmp_path: Path) -> None:
        result = subprocess.run(
            [sys.executable, "-m", "agenttrace.cli", "simulate", "--arch", "round-robin",
             "--runs", "1", "--seed", "0", "--out", str(tmp_path / "c")],
            capture_output=True, text=True,
        )
        assert result.returncode == 0
        assert "wrote 1 runs" in result.stdout

    def test_missing_subcommand_is_usage_error(self, capsys) -> None:
        assert main([]) == EXIT_USAGE
