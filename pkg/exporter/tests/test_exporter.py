from __future__ import annotations

import json
from pathlib import Path

import pytest

from agenttrace_exporter import (
    PERIODIC,
    CapturedSpan,
    ExporterConfig,
    SpanRecorder,
    TraceExporter,
    write_manifest,
)

from .conftest import FakeClock


def _span(**overrides) -> CapturedSpan:
    base = dict(
        trace_id="ab" * 16,
        span_id="cd" * 8,
        start_time_ns=1_000,
        end_time_ns=2_000,
        name="step",
        agent_name="worker",
    )
    base.update(overrides)
    return CapturedSpan(**base)


class TestExportSpans:
    def test_empty_batch_flush_is_empty_array(self, tmp_path: Path) -> None:
        exporter = TraceExporter(ExporterConfig(output_dir=tmp_path))
        exporter.export_spans([])
        path = exporter.flush()
        assert path.read_text().strip() == "[]"

    def test_candidate_tokens_alias_populates_canonical_output(self, tmp_path: Path) -> None:
        exporter = TraceExporter(ExporterConfig(output_dir=tmp_path))
        exporter.export_spans([
            _span(provider="gemini", attributes={"candidates_token_count": 12, "prompt_token_count": 4})
        ])
        doc = json.loads(exporter.flush().read_text())
        attrs = doc[0]["attributes"]
        assert attrs["gen_ai.usage.output_tokens"] == 12
        assert attrs["gen_ai.usage.input_tokens"] == 4
        assert attrs["gen_ai.usage.total_tokens"] == 16
        # Alias keys stay visible for downstream coverage analysis.
        assert attrs["candidates_token_count"] == 12

    def test_canonical_usage_not_overwritten_by_aliases(self, tmp_path: Path) -> None:
        exporter = TraceExporter(ExporterConfig(output_dir=tmp_path))
        exporter.export_spans([
            _span(
                provider="gemini",
                attributes={
                    "gen_ai.usage.input_tokens": 1,
                    "gen_ai.usage.output_tokens": 2,
                    "gen_ai.usage.total_tokens": 3,
                    "candidates_token_count": 999,
                },
            )
        ])
        attrs = json.loads(exporter.flush().read_text())[0]["attributes"]
        assert attrs["gen_ai.usage.output_tokens"] == 2
        assert attrs["gen_ai.usage.total_tokens"] == 3

    def test_custom_backend_hint_extends_defaults(self, tmp_path: Path) -> None:
        config = ExporterConfig(
            output_dir=tmp_path,
            backend_hints={"house-llm": {"spent_tokens": "output"}},
        )
        exporter = TraceExporter(config)
        exporter.export_spans([_span(provider="house-llm", attributes={"spent_tokens": 7})])
        attrs = json.loads(exporter.flush().read_text())[0]["attributes"]
        assert attrs["gen_ai.usage.output_tokens"] == 7

    def test_oversized_payload_truncated_and_logged(self, tmp_path: Path) -> None:
        config = ExporterConfig(output_dir=tmp_path, max_payload_bytes=16)
        exporter = TraceExporter(config)
        exporter.export_spans([
            _span(attributes={"gcp.vertex.agent.llm_response": "x" * 100})
        ])
        attrs = json.loads(exporter.flush().read_text())[0]["attributes"]
        assert len(attrs["gcp.vertex.agent.llm_response"].encode()) == 16
        assert "truncated gcp.vertex.agent.llm_response" in attrs["agent.log"]

    def test_on_end_policy_flushes_at_root_end(self, tmp_path: Path) -> None:
        exporter = TraceExporter(ExporterConfig(output_dir=tmp_path))
        exporter.export_spans([_span(span_id="ef" * 8, parent_span_id="cd" * 8)])
        assert not exporter.trace_path.exists()
        exporter.export_spans([_span()])  # root (no parent) ends the run
        assert exporter.trace_path.exists()
        assert len(json.loads(exporter.trace_path.read_text())) == 2

    def test_periodic_policy_flushes_on_interval(self, tmp_path: Path) -> None:
        clock = FakeClock(step_ns=600_000_000)  # 0.6 s per tick
        config = ExporterConfig(output_dir=tmp_path, flush_policy=PERIODIC, periodic_interval_ms=1000)
        exporter = TraceExporter(config, clock=clock)
        exporter.export_spans([_span(span_id="ef" * 8, parent_span_id="cd" * 8)])
        exporter.export_spans([_span(span_id="0f" * 8, parent_span_id="cd" * 8)])
        assert exporter.trace_path.exists()
        doc = json.loads(exporter.trace_path.read_text())
        assert isinstance(doc, list)

    def test_ids_lowercased(self, tmp_path: Path) -> None:
        exporter = TraceExporter(ExporterConfig(output_dir=tmp_path))
        exporter.export_spans([_span(trace_id="AB" * 16, span_id="CD" * 8)])
        doc = json.loads(exporter.flush().read_text())
        assert doc[0]["trace_id"] == "ab" * 16
        assert doc[0]["span_id"] == "cd" * 8

    def test_bad_flush_policy_rejected(self, tmp_path: Path) -> None:
        with pytest.raises(ValueError):
            ExporterConfig(output_dir=tmp_path, flush_policy="whenever")


class TestWriteManifest:
    def test_missing_model_label_defaults_to_unknown(self, tmp_path: Path) -> None:
        path = write_manifest(tmp_path, run_id="r0")
        data = json.loads(path.read_text())
        assert data["model_label"] == "unknown"
        assert data["trace_path"] == "run.trace.json"

    def test_tools_flag_reflected_verbatim(self, tmp_path: Path) -> None:
        path = write_manifest(tmp_path, run_id="r0", tools_enabled=True)
        assert json.loads(path.read_text())["tools_enabled"] is True


class TestRecorder:
    def test_exception_marks_span_error(self, tmp_path: Path) -> None:
        clock = FakeClock()
        exporter = TraceExporter(ExporterConfig(output_dir=tmp_path), clock=clock)
        rec = SpanRecorder(exporter, clock=clock, seed=1)
        with pytest.raises(RuntimeError):
            with rec.span("root", agent="a"):
                raise RuntimeError("kaput")
        doc = json.loads(exporter.trace_path.read_text())
        assert doc[0]["status"]["status_code"] == "ERROR"
        assert "kaput" in doc[0]["status"]["description"]

    def test_nesting_sets_parents(self, tmp_path: Path) -> None:
        clock = FakeClock()
        exporter = TraceExporter(ExporterConfig(output_dir=tmp_path), clock=clock)
        rec = SpanRecorder(exporter, clock=clock, seed=2)
        with rec.span("root", agent="a"):
            with rec.span("inner", agent="b", operation="invoke_agent"):
                pass
        doc = json.loads(exporter.trace_path.read_text())
        by_name = {d["name"]: d for d in doc}
        assert by_name["root"]["parent_span_id"] is None
        assert by_name["inner"]["parent_span_id"] == by_name["root"]["span_id"]
        assert by_name["inner"]["end_time"] <= by_name["root"]["end_time"]
