from __future__ import annotations

import itertools
from pathlib import Path

import pytest

from agenttrace_exporter import ExporterConfig, SpanRecorder, TraceExporter, write_manifest


class FakeClock:
    """Monotonic fake nanosecond clock: +5 ms per call."""

    def __init__(self, start_ns: int = 1_700_000_000_000_000_000, step_ns: int = 5_000_000) -> None:
        self._ticks = itertools.count(start_ns, step_ns)

    def __call__(self) -> int:
        return next(self._ticks)


def run_two_agent_workload(out_dir: Path, *, gold: str = "blue whale") -> Path:
    """Scripted toy workload: researcher and writer handing off to each other.

    Produces the run directory (trace + manifest) and returns the manifest
    path. Call-graph edges: researcher->writer and writer->researcher.
    """
    clock = FakeClock()
    exporter = TraceExporter(ExporterConfig(output_dir=out_dir, service_name="toy-duo"), clock=clock)
    rec = SpanRecorder(exporter, clock=clock, seed=99)

    with rec.span(
        "answer question", agent="researcher", kind="SERVER",
        attributes={
            "run.outcome": "success",
            "run.judgement": "correct",
            "gcp.vertex.agent.llm_response": f"The largest animal is the {gold}.",
        },
    ):
        with rec.span("research", agent="researcher", operation="call_llm",
                      provider="gemini",
                      attributes={"gen_ai.request.model": "gemini-sim",
                                  "prompt_token_count": 40,
                                  "candidates_token_count": 22},
                      input_bytes=180, output_bytes=96):
            pass
        with rec.span("draft answer", agent="writer", operation="invoke_agent",
                      input_bytes=256, output_bytes=512):
            with rec.span("write", agent="writer", operation="call_llm",
                          provider="gemini",
                          attributes={"gen_ai.request.model": "gemini-sim",
                                      "prompt_token_count": 55,
                                      "candidates_token_count": 31},
                          input_bytes=240, output_bytes=130):
                pass
            with rec.span("fact check", agent="researcher", operation="invoke_agent",
                          input_bytes=64, output_bytes=32):
                with rec.span("lookup", agent="researcher", operation="execute_tool",
                              attributes={"gen_ai.tool.name": "encyclopedia"},
                              input_bytes=48, output_bytes=400):
                    pass

    return write_manifest(
        out_dir,
        run_id="toy-duo-000",
        example_name="toy_duo",
        framework="handrolled",
        interaction_type="correction",
        model_label="gemini-sim",
        gold_answer=gold,
        task_id="task-000",
    )


@pytest.fixture
def two_agent_run(tmp_path: Path) -> Path:
    return run_two_agent_workload(tmp_path / "run0")
