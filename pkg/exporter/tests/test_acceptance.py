"""Exporter conformance: emitted files must interoperate with the analytics
toolkit through its external interfaces (CLI validation, corpus file layout)."""

from __future__ import annotations

import subprocess
import sys
import time
from pathlib import Path

from agenttrace import build_call_graph, load_run
from agenttrace.callgraph import AgentNode


def test_exporter_conformance_two_agent_workload(two_agent_run: Path) -> None:
    start = time.perf_counter()

    result = subprocess.run(
        [sys.executable, "-m", "agenttrace.cli", "validate", str(two_agent_run.parent)],
        capture_output=True,
        text=True,
    )
    assert result.returncode == 0, result.stdout + result.stderr

    run = load_run(two_agent_run)
    assert run.warnings == ()
    assert run.outcome == "success"

    graph = build_call_graph(run)
    researcher, writer = AgentNode("researcher"), AgentNode("writer")
    assert graph.edge_set() == {(researcher, writer), (writer, researcher)}

    elapsed = time.perf_counter() - start
    print(f"ACCEPTANCE PASS: exporter conformance (validate exit 0, 2-edge graph) ({elapsed:.2f}s / budget 10s)")
    assert elapsed < 10.0


def test_exported_usage_is_canonical_for_coverage(two_agent_run: Path) -> None:
    from agenttrace import usage_coverage

    run = load_run(two_agent_run)
    assert usage_coverage(run) == 1.0


def test_exported_file_round_trips_through_primary_serializer(two_agent_run: Path) -> None:
    from agenttrace import parse_trace_file, serialize_trace

    raw = (two_agent_run.parent / "run.trace.json").read_bytes()
    spans = parse_trace_file(raw)
    assert parse_trace_file(serialize_trace(spans)) == spans
