from __future__ import annotations

import json
import random
from pathlib import Path
from typing import Any

import pytest

from agenttrace.trace_model import SpanRecord, parse_span

# Listing-style key template with zero/empty placeholder fill; optional enum
# fields are null so the parsed record keeps them absent.
LISTING_SKELETON: dict[str, Any] = {
    "trace_id": "0" * 32,
    "span_id": "0" * 16,
    "parent_span_id": None,
    "name": "",
    "agent_name": "",
    "start_time": 0,
    "end_time": 0,
    "duration_ns": 0,
    "kind": "INTERNAL",
    "status": {"status_code": "UNSET", "description": ""},
    "attributes": {
        "gen_ai.operation.name": None,
        "gen_ai.system": "",
        "gen_ai.agent.name": "",
        "gen_ai.agent.description": "",
        "gen_ai.request.model": "",
        "gen_ai.conversation.id": "",
        "gen_ai.tool.name": "",
        "gen_ai.tool.type": "",
        "gen_ai.tool.call.id": "",
        "gen_ai.tool.description": "",
        "gen_ai.usage.input_tokens": 0,
        "gen_ai.usage.output_tokens": 0,
        "gen_ai.usage.total_tokens": 0,
        "gen_ai.llm.call.count": 0,
        "gen_ai.mcp.call.count": 0,
        "gen_ai.response.finish_reasons": [],
        "mcp.server": "",
        "mcp.tool": "",
        "gcp.vertex.agent.llm_request": "",
        "gcp.vertex.agent.llm_response": "",
        "gcp.vertex.agent.tool_call_args": "",
        "gcp.vertex.agent.tool_response": "",
        "gcp.vertex.agent.invocation_id": "",
        "gcp.vertex.agent.session_id": "",
        "gcp.vertex.agent.event_id": "",
        "agent.log": "",
        "agent.retry.attempt_number": 0,
        "agent.retry.trigger": None,
        "agent.retry.previous_span_id": None,
        "agent.retry.reason": None,
        "run.outcome": None,
        "run.outcome_reason": None,
        "run.judgement": None,
        "run.judgement_reason": None,
        "agent.failure.category": None,
        "agent.failure.reason": None,
        "agent.output.useless": False,
        "agent.output.useless_reason": "",
        "communication.input_message_size_bytes": 0,
        "communication.output_message_size_bytes": 0,
        "communication.total_message_size_bytes": 0,
    },
    "communication": {
        "is_in_process_call": False,
        "input_message_size_bytes": 0,
        "output_message_size_bytes": 0,
        "total_message_size_bytes": 0,
    },
    "resource": {
        "attributes": {
            "service.name": "",
            "service.version": "",
            "deployment.environment": "local",
            "telemetry.sdk.name": "",
            "telemetry.sdk.language": "",
            "telemetry.sdk.version": "",
            "host.name": "",
        }
    },
}


def listing_skeleton() -> dict[str, Any]:
    return json.loads(json.dumps(LISTING_SKELETON))


def valid_span_dict(**overrides: Any) -> dict[str, Any]:
    """A minimal valid span object, overridable per test."""
    obj: dict[str, Any] = {
        "trace_id": "ab" * 16,
        "span_id": "cd" * 8,
        "parent_span_id": None,
        "name": "work",
        "agent_name": "agent_a",
        "start_time": 1_000,
        "end_time": 5_000,
        "duration_ns": 4_000,
        "kind": "INTERNAL",
        "status": {"status_code": "OK"},
        "attributes": {},
        "communication": {
            "is_in_process_call": True,
            "input_message_size_bytes": 0,
            "output_message_size_bytes": 0,
            "total_message_size_bytes": 0,
        },
        "resource": {"attributes": {"service.name": "test"}},
    }
    obj.update(overrides)
    return obj


def make_span(**overrides: Any) -> SpanRecord:
    return parse_span(0, valid_span_dict(**overrides))


_FUZZ_OPERATIONS = [None, "call_llm", "execute_tool", "invoke_agent"]
_FUZZ_KINDS = ["INTERNAL", "SERVER", "CLIENT", "PRODUCER", "CONSUMER"]
_FUZZ_STATUS = ["UNSET", "OK", "ERROR"]
_FUZZ_TRIGGERS = ["quality", "relevance_guard", "guard_fail", "timeout", "system", "upstream"]


def fuzz_hex(rng: random.Random, length: int) -> str:
    return "".join(rng.choice("0123456789abcdef") for _ in range(length))


def fuzz_span_dict(rng: random.Random) -> dict[str, Any]:
    """Random span object that satisfies every schema invariant."""
    start = rng.randrange(0, 10**15)
    duration = rng.randrange(0, 10**10)
    tokens_in = rng.randrange(0, 5000)
    tokens_out = rng.randrange(0, 5000)
    comm_in = rng.randrange(0, 10**6)
    comm_out = rng.randrange(0, 10**6)
    span_id = fuzz_hex(rng, 16)
    parent = None if rng.random() < 0.3 else fuzz_hex(rng, 16)
    if parent == span_id:
        parent = None
    agent = rng.choice(["planner", "executor", "grader", "orchestrator", ""])
    attributes: dict[str, Any] = {
        "communication.input_message_size_bytes": comm_in,
        "communication.output_message_size_bytes": comm_out,
        "communication.total_message_size_bytes": comm_in + comm_out,
    }
    op = rng.choice(_FUZZ_OPERATIONS)
    if op is not None:
        attributes["gen_ai.operation.name"] = op
    if rng.random() < 0.7:
        attributes["gen_ai.usage.input_tokens"] = tokens_in
        attributes["gen_ai.usage.output_tokens"] = tokens_out
        attributes["gen_ai.usage.total_tokens"] = tokens_in + tokens_out
    if rng.random() < 0.4:
        attributes["agent.retry.attempt_number"] = rng.randrange(0, 5)
        attributes["agent.retry.trigger"] = rng.choice(_FUZZ_TRIGGERS)
        attributes["agent.retry.previous_span_id"] = fuzz_hex(rng, 16)
    if rng.random() < 0.5:
        attributes["gen_ai.response.finish_reasons"] = rng.sample(["stop", "length", "tool"], rng.randrange(0, 3))
    if rng.random() < 0.5:
        attributes[f"vendor.custom.key_{rng.randrange(100)}"] = rng.choice(
            [rng.randrange(10**6), "free text", True, None, [1, 2, 3], {"nested": "object"}]
        )
    if agent and rng.random() < 0.5:
        attributes["gen_ai.agent.name"] = agent
    return {
        "trace_id": fuzz_hex(rng, 32),
        "span_id": span_id,
        "parent_span_id": parent,
        "name": rng.choice(["call", "invoke", "grade", ""]),
        "agent_name": agent,
        "start_time": start,
        "end_time": start + duration,
        "duration_ns": duration,
        "kind": rng.choice(_FUZZ_KINDS),
        "status": {"status_code": rng.choice(_FUZZ_STATUS), "description": None},
        "attributes": attributes,
        "communication": {
            "is_in_process_call": rng.random() < 0.5,
            "input_message_size_bytes": comm_in,
            "output_message_size_bytes": comm_out,
            "total_message_size_bytes": comm_in + comm_out,
        },
        "resource": {"attributes": {"service.name": "fuzz", "host.name": f"h{rng.randrange(10)}"}},
    }


def write_corpus_run(
    run_dir: Path,
    manifest: dict[str, Any],
    trace_json: Any,
    resources_csv: str | None = None,
) -> Path:
    """Write a hand-rolled run directory; returns the manifest path."""
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / manifest["trace_path"]).write_text(json.dumps(trace_json), encoding="utf-8")
    if resources_csv is not None:
        (run_dir / manifest["resource_samples_path"]).write_text(resources_csv, encoding="utf-8")
    manifest_path = run_dir / "run.manifest.json"
    manifest_path.write_text(json.dumps(manifest), encoding="utf-8")
    return manifest_path


def minimal_manifest(run_id: str, **overrides: Any) -> dict[str, Any]:
    data: dict[str, Any] = {
        "run_id": run_id,
        "example_name": "fixture",
        "framework": "test",
        "application_field": "test",
        "interaction_type": "coordination",
        "model_label": "model-x",
        "tools_enabled": False,
        "suite_tags": [],
        "wall_clock_limit_s": 600.0,
        "token_cap": 8192,
        "trace_path": "run.trace.json",
    }
    data.update(overrides)
    return data


@pytest.fixture
def rng() -> random.Random:
    return random.Random(0xA5A5)
