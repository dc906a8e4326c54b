"""Span exporter: framework span batches -> agenttrace trace files + manifests.

This package deliberately does not import the analytics toolkit; it speaks
its external interfaces only (the run.manifest.json / *.trace.json layout and
the canonical telemetry key set), so it can ship inside instrumented
workloads without pulling analysis code along.

Files are finalized as valid JSON arrays on every flush: content is written
to a temp file and atomically renamed, so readers never observe a partial
document. One exporter instance serves one run; instances are not shareable
across threads.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping

TRACE_FILENAME = "run.trace.json"
MANIFEST_FILENAME = "run.manifest.json"

# Canonical attribute keys in file order (the open telemetry key set the
# analytics side parses; unknown keys are preserved by both sides).
CANONICAL_ATTR_KEYS: tuple[str, ...] = (
    "gen_ai.operation.name",
    "gen_ai.system",
    "gen_ai.agent.name",
    "gen_ai.agent.description",
    "gen_ai.request.model",
    "gen_ai.conversation.id",
    "gen_ai.tool.name",
    "gen_ai.tool.type",
    "gen_ai.tool.call.id",
    "gen_ai.tool.description",
    "gen_ai.usage.input_tokens",
    "gen_ai.usage.output_tokens",
    "gen_ai.usage.total_tokens",
    "gen_ai.llm.call.count",
    "gen_ai.mcp.call.count",
    "gen_ai.response.finish_reasons",
    "mcp.server",
    "mcp.tool",
    "gcp.vertex.agent.llm_request",
    "gcp.vertex.agent.llm_response",
    "gcp.vertex.agent.tool_call_args",
    "gcp.vertex.agent.tool_response",
    "gcp.vertex.agent.invocation_id",
    "gcp.vertex.agent.session_id",
    "gcp.vertex.agent.event_id",
    "agent.log",
    "agent.retry.attempt_number",
    "agent.retry.trigger",
    "agent.retry.previous_span_id",
    "agent.retry.reason",
    "run.outcome",
    "run.outcome_reason",
    "run.judgement",
    "run.judgement_reason",
    "agent.failure.category",
    "agent.failure.reason",
    "agent.output.useless",
    "agent.output.useless_reason",
    "communication.input_message_size_bytes",
    "communication.output_message_size_bytes",
    "communication.total_message_size_bytes",
)

_PAYLOAD_KEYS = (
    "gcp.vertex.agent.llm_request",
    "gcp.vertex.agent.llm_response",
    "gcp.vertex.agent.tool_call_args",
    "gcp.vertex.agent.tool_response",
)

# Built-in usage alias maps; backend_hints in the config extend/override these.
DEFAULT_BACKEND_HINTS: dict[str, dict[str, str]] = {
    "gemini": {
        "prompt_token_count": "input",
        "candidates_token_count": "output",
        "total_token_count": "total",
    },
    "vertex": {
        "prompt_token_count": "input",
        "candidates_token_count": "output",
        "total_token_count": "total",
    },
    "openai": {
        "prompt_tokens": "input",
        "completion_tokens": "output",
        "total_tokens": "total",
    },
    "anthropic": {"input_tokens": "input", "output_tokens": "output"},
}

_USAGE_KEYS = {
    "input": "gen_ai.usage.input_tokens",
    "output": "gen_ai.usage.output_tokens",
    "total": "gen_ai.usage.total_tokens",
}

ON_END = "on_end"
PERIODIC = "periodic"


class UnwritableOutput(Exception):
    """The exporter cannot create or replace its output files."""


@dataclass(frozen=True)
class ExporterConfig:
    output_dir: Path | str
    service_name: str = "agent-app"
    flush_policy: str = ON_END
    periodic_interval_ms: int = 1000
    backend_hints: Mapping[str, Mapping[str, str]] = field(default_factory=dict)
    max_payload_bytes: int = 65536
    environment: str = "local"

    def __post_init__(self) -> None:
        if self.flush_policy not in (ON_END, PERIODIC):
            raise ValueError(f"unknown flush policy {self.flush_policy!r}")
        if self.periodic_interval_ms <= 0:
            raise ValueError("periodic_interval_ms must be > 0")


@dataclass(frozen=True)
class CapturedSpan:
    """One framework span, already carrying ids and nanosecond timestamps."""

    trace_id: str
    span_id: str
    start_time_ns: int
    end_time_ns: int
    name: str = ""
    agent_name: str = ""
    parent_span_id: str | None = None
    kind: str = "INTERNAL"
    status_code: str = "UNSET"
    status_description: str | None = None
    provider: str | None = None
    attributes: Mapping[str, Any] = field(default_factory=dict)
    in_process: bool = True
    input_bytes: int = 0
    output_bytes: int = 0


def _coerce_span(raw: CapturedSpan | Mapping[str, Any]) -> CapturedSpan:
    if isinstance(raw, CapturedSpan):
        return raw
    return CapturedSpan(**dict(raw))


class TraceExporter:
    """Buffers spans for one run and writes the trace file per flush policy."""

    def __init__(self, config: ExporterConfig, clock: Callable[[], int] = time.time_ns) -> None:
        self.config = config
        self._clock = clock
        self._spans: list[dict[str, Any]] = []
        self._last_flush_ns = clock()
        self._hints: dict[str, dict[str, str]] = {
            provider: dict(aliases) for provider, aliases in DEFAULT_BACKEND_HINTS.items()
        }
        for provider, aliases in config.backend_hints.items():
            self._hints.setdefault(provider.lower(), {}).update(aliases)

    @property
    def trace_path(self) -> Path:
        return Path(self.config.output_dir) / TRACE_FILENAME

    def export_spans(self, batch: Iterable[CapturedSpan | Mapping[str, Any]]) -> int:
        """Map a span batch onto the canonical key set and buffer it.

        Returns the number of spans appended. Flushes afterwards when the
        policy asks for it (a finished root span under on_end, or an elapsed
        interval under periodic).
        """
        appended = 0
        saw_root_end = False
        for raw in batch:
            span = _coerce_span(raw)
            self._spans.append(self._to_record(span))
            appended += 1
            if span.parent_span_id is None:
                saw_root_end = True
        if self.config.flush_policy == ON_END and saw_root_end:
            self.flush()
        elif self.config.flush_policy == PERIODIC:
            now = self._clock()
            if now - self._last_flush_ns >= self.config.periodic_interval_ms * 1_000_000:
                self.flush()
        return appended

    def flush(self) -> Path:
        """Write the buffered spans as a complete JSON array, atomically."""
        path = self.trace_path
        tmp = path.with_name(path.name + ".tmp")
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            payload = json.dumps(self._spans, indent=2, ensure_ascii=False) + "\n"
            tmp.write_text(payload, encoding="utf-8")
            os.replace(tmp, path)
        except OSError as exc:
            raise UnwritableOutput(f"cannot write trace file {path}: {exc}") from exc
        self._last_flush_ns = self._clock()
        return path

    def _to_record(self, span: CapturedSpan) -> dict[str, Any]:
        attrs = self._normalize_attributes(span)
        comm_total = span.input_bytes + span.output_bytes
        attrs.setdefault("communication.input_message_size_bytes", span.input_bytes)
        attrs.setdefault("communication.output_message_size_bytes", span.output_bytes)
        attrs.setdefault("communication.total_message_size_bytes", comm_total)
        ordered: dict[str, Any] = {key: attrs.pop(key, None) for key in CANONICAL_ATTR_KEYS}
        if ordered["gen_ai.response.finish_reasons"] is None:
            ordered["gen_ai.response.finish_reasons"] = []
        if ordered["gen_ai.agent.name"] is None and span.agent_name:
            ordered["gen_ai.agent.name"] = span.agent_name
        ordered.update(attrs)  # unknown keys preserved verbatim
        return {
            "trace_id": span.trace_id.lower(),
            "span_id": span.span_id.lower(),
            "parent_span_id": span.parent_span_id.lower() if span.parent_span_id else None,
            "name": span.name,
            "agent_name": span.agent_name,
            "start_time": span.start_time_ns,
            "end_time": span.end_time_ns,
            "duration_ns": span.end_time_ns - span.start_time_ns,
            "kind": span.kind,
            "status": {"status_code": span.status_code, "description": span.status_description},
            "attributes": ordered,
            "communication": {
                "is_in_process_call": span.in_process,
                "input_message_size_bytes": span.input_bytes,
                "output_message_size_bytes": span.output_bytes,
                "total_message_size_bytes": comm_total,
            },
            "resource": {
                "attributes": {
                    "service.name": self.config.service_name,
                    "service.version": "0.1.0",
                    "deployment.environment": self.config.environment,
                    "telemetry.sdk.name": "agenttrace-exporter",
                    "telemetry.sdk.language": "python",
                    "telemetry.sdk.version": "0.1.0",
                }
            },
        }

    def _normalize_attributes(self, span: CapturedSpan) -> dict[str, Any]:
        attrs = dict(span.attributes)
        provider = (span.provider or attrs.get("gen_ai.system") or "").lower()
        aliases = self._hints.get(provider, {})
        for alias_key, slot in aliases.items():
            value = attrs.get(alias_key)
            if value is None or isinstance(value, bool) or not isinstance(value, int):
                continue
            attrs.setdefault(_USAGE_KEYS[slot], value)
        in_key, out_key, total_key = (
            _USAGE_KEYS["input"], _USAGE_KEYS["output"], _USAGE_KEYS["total"],
        )
        if in_key in attrs and out_key in attrs:
            attrs.setdefault(total_key, attrs[in_key] + attrs[out_key])
        if span.provider and "gen_ai.system" not in attrs:
            attrs["gen_ai.system"] = span.provider
        self._truncate_payloads(attrs)
        return attrs

    def _truncate_payloads(self, attrs: dict[str, Any]) -> None:
        limit = self.config.max_payload_bytes
        notes: list[str] = []
        for key in _PAYLOAD_KEYS:
            value = attrs.get(key)
            if not isinstance(value, str):
                continue
            encoded = value.encode("utf-8")
            if len(encoded) <= limit:
                continue
            attrs[key] = encoded[:limit].decode("utf-8", errors="ignore")
            notes.append(f"truncated {key} from {len(encoded)} to {limit} bytes")
        if notes:
            log = attrs.get("agent.log")
            attrs["agent.log"] = "; ".join(([log] if log else []) + notes)


def write_manifest(
    output_dir: Path | str,
    run_id: str,
    *,
    example_name: str = "exported-run",
    framework: str = "custom",
    application_field: str = "",
    interaction_type: str = "coordination",
    model_label: str | None = None,
    tools_enabled: bool = False,
    suite_tags: Iterable[str] = (),
    seed: int | None = None,
    wall_clock_limit_s: float = 600.0,
    token_cap: int | None = 8192,
    gold_answer: str | None = None,
    task_id: str | None = None,
    resource_samples_path: str | None = None,
) -> Path:
    """Write run.manifest.json next to the trace file; returns its path."""
    manifest = {
        "run_id": run_id,
        "example_name": example_name,
        "framework": framework,
        "application_field": application_field,
        "interaction_type": interaction_type,
        "model_label": model_label if model_label is not None else "unknown",
        "tools_enabled": tools_enabled,
        "suite_tags": list(suite_tags),
        "seed": seed,
        "wall_clock_limit_s": wall_clock_limit_s,
        "token_cap": token_cap,
        "trace_path": TRACE_FILENAME,
        "resource_samples_path": resource_samples_path,
        "gold_answer": gold_answer,
        "task_id": task_id,
    }
    out = Path(output_dir)
    path = out / MANIFEST_FILENAME
    tmp = path.with_name(path.name + ".tmp")
    try:
        out.mkdir(parents=True, exist_ok=True)
        tmp.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        os.replace(tmp, path)
    except OSError as exc:
        raise UnwritableOutput(f"cannot write manifest {path}: {exc}") from exc
    return path


__all__ = [
    "CapturedSpan",
    "ExporterConfig",
    "TraceExporter",
    "UnwritableOutput",
    "write_manifest",
    "ON_END",
    "PERIODIC",
]
