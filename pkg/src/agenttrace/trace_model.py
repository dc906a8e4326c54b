"""Telemetry span schema: validated domain types with lossless parse/serialize.

A trace file is a UTF-8 JSON array of span objects. Canonical attribute keys
(the ``gen_ai.*`` / ``agent.*`` / ``run.*`` / ``mcp.*`` / ``gcp.vertex.agent.*``
/ ``communication.*`` families) are mapped onto typed fields; every other
attribute key is preserved verbatim in ``SpanAttributes.extra`` so the schema
stays open to backend-specific metadata.

All types are immutable after construction; parse/serialize/validate are pure
functions and safe to call concurrently.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Any, Iterable

from .errors import FieldTypeError, MalformedDocument

TRACE_ID_LENGTH = 32
SPAN_ID_LENGTH = 16
_HEX_DIGITS = frozenset("0123456789abcdef")

SPAN_KINDS = frozenset({"INTERNAL", "SERVER", "CLIENT", "PRODUCER", "CONSUMER"})
STATUS_CODES = frozenset({"UNSET", "OK", "ERROR"})
OPERATIONS = frozenset({"call_llm", "execute_tool", "invoke_agent"})
RETRY_TRIGGERS = frozenset(
    {"quality", "relevance_guard", "guard_fail", "timeout", "system", "upstream"}
)
RUN_OUTCOMES = frozenset({"success", "failure"})
RUN_JUDGEMENTS = frozenset({"correct", "wrong", "unknown"})
SPAN_FAILURE_CATEGORIES = frozenset({"guard", "quality", "system", "timeout", "upstream"})

TRACE_FILE_SUFFIX = ".trace.json"


def is_hex_id(value: str, length: int) -> bool:
    """True iff value is a lowercase hex string of exactly `length` chars."""
    return len(value) == length and all(c in _HEX_DIGITS for c in value)


@dataclass(frozen=True)
class Violation:
    """One broken invariant, reported as data rather than an exception."""

    field: str
    rule: str
    message: str

    def __str__(self) -> str:
        return f"{self.field}: {self.rule} ({self.message})"


@dataclass(frozen=True)
class SpanStatus:
    status_code: str = "UNSET"
    description: str | None = None


@dataclass(frozen=True)
class CommunicationInfo:
    is_in_process_call: bool = True
    input_message_size_bytes: int = 0
    output_message_size_bytes: int = 0
    total_message_size_bytes: int = 0


# Canonical attribute keys in file order: (json key, field name, value type).
# "str_list" means a JSON array of strings.
_ATTR_FIELDS: tuple[tuple[str, str, str], ...] = (
    ("gen_ai.operation.name", "operation_name", "str"),
    ("gen_ai.system", "system", "str"),
    ("gen_ai.agent.name", "agent_name", "str"),
    ("gen_ai.agent.description", "agent_description", "str"),
    ("gen_ai.request.model", "request_model", "str"),
    ("gen_ai.conversation.id", "conversation_id", "str"),
    ("gen_ai.tool.name", "tool_name", "str"),
    ("gen_ai.tool.type", "tool_type", "str"),
    ("gen_ai.tool.call.id", "tool_call_id", "str"),
    ("gen_ai.tool.description", "tool_description", "str"),
    ("gen_ai.usage.input_tokens", "usage_input_tokens", "int"),
    ("gen_ai.usage.output_tokens", "usage_output_tokens", "int"),
    ("gen_ai.usage.total_tokens", "usage_total_tokens", "int"),
    ("gen_ai.llm.call.count", "llm_call_count", "int"),
    ("gen_ai.mcp.call.count", "mcp_call_count", "int"),
    ("gen_ai.response.finish_reasons", "finish_reasons", "str_list"),
    ("mcp.server", "mcp_server", "str"),
    ("mcp.tool", "mcp_tool", "str"),
    ("gcp.vertex.agent.llm_request", "llm_request", "str"),
    ("gcp.vertex.agent.llm_response", "llm_response", "str"),
    ("gcp.vertex.agent.tool_call_args", "tool_call_args", "str"),
    ("gcp.vertex.agent.tool_response", "tool_response", "str"),
    ("gcp.vertex.agent.invocation_id", "invocation_id", "str"),
    ("gcp.vertex.agent.session_id", "session_id", "str"),
    ("gcp.vertex.agent.event_id", "event_id", "str"),
    ("agent.log", "agent_log", "str"),
    ("agent.retry.attempt_number", "retry_attempt_number", "int"),
    ("agent.retry.trigger", "retry_trigger", "str"),
    ("agent.retry.previous_span_id", "retry_previous_span_id", "str"),
    ("agent.retry.reason", "retry_reason", "str"),
    ("run.outcome", "run_outcome", "str"),
    ("run.outcome_reason", "run_outcome_reason", "str"),
    ("run.judgement", "run_judgement", "str"),
    ("run.judgement_reason", "run_judgement_reason", "str"),
    ("agent.failure.category", "failure_category", "str"),
    ("agent.failure.reason", "failure_reason", "str"),
    ("agent.output.useless", "output_useless", "bool"),
    ("agent.output.useless_reason", "output_useless_reason", "str"),
    ("communication.input_message_size_bytes", "comm_input_bytes", "int"),
    ("communication.output_message_size_bytes", "comm_output_bytes", "int"),
    ("communication.total_message_size_bytes", "comm_total_bytes", "int"),
)

_FIELD_BY_KEY = {key: (name, typ) for key, name, typ in _ATTR_FIELDS}


@dataclass(frozen=True)
class SpanAttributes:
    operation_name: str | None = None
    system: str | None = None
    agent_name: str | None = None
    agent_description: str | None = None
    request_model: str | None = None
    conversation_id: str | None = None
    tool_name: str | None = None
    tool_type: str | None = None
    tool_call_id: str | None = None
    tool_description: str | None = None
    usage_input_tokens: int | None = None
    usage_output_tokens: int | None = None
    usage_total_tokens: int | None = None
    llm_call_count: int | None = None
    mcp_call_count: int | None = None
    finish_reasons: tuple[str, ...] = ()
    mcp_server: str | None = None
    mcp_tool: str | None = None
    llm_request: str | None = None
    llm_response: str | None = None
    tool_call_args: str | None = None
    tool_response: str | None = None
    invocation_id: str | None = None
    session_id: str | None = None
    event_id: str | None = None
    agent_log: str | None = None
    retry_attempt_number: int | None = None
    retry_trigger: str | None = None
    retry_previous_span_id: str | None = None
    retry_reason: str | None = None
    run_outcome: str | None = None
    run_outcome_reason: str | None = None
    run_judgement: str | None = None
    run_judgement_reason: str | None = None
    failure_category: str | None = None
    failure_reason: str | None = None
    output_useless: bool | None = None
    output_useless_reason: str | None = None
    comm_input_bytes: int | None = None
    comm_output_bytes: int | None = None
    comm_total_bytes: int | None = None
    # Unknown attribute keys, preserved verbatim (the schema is open).
    extra: dict[str, Any] = field(default_factory=dict)

    def has_usage(self) -> bool:
        """True iff canonical input and output token counts are both present."""
        return self.usage_input_tokens is not None and self.usage_output_tokens is not None


@dataclass(frozen=True)
class SpanRecord:
    trace_id: str
    span_id: str
    start_time: int
    end_time: int
    parent_span_id: str | None = None
    name: str = ""
    agent_name: str = ""
    duration_ns: int = 0
    kind: str = "INTERNAL"
    status: SpanStatus = SpanStatus()
    attributes: SpanAttributes = SpanAttributes()
    communication: CommunicationInfo = CommunicationInfo()
    resource: dict[str, str] = field(default_factory=dict)

    def with_attributes(self, **changes: Any) -> "SpanRecord":
        """Copy of this span with the given attribute fields replaced."""
        return replace(self, attributes=replace(self.attributes, **changes))


def _type_name(value: Any) -> str:
    return type(value).__name__


def _check_str(index: int, key: str, value: Any) -> str:
    if not isinstance(value, str):
        raise FieldTypeError(index, key, f"expected string, got {_type_name(value)}")
    return value


def _check_int(index: int, key: str, value: Any) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise FieldTypeError(index, key, f"expected integer, got {_type_name(value)}")
    return value


def _check_bool(index: int, key: str, value: Any) -> bool:
    if not isinstance(value, bool):
        raise FieldTypeError(index, key, f"expected boolean, got {_type_name(value)}")
    return value


def _check_str_list(index: int, key: str, value: Any) -> tuple[str, ...]:
    if not isinstance(value, list):
        raise FieldTypeError(index, key, f"expected array, got {_type_name(value)}")
    for item in value:
        if not isinstance(item, str):
            raise FieldTypeError(index, key, f"expected array of strings, got {_type_name(item)} item")
    return tuple(value)


_CHECKERS = {"str": _check_str, "int": _check_int, "bool": _check_bool, "str_list": _check_str_list}


def _parse_attributes(index: int, raw: Any) -> SpanAttributes:
    if raw is None:
        return SpanAttributes()
    if not isinstance(raw, dict):
        raise FieldTypeError(index, "attributes", f"expected object, got {_type_name(raw)}")
    values: dict[str, Any] = {}
    extra: dict[str, Any] = {}
    for key, value in raw.items():
        known = _FIELD_BY_KEY.get(key)
        if known is None:
            extra[key] = value
            continue
        name, typ = known
        if value is None:
            continue
        values[name] = _CHECKERS[typ](index, key, value)
    return SpanAttributes(extra=extra, **values)


def _parse_status(index: int, raw: Any) -> SpanStatus:
    if raw is None:
        return SpanStatus()
    if not isinstance(raw, dict):
        raise FieldTypeError(index, "status", f"expected object, got {_type_name(raw)}")
    code = raw.get("status_code", "UNSET")
    desc = raw.get("description")
    return SpanStatus(
        status_code=_check_str(index, "status.status_code", code) if code is not None else "UNSET",
        description=_check_str(index, "status.description", desc) if desc is not None else None,
    )


def _parse_communication(index: int, raw: Any) -> CommunicationInfo:
    if raw is None:
        return CommunicationInfo()
    if not isinstance(raw, dict):
        raise FieldTypeError(index, "communication", f"expected object, got {_type_name(raw)}")

    def read_int(key: str, default: int = 0) -> int:
        value = raw.get(key)
        if value is None:
            return default
        return _check_int(index, f"communication.{key}", value)

    in_process = raw.get("is_in_process_call")
    return CommunicationInfo(
        is_in_process_call=(
            _check_bool(index, "communication.is_in_process_call", in_process)
            if in_process is not None
            else True
        ),
        input_message_size_bytes=read_int("input_message_size_bytes"),
        output_message_size_bytes=read_int("output_message_size_bytes"),
        total_message_size_bytes=read_int("total_message_size_bytes"),
    )


def _parse_resource(index: int, raw: Any) -> dict[str, str]:
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise FieldTypeError(index, "resource", f"expected object, got {_type_name(raw)}")
    # Listing form nests the map under "attributes"; a flat map is accepted too.
    inner = raw.get("attributes", raw) if set(raw) <= {"attributes"} else raw
    if not isinstance(inner, dict):
        raise FieldTypeError(index, "resource.attributes", f"expected object, got {_type_name(inner)}")
    out: dict[str, str] = {}
    for key, value in inner.items():
        out[str(key)] = _check_str(index, f"resource.{key}", value)
    return out


def parse_span(index: int, obj: Any) -> SpanRecord:
    """Parse one span object; index is only used for error reporting."""
    if not isinstance(obj, dict):
        raise MalformedDocument(f"expected span object, got {_type_name(obj)}", index)

    def required(key: str) -> Any:
        if key not in obj or obj[key] is None:
            raise FieldTypeError(index, key, "required field missing")
        return obj[key]

    start_time = _check_int(index, "start_time", required("start_time"))
    end_time = _check_int(index, "end_time", required("end_time"))
    duration = obj.get("duration_ns")
    parent = obj.get("parent_span_id")
    attributes = _parse_attributes(index, obj.get("attributes"))
    top_agent = obj.get("agent_name")
    agent_name = (
        _check_str(index, "agent_name", top_agent)
        if top_agent is not None
        else (attributes.agent_name or "")
    )
    return SpanRecord(
        trace_id=_check_str(index, "trace_id", required("trace_id")),
        span_id=_check_str(index, "span_id", required("span_id")),
        parent_span_id=_check_str(index, "parent_span_id", parent) if parent is not None else None,
        name=_check_str(index, "name", obj.get("name")) if obj.get("name") is not None else "",
        agent_name=agent_name,
        start_time=start_time,
        end_time=end_time,
        duration_ns=_check_int(index, "duration_ns", duration) if duration is not None else end_time - start_time,
        kind=_check_str(index, "kind", obj.get("kind")) if obj.get("kind") is not None else "INTERNAL",
        status=_parse_status(index, obj.get("status")),
        attributes=attributes,
        communication=_parse_communication(index, obj.get("communication")),
        resource=_parse_resource(index, obj.get("resource")),
    )


def parse_trace_file(content: bytes | str) -> list[SpanRecord]:
    """Parse a trace document (JSON array of spans) into SpanRecords.

    Raises MalformedDocument for syntax/shape problems and FieldTypeError for
    wrongly-typed field values; both name the offending element index and key.
    Invariant breaches that survive typing (bad hex ids, sum mismatches, ...)
    are not parse errors: validate_span reports them.
    """
    if isinstance(content, bytes):
        try:
            content = content.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedDocument(f"not valid UTF-8: {exc}") from exc
    try:
        doc = json.loads(content)
    except json.JSONDecodeError as exc:
        raise MalformedDocument(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, list):
        raise MalformedDocument(f"expected a JSON array, got {_type_name(doc)}")
    return [parse_span(i, obj) for i, obj in enumerate(doc)]


def span_to_dict(span: SpanRecord) -> dict[str, Any]:
    """Span as a JSON-ready dict carrying the full canonical key template.

    Absent optionals serialize as null so every canonical key appears in
    every document; unknown attribute keys follow the canonical block.
    """
    attrs: dict[str, Any] = {}
    for key, name, typ in _ATTR_FIELDS:
        value = getattr(span.attributes, name)
        if typ == "str_list":
            attrs[key] = list(value)
        else:
            attrs[key] = value
    for key, value in span.attributes.extra.items():
        attrs[key] = value
    return {
        "trace_id": span.trace_id,
        "span_id": span.span_id,
        "parent_span_id": span.parent_span_id,
        "name": span.name,
        "agent_name": span.agent_name,
        "start_time": span.start_time,
        "end_time": span.end_time,
        "duration_ns": span.duration_ns,
        "kind": span.kind,
        "status": {"status_code": span.status.status_code, "description": span.status.description},
        "attributes": attrs,
        "communication": {
            "is_in_process_call": span.communication.is_in_process_call,
            "input_message_size_bytes": span.communication.input_message_size_bytes,
            "output_message_size_bytes": span.communication.output_message_size_bytes,
            "total_message_size_bytes": span.communication.total_message_size_bytes,
        },
        "resource": {"attributes": dict(span.resource)},
    }


def serialize_trace(spans: Iterable[SpanRecord]) -> bytes:
    """Serialize spans to a UTF-8 JSON array; parse(serialize(x)) == x."""
    doc = [span_to_dict(s) for s in spans]
    return (json.dumps(doc, indent=2, ensure_ascii=False) + "\n").encode("utf-8")


def _check_id(violations: list[Violation], field_name: str, value: str, length: int) -> None:
    if len(value) != length:
        violations.append(Violation(field_name, "length", f"expected {length} chars, got {len(value)}"))
    elif not all(c in _HEX_DIGITS for c in value):
        violations.append(Violation(field_name, "charset", "expected lowercase hex"))


def _check_enum(violations: list[Violation], field_name: str, value: str | None, allowed: frozenset[str]) -> None:
    if value is not None and value not in allowed:
        violations.append(Violation(field_name, "enum", f"{value!r} not in {sorted(allowed)}"))


def _check_nonnegative(violations: list[Violation], field_name: str, value: int | None) -> None:
    if value is not None and value < 0:
        violations.append(Violation(field_name, "nonnegative", f"got {value}"))


def validate_span(span: SpanRecord) -> list[Violation]:
    """Check every schema invariant; returns an empty list iff the span is valid."""
    v: list[Violation] = []
    _check_id(v, "trace_id", span.trace_id, TRACE_ID_LENGTH)
    _check_id(v, "span_id", span.span_id, SPAN_ID_LENGTH)
    if span.parent_span_id is not None:
        _check_id(v, "parent_span_id", span.parent_span_id, SPAN_ID_LENGTH)
        if span.parent_span_id == span.span_id:
            v.append(Violation("parent_span_id", "self_parent", "span is its own parent"))
    if span.end_time < span.start_time:
        v.append(Violation("end_time", "order", "end_time before start_time"))
    if span.duration_ns != span.end_time - span.start_time:
        v.append(
            Violation(
                "duration_ns",
                "duration",
                f"{span.duration_ns} != end_time - start_time ({span.end_time - span.start_time})",
            )
        )
    _check_enum(v, "kind", span.kind, SPAN_KINDS)
    _check_enum(v, "status.status_code", span.status.status_code, STATUS_CODES)

    a = span.attributes
    _check_enum(v, "attributes.operation_name", a.operation_name, OPERATIONS)
    for name in ("usage_input_tokens", "usage_output_tokens", "usage_total_tokens",
                 "llm_call_count", "mcp_call_count", "retry_attempt_number",
                 "comm_input_bytes", "comm_output_bytes", "comm_total_bytes"):
        _check_nonnegative(v, f"attributes.{name}", getattr(a, name))
    if (
        a.usage_input_tokens is not None
        and a.usage_output_tokens is not None
        and a.usage_total_tokens is not None
        and a.usage_total_tokens != a.usage_input_tokens + a.usage_output_tokens
    ):
        v.append(
            Violation(
                "usage_total_tokens",
                "sum",
                f"{a.usage_total_tokens} != {a.usage_input_tokens} + {a.usage_output_tokens}",
            )
        )
    _check_enum(v, "attributes.retry_trigger", a.retry_trigger, RETRY_TRIGGERS)
    if a.retry_previous_span_id is not None and not is_hex_id(a.retry_previous_span_id, SPAN_ID_LENGTH):
        v.append(Violation("attributes.retry_previous_span_id", "span_id", "not a well-formed span id"))
    _check_enum(v, "attributes.run_outcome", a.run_outcome, RUN_OUTCOMES)
    _check_enum(v, "attributes.run_judgement", a.run_judgement, RUN_JUDGEMENTS)
    _check_enum(v, "attributes.failure_category", a.failure_category, SPAN_FAILURE_CATEGORIES)
    if a.agent_name is not None and span.agent_name and a.agent_name != span.agent_name:
        v.append(
            Violation(
                "agent_name",
                "mismatch",
                f"top-level {span.agent_name!r} != attribute {a.agent_name!r}",
            )
        )

    c = span.communication
    for name in ("input_message_size_bytes", "output_message_size_bytes", "total_message_size_bytes"):
        _check_nonnegative(v, f"communication.{name}", getattr(c, name))
    if c.total_message_size_bytes != c.input_message_size_bytes + c.output_message_size_bytes:
        v.append(
            Violation(
                "communication.total_message_size_bytes",
                "sum",
                f"{c.total_message_size_bytes} != "
                f"{c.input_message_size_bytes} + {c.output_message_size_bytes}",
            )
        )
    return v


def validate_trace(spans: Iterable[SpanRecord]) -> list[tuple[int, Violation]]:
    """validate_span over a whole trace, tagging each violation with its span index."""
    out: list[tuple[int, Violation]] = []
    for i, span in enumerate(spans):
        for violation in validate_span(span):
            out.append((i, violation))
    return out
