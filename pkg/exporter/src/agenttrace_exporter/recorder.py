"""Minimal instrumentation hook: record spans from application code.

For frameworks without native tracing, wrap agent/LLM/tool steps in
``SpanRecorder`` context managers; finished spans stream into a
``TraceExporter``. Ids are fresh random hex of the canonical widths; the
clock is injectable so workloads can be made fully reproducible.
"""

from __future__ import annotations

import random
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Any, Callable, Iterator, Mapping

from .exporter import CapturedSpan, TraceExporter


def _hex(rng: random.Random, bits: int) -> str:
    return f"{rng.getrandbits(bits):0{bits // 4}x}"


@dataclass
class _OpenSpan:
    span_id: str
    parent_span_id: str | None
    name: str
    agent_name: str
    kind: str
    operation: str | None
    start_time_ns: int
    provider: str | None
    attributes: dict[str, Any] = field(default_factory=dict)
    status_code: str = "OK"
    status_description: str | None = None
    in_process: bool = True
    input_bytes: int = 0
    output_bytes: int = 0


class SpanRecorder:
    """Builds one trace; not shareable across threads (one recorder per run)."""

    def __init__(
        self,
        exporter: TraceExporter,
        clock: Callable[[], int] = time.time_ns,
        seed: int | None = None,
    ) -> None:
        self._exporter = exporter
        self._clock = clock
        self._rng = random.Random(seed)
        self.trace_id = _hex(self._rng, 128)
        self._stack: list[_OpenSpan] = []

    @contextmanager
    def span(
        self,
        name: str,
        *,
        agent: str,
        operation: str | None = None,
        kind: str = "INTERNAL",
        provider: str | None = None,
        attributes: Mapping[str, Any] | None = None,
        in_process: bool = True,
        input_bytes: int = 0,
        output_bytes: int = 0,
    ) -> Iterator[_OpenSpan]:
        parent = self._stack[-1].span_id if self._stack else None
        open_span = _OpenSpan(
            span_id=_hex(self._rng, 64),
            parent_span_id=parent,
            name=name,
            agent_name=agent,
            kind=kind,
            operation=operation,
            start_time_ns=self._clock(),
            provider=provider,
            attributes=dict(attributes or {}),
            in_process=in_process,
            input_bytes=input_bytes,
            output_bytes=output_bytes,
        )
        self._stack.append(open_span)
        try:
            yield open_span
        except Exception as exc:
            open_span.status_code = "ERROR"
            open_span.status_description = f"{type(exc).__name__}: {exc}"
            raise
        finally:
            self._stack.pop()
            self._finish(open_span)

    def _finish(self, open_span: _OpenSpan) -> None:
        attrs = dict(open_span.attributes)
        if open_span.operation is not None:
            attrs.setdefault("gen_ai.operation.name", open_span.operation)
        attrs.setdefault("gen_ai.agent.name", open_span.agent_name)
        self._exporter.export_spans(
            [
                CapturedSpan(
                    trace_id=self.trace_id,
                    span_id=open_span.span_id,
                    parent_span_id=open_span.parent_span_id,
                    name=open_span.name,
                    agent_name=open_span.agent_name,
                    start_time_ns=open_span.start_time_ns,
                    end_time_ns=self._clock(),
                    kind=open_span.kind,
                    status_code=open_span.status_code,
                    status_description=open_span.status_description,
                    provider=open_span.provider,
                    attributes=attrs,
                    in_process=open_span.in_process,
                    input_bytes=open_span.input_bytes,
                    output_bytes=open_span.output_bytes,
                )
            ]
        )
