"""Exporter adapter bridging real agent workloads into the trace toolkit."""

from .exporter import (
    ON_END,
    PERIODIC,
    CapturedSpan,
    ExporterConfig,
    TraceExporter,
    UnwritableOutput,
    write_manifest,
)
from .recorder import SpanRecorder

__version__ = "0.1.0"

__all__ = [
    "CapturedSpan",
    "ExporterConfig",
    "ON_END",
    "PERIODIC",
    "SpanRecorder",
    "TraceExporter",
    "UnwritableOutput",
    "write_manifest",
]
