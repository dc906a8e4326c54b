"""Corpus assembly: manifests + trace files + resource samples -> grouped Runs.

On-disk layout (one directory per run):

    <run-dir>/run.manifest.json     manifest, snake_case keys
    <run-dir>/<name>.trace.json     span array (trace_model format)
    <run-dir>/<name>.resources.csv  optional "timestamp_ns,cpu_percent,rss_bytes"

Corpora are discovered by locating run.manifest.json files recursively.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Mapping

from .errors import (
    DataError,
    DuplicateRunId,
    EmptyTrace,
    MalformedRow,
    MissingFile,
    MultipleRoots,
    NonMonotoneTimestamps,
    NoRootSpan,
)
from .trace_model import SpanRecord, parse_trace_file, validate_span

MANIFEST_FILENAME = "run.manifest.json"
INTERACTION_TYPES = frozenset({"planning", "coordination", "debate", "correction"})

DEFAULT_WALL_CLOCK_LIMIT_S = 600.0
DEFAULT_TOKEN_CAP = 8192


@dataclass(frozen=True)
class RunManifest:
    run_id: str
    example_name: str
    framework: str = ""
    application_field: str = ""
    interaction_type: str = "coordination"
    model_label: str = "unknown"
    tools_enabled: bool = False
    suite_tags: tuple[str, ...] = ()
    seed: int | None = None
    wall_clock_limit_s: float = DEFAULT_WALL_CLOCK_LIMIT_S
    token_cap: int | None = DEFAULT_TOKEN_CAP
    trace_path: str = ""
    resource_samples_path: str | None = None
    gold_answer: str | None = None
    task_id: str | None = None
    # Free-form metadata; the simulator labels its synthetic data here.
    sim_info: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.interaction_type not in INTERACTION_TYPES:
            raise DataError(
                f"manifest {self.run_id!r}: interaction_type {self.interaction_type!r} "
                f"not in {sorted(INTERACTION_TYPES)}"
            )
        if self.wall_clock_limit_s <= 0:
            raise DataError(f"manifest {self.run_id!r}: wall_clock_limit_s must be > 0")


@dataclass(frozen=True)
class Run:
    manifest: RunManifest
    spans: tuple[SpanRecord, ...]
    root_span: SpanRecord
    outcome: str
    judgement: str
    warnings: tuple[str, ...] = ()
    orphan_span_ids: tuple[str, ...] = ()
    # Directory the manifest was loaded from; resolves relative sibling paths.
    base_dir: str | None = None

    @property
    def run_id(self) -> str:
        return self.manifest.run_id


@dataclass(frozen=True)
class ResourceSample:
    timestamp_ns: int
    cpu_percent: float
    rss_bytes: int


@dataclass(frozen=True)
class ResourceSamples:
    samples: tuple[ResourceSample, ...]
    nominal_interval_ms: int = 0


@dataclass(frozen=True)
class GroupKey:
    dimensions: tuple[tuple[str, Any], ...]

    def label(self) -> str:
        if not self.dimensions:
            return "all"
        return ",".join(f"{name}={value}" for name, value in self.dimensions)

    def __str__(self) -> str:
        return self.label()


def manifest_from_dict(data: Mapping[str, Any]) -> RunManifest:
    known = {f for f in RunManifest.__dataclass_fields__}
    kwargs: dict[str, Any] = {k: v for k, v in data.items() if k in known and v is not None}
    if "suite_tags" in kwargs:
        kwargs["suite_tags"] = tuple(kwargs["suite_tags"])
    if "wall_clock_limit_s" in kwargs:
        kwargs["wall_clock_limit_s"] = float(kwargs["wall_clock_limit_s"])
    return RunManifest(**kwargs)


def manifest_to_dict(manifest: RunManifest) -> dict[str, Any]:
    out: dict[str, Any] = {
        "run_id": manifest.run_id,
        "example_name": manifest.example_name,
        "framework": manifest.framework,
        "application_field": manifest.application_field,
        "interaction_type": manifest.interaction_type,
        "model_label": manifest.model_label,
        "tools_enabled": manifest.tools_enabled,
        "suite_tags": list(manifest.suite_tags),
        "seed": manifest.seed,
        "wall_clock_limit_s": manifest.wall_clock_limit_s,
        "token_cap": manifest.token_cap,
        "trace_path": manifest.trace_path,
        "resource_samples_path": manifest.resource_samples_path,
        "gold_answer": manifest.gold_answer,
        "task_id": manifest.task_id,
        "sim_info": manifest.sim_info,
    }
    return out


def load_manifest(manifest_path: Path | str) -> RunManifest:
    path = Path(manifest_path)
    if not path.is_file():
        raise MissingFile(f"manifest not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"manifest {path}: invalid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise DataError(f"manifest {path}: expected a JSON object")
    return manifest_from_dict(data)


def assemble_run(manifest: RunManifest, spans: Iterable[SpanRecord]) -> Run:
    """Sort spans, locate the root, and establish the Run invariants.

    Schema violations and trace-id mismatches become warnings; structural
    problems (no spans, zero or multiple roots) raise.
    """
    ordered = tuple(sorted(spans, key=lambda s: (s.start_time, s.span_id)))
    if not ordered:
        raise EmptyTrace(f"run {manifest.run_id!r}: trace has no spans")

    roots = [s for s in ordered if s.parent_span_id is None]
    if len(roots) > 1:
        raise MultipleRoots(
            f"run {manifest.run_id!r}: {len(roots)} parentless spans "
            f"({', '.join(r.span_id for r in roots)})"
        )
    if not roots:
        raise NoRootSpan(f"run {manifest.run_id!r}: no parentless span")
    root = roots[0]

    warnings: list[str] = []
    known_ids = {s.span_id for s in ordered}
    orphans: list[str] = []
    for span in ordered:
        for violation in validate_span(span):
            warnings.append(f"span {span.span_id}: {violation}")
        if span.trace_id != root.trace_id:
            warnings.append(
                f"span {span.span_id}: trace_id {span.trace_id!r} != run trace_id {root.trace_id!r}"
            )
        if span.parent_span_id is not None and span.parent_span_id not in known_ids:
            orphans.append(span.span_id)
            warnings.append(f"span {span.span_id}: orphan (parent {span.parent_span_id} not in run)")

    outcome = root.attributes.run_outcome or "failure"
    judgement = root.attributes.run_judgement or "unknown"
    return Run(
        manifest=manifest,
        spans=ordered,
        root_span=root,
        outcome=outcome,
        judgement=judgement,
        warnings=tuple(warnings),
        orphan_span_ids=tuple(orphans),
    )


def load_run(manifest_path: Path | str) -> Run:
    manifest_path = Path(manifest_path)
    manifest = load_manifest(manifest_path)
    trace_path = manifest_path.parent / manifest.trace_path
    if not trace_path.is_file():
        raise MissingFile(f"trace file not found: {trace_path}")
    spans = parse_trace_file(trace_path.read_bytes())
    run = assemble_run(manifest, spans)
    return replace(run, base_dir=str(manifest_path.parent))


def discover_manifests(root_dir: Path | str) -> list[Path]:
    root = Path(root_dir)
    if not root.is_dir():
        raise MissingFile(f"corpus directory not found: {root}")
    return sorted(root.rglob(MANIFEST_FILENAME))


def group_key_for(manifest: RunManifest, group_by: Iterable[str]) -> GroupKey:
    dims = []
    for name in group_by:
        if name not in RunManifest.__dataclass_fields__:
            raise DataError(f"unknown group-by dimension {name!r}")
        dims.append((name, getattr(manifest, name)))
    return GroupKey(dimensions=tuple(dims))


def load_corpus(root_dir: Path | str, group_by: Iterable[str] = ()) -> dict[GroupKey, list[Run]]:
    """Load every run under root_dir, partitioned by the given manifest fields.

    The multiset union of all groups is exactly the corpus: each run lands in
    the single group matching its manifest values.
    """
    group_by = list(group_by)
    groups: dict[GroupKey, list[Run]] = {}
    seen_ids: set[str] = set()
    for manifest_path in discover_manifests(root_dir):
        run = load_run(manifest_path)
        if run.run_id in seen_ids:
            raise DuplicateRunId(f"run id {run.run_id!r} appears more than once")
        seen_ids.add(run.run_id)
        key = group_key_for(run.manifest, group_by)
        groups.setdefault(key, []).append(run)
    return groups


def load_resource_samples(path: Path | str) -> ResourceSamples:
    """Parse a resources CSV; timestamps must be strictly increasing."""
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"resource samples not found: {path}")
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != "timestamp_ns,cpu_percent,rss_bytes":
        raise MalformedRow(f"{path}: expected header 'timestamp_ns,cpu_percent,rss_bytes'")
    samples: list[ResourceSample] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise MalformedRow(f"{path}:{lineno}: expected 3 columns, got {len(parts)}")
        try:
            sample = ResourceSample(int(parts[0]), float(parts[1]), int(parts[2]))
        except ValueError as exc:
            raise MalformedRow(f"{path}:{lineno}: {exc}") from exc
        if samples and sample.timestamp_ns <= samples[-1].timestamp_ns:
            raise NonMonotoneTimestamps(
                f"{path}:{lineno}: timestamp {sample.timestamp_ns} not after {samples[-1].timestamp_ns}"
            )
        samples.append(sample)
    interval_ms = 0
    if len(samples) >= 2:
        gaps = sorted(
            (b.timestamp_ns - a.timestamp_ns) for a, b in zip(samples, samples[1:])
        )
        interval_ms = round(gaps[len(gaps) // 2] / 1_000_000)
    return ResourceSamples(samples=tuple(samples), nominal_interval_ms=interval_ms)


def load_run_resources(run: Run) -> ResourceSamples | None:
    if run.manifest.resource_samples_path is None or run.base_dir is None:
        return None
    path = Path(run.base_dir) / run.manifest.resource_samples_path
    if not path.is_file():
        return None
    return load_resource_samples(path)


# Backend-specific token-usage aliases: alias attribute key -> canonical slot.
USAGE_ALIASES: dict[str, dict[str, str]] = {
    # Gemini / Vertex style: generation-side usage reported as candidate tokens.
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
    # OpenAI completion style.
    "openai": {
        "prompt_tokens": "input",
        "completion_tokens": "output",
        "total_tokens": "total",
    },
    # Anthropic message style.
    "anthropic": {
        "input_tokens": "input",
        "output_tokens": "output",
    },
}

_SLOT_FIELDS = {
    "input": "usage_input_tokens",
    "output": "usage_output_tokens",
    "total": "usage_total_tokens",
}


def normalize_usage(span: SpanRecord, backend_hint: str) -> SpanRecord:
    """Map backend-specific token aliases onto the canonical usage fields.

    Canonical fields already present are never overwritten; alias keys stay
    in the open attribute map untouched. Unknown hints are a no-op.
    """
    aliases = USAGE_ALIASES.get(backend_hint.lower())
    if not aliases:
        return span
    changes: dict[str, int] = {}
    for alias_key, slot in aliases.items():
        value = span.attributes.extra.get(alias_key)
        if value is None or isinstance(value, bool) or not isinstance(value, int):
            continue
        field_name = _SLOT_FIELDS[slot]
        if getattr(span.attributes, field_name) is None and field_name not in changes:
            changes[field_name] = value
    if not changes:
        return span
    return replace(span, attributes=replace(span.attributes, **changes))


def usage_coverage(run: Run) -> float:
    """Fraction of call_llm spans carrying canonical token usage; 1.0 when none."""
    llm_spans = [s for s in run.spans if s.attributes.operation_name == "call_llm"]
    if not llm_spans:
        return 1.0
    covered = sum(1 for s in llm_spans if s.attributes.has_usage())
    return covered / len(llm_spans)
