"""Per-run and per-group measurement suite.

Covers token time series, end-to-end latency decomposition, monetary cost
under a user-supplied price table, message-size accounting, resource-sample
statistics, distribution summaries, and tool-on/off delta analysis.

Latency decomposition: every nanosecond of the root span is attributed to
exactly one component on single-flow traces. A span's exclusive time is its
duration minus the union of its children's intervals (overlapping children
are merged first, so concurrent calls are not double-counted). LLM and tool
components take the union duration of call_llm / execute_tool spans;
non-in-process invoke_agent spans contribute their exclusive time as
agent-to-agent communication gap; everything else is agent processing.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

from .errors import DataError, EmptySamples, MissingFile, NoPairs, NoRootSpan
from .callgraph import nearest_distinct_ancestor
from .ingest import ResourceSamples, Run, usage_coverage
from .trace_model import SpanRecord

NS_PER_S = 1_000_000_000


@dataclass(frozen=True)
class PriceTable:
    """Per-model tariffs in currency units per one million tokens."""

    entries: Mapping[str, tuple[float, float]]

    def __post_init__(self) -> None:
        for model, (input_price, output_price) in self.entries.items():
            if input_price < 0 or output_price < 0:
                raise DataError(f"negative price for model {model!r}")

    @classmethod
    def from_json_file(cls, path: Path | str) -> "PriceTable":
        path = Path(path)
        if not path.is_file():
            raise MissingFile(f"price table not found: {path}")
        data = json.loads(path.read_text(encoding="utf-8"))
        entries = {
            model: (float(spec["input_per_1m"]), float(spec["output_per_1m"]))
            for model, spec in data.items()
        }
        return cls(entries=entries)


@dataclass(frozen=True)
class LatencyBreakdown:
    end_to_end_s: float
    agent_processing_s: float
    agent_to_llm_s: float
    agent_to_agent_s: float
    tool_s: float
    unattributed_s: float


@dataclass(frozen=True)
class CostResult:
    cost: float | None
    uncovered_span_ids: tuple[str, ...] = ()


@dataclass(frozen=True)
class ResourceStats:
    cpu_mean: float
    cpu_peak: float
    cpu_min: float
    rss_mean: float
    rss_peak: int
    rss_min: int


@dataclass(frozen=True)
class TokenBucket:
    bucket_start_ms: int
    tokens_in: int
    tokens_out: int


@dataclass(frozen=True)
class TokenSeries:
    bucket_ms: int
    total: tuple[TokenBucket, ...]
    per_agent: dict[str, tuple[TokenBucket, ...]]


@dataclass(frozen=True)
class ByteTotals:
    input_bytes: int = 0
    output_bytes: int = 0

    @property
    def total_bytes(self) -> int:
        return self.input_bytes + self.output_bytes


@dataclass(frozen=True)
class MessageSizeStats:
    per_agent: dict[str, ByteTotals]
    per_pair: dict[tuple[str, str], ByteTotals]
    per_llm: dict[tuple[str, str], ByteTotals]
    grand_total: int


@dataclass(frozen=True)
class RunMetrics:
    run_id: str
    tokens_in: int
    tokens_out: int
    tokens_total: int
    usage_coverage: float
    cost: float | None
    uncovered_span_ids: tuple[str, ...]
    latency: LatencyBreakdown
    bytes_a2a: int
    bytes_a2llm: int
    llm_calls: int
    tool_calls: int
    retries: int
    cpu_mean: float | None
    cpu_peak: float | None
    cpu_min: float | None
    rss_mean: float | None
    rss_peak: int | None
    rss_min: int | None
    outcome: str
    judgement: str
    task_id: str | None = None


@dataclass(frozen=True)
class DistStats:
    n: int
    mean: float
    median: float
    q1: float
    q3: float
    min: float
    max: float


@dataclass(frozen=True)
class GroupSummary:
    group_label: str
    n_runs: int
    accuracy: float
    metrics: dict[str, DistStats]


@dataclass(frozen=True)
class DeltaReport:
    metric_name: str
    pairing: str
    deltas: tuple[tuple[str | None, float], ...]
    fraction_improved: float


def quantile(values: Sequence[float], q: float) -> float:
    """Hazen quantile: linear interpolation at rank h = n*q + 0.5.

    Reproduces the boxplot convention where [1,2,3,4] has quartiles
    (1.5, 2.5, 3.5).
    """
    if not values:
        raise DataError("quantile of empty sequence")
    ordered = sorted(values)
    n = len(ordered)
    h = n * q + 0.5
    h = min(max(h, 1.0), float(n))
    lo = int(math.floor(h))
    frac = h - lo
    if lo >= n:
        return float(ordered[n - 1])
    return float(ordered[lo - 1] + frac * (ordered[lo] - ordered[lo - 1]))


def median(values: Sequence[float]) -> float:
    return quantile(values, 0.5)


def dist_stats(values: Sequence[float]) -> DistStats:
    if not values:
        raise DataError("distribution stats of empty sequence")
    return DistStats(
        n=len(values),
        mean=sum(values) / len(values),
        median=quantile(values, 0.5),
        q1=quantile(values, 0.25),
        q3=quantile(values, 0.75),
        min=float(min(values)),
        max=float(max(values)),
    )


def _union_duration(intervals: list[tuple[int, int]]) -> int:
    """Total length covered by intervals after merging overlaps."""
    if not intervals:
        return 0
    intervals.sort()
    total = 0
    cur_start, cur_end = intervals[0]
    for start, end in intervals[1:]:
        if start > cur_end:
            total += cur_end - cur_start
            cur_start, cur_end = start, end
        else:
            cur_end = max(cur_end, end)
    return total + (cur_end - cur_start)


def _spans_reachable_from_root(run: Run) -> list[SpanRecord]:
    children: dict[str, list[SpanRecord]] = {}
    for span in run.spans:
        if span.parent_span_id is not None:
            children.setdefault(span.parent_span_id, []).append(span)
    reachable: list[SpanRecord] = []
    stack = [run.root_span]
    seen: set[str] = set()
    while stack:
        span = stack.pop()
        if span.span_id in seen:
            continue
        seen.add(span.span_id)
        reachable.append(span)
        stack.extend(children.get(span.span_id, ()))
    return reachable


def _exclusive_ns(span: SpanRecord, children: Sequence[SpanRecord]) -> int:
    intervals = [
        (max(c.start_time, span.start_time), min(c.end_time, span.end_time))
        for c in children
        if c.end_time > span.start_time and c.start_time < span.end_time
    ]
    covered = _union_duration([iv for iv in intervals if iv[1] > iv[0]])
    return max(0, span.end_time - span.start_time - covered)


def latency_breakdown(run: Run) -> LatencyBreakdown:
    """Decompose the root span's duration into delay components (seconds)."""
    if run.root_span is None:  # defensive; assemble_run guarantees a root
        raise NoRootSpan(f"run {run.run_id!r} has no root span")
    reachable = _spans_reachable_from_root(run)
    by_parent: dict[str, list[SpanRecord]] = {}
    for span in reachable:
        if span.parent_span_id is not None:
            by_parent.setdefault(span.parent_span_id, []).append(span)

    llm_intervals: list[tuple[int, int]] = []
    tool_intervals: list[tuple[int, int]] = []
    a2a_ns = 0
    processing_ns = 0
    for span in reachable:
        op = span.attributes.operation_name
        if op == "call_llm":
            llm_intervals.append((span.start_time, span.end_time))
        elif op == "execute_tool":
            tool_intervals.append((span.start_time, span.end_time))
        elif op == "invoke_agent" and not span.communication.is_in_process_call:
            a2a_ns += _exclusive_ns(span, by_parent.get(span.span_id, ()))
        else:
            processing_ns += _exclusive_ns(span, by_parent.get(span.span_id, ()))

    end_to_end_ns = run.root_span.end_time - run.root_span.start_time
    llm_ns = _union_duration(llm_intervals)
    tool_ns = _union_duration(tool_intervals)
    attributed_ns = processing_ns + llm_ns + tool_ns + a2a_ns
    unattributed_ns = max(0, end_to_end_ns - attributed_ns)
    return LatencyBreakdown(
        end_to_end_s=end_to_end_ns / NS_PER_S,
        agent_processing_s=processing_ns / NS_PER_S,
        agent_to_llm_s=llm_ns / NS_PER_S,
        agent_to_agent_s=a2a_ns / NS_PER_S,
        tool_s=tool_ns / NS_PER_S,
        unattributed_s=unattributed_ns / NS_PER_S,
    )


def token_timeseries(run: Run, bucket_ms: int) -> TokenSeries:
    """Bucketed token consumption per agent and in total.

    A call_llm span's tokens land in the bucket containing the span's
    end_time, relative to the root span's start. Per-agent series sum to the
    total series bucket-wise.
    """
    if bucket_ms <= 0:
        raise DataError("bucket_ms must be > 0")
    bucket_ns = bucket_ms * 1_000_000
    base = run.root_span.start_time
    duration_ns = max(0, run.root_span.end_time - base)
    n_buckets = duration_ns // bucket_ns + 1

    contributions: list[tuple[str, int, int, int]] = []
    for span in run.spans:
        if span.attributes.operation_name != "call_llm":
            continue
        bucket = max(0, (span.end_time - base) // bucket_ns)
        n_buckets = max(n_buckets, bucket + 1)
        contributions.append(
            (
                span.agent_name,
                bucket,
                span.attributes.usage_input_tokens or 0,
                span.attributes.usage_output_tokens or 0,
            )
        )

    agents = sorted({agent for agent, _, _, _ in contributions})
    per_agent_raw = {agent: [[0, 0] for _ in range(n_buckets)] for agent in agents}
    total_raw = [[0, 0] for _ in range(n_buckets)]
    for agent, bucket, tokens_in, tokens_out in contributions:
        per_agent_raw[agent][bucket][0] += tokens_in
        per_agent_raw[agent][bucket][1] += tokens_out
        total_raw[bucket][0] += tokens_in
        total_raw[bucket][1] += tokens_out

    def freeze(raw: list[list[int]]) -> tuple[TokenBucket, ...]:
        return tuple(
            TokenBucket(bucket_start_ms=i * bucket_ms, tokens_in=pair[0], tokens_out=pair[1])
            for i, pair in enumerate(raw)
        )

    return TokenSeries(
        bucket_ms=bucket_ms,
        total=freeze(total_raw),
        per_agent={agent: freeze(raw) for agent, raw in per_agent_raw.items()},
    )


def compute_cost(run: Run, prices: PriceTable) -> CostResult:
    """Per-token tariff over call_llm spans, by the span's request model.

    Absent (None) when any billed span lacks usage or a price entry; the
    uncovered spans are listed in the result either way.
    """
    total = 0.0
    uncovered: list[str] = []
    for span in run.spans:
        if span.attributes.operation_name != "call_llm":
            continue
        a = span.attributes
        model = a.request_model
        entry = prices.entries.get(model) if model is not None else None
        if not a.has_usage() or entry is None:
            uncovered.append(span.span_id)
            continue
        input_price, output_price = entry
        total += (a.usage_input_tokens or 0) * input_price / 1e6
        total += (a.usage_output_tokens or 0) * output_price / 1e6
    if uncovered:
        return CostResult(cost=None, uncovered_span_ids=tuple(uncovered))
    return CostResult(cost=total)


def message_size_stats(run: Run) -> MessageSizeStats:
    """Communication byte totals per agent, per agent pair, and per agent-to-LLM edge."""
    by_id = {s.span_id: s for s in run.spans}
    per_agent: dict[str, list[int]] = {}
    per_pair: dict[tuple[str, str], list[int]] = {}
    per_llm: dict[tuple[str, str], list[int]] = {}
    grand_total = 0
    for span in run.spans:
        comm = span.communication
        grand_total += comm.total_message_size_bytes
        if span.agent_name:
            totals = per_agent.setdefault(span.agent_name, [0, 0])
            totals[0] += comm.input_message_size_bytes
            totals[1] += comm.output_message_size_bytes
        op = span.attributes.operation_name
        if op == "invoke_agent":
            caller = nearest_distinct_ancestor(span, by_id)
            if caller is not None and span.agent_name:
                pair = per_pair.setdefault((caller.agent_name, span.agent_name), [0, 0])
                pair[0] += comm.input_message_size_bytes
                pair[1] += comm.output_message_size_bytes
        elif op == "call_llm" and span.agent_name:
            key = (span.agent_name, span.attributes.request_model or "unknown-model")
            pair = per_llm.setdefault(key, [0, 0])
            pair[0] += comm.input_message_size_bytes
            pair[1] += comm.output_message_size_bytes

    def freeze(d: dict) -> dict:
        return {k: ByteTotals(v[0], v[1]) for k, v in d.items()}

    return MessageSizeStats(
        per_agent=freeze(per_agent),
        per_pair=freeze(per_pair),
        per_llm=freeze(per_llm),
        grand_total=grand_total,
    )


def resource_stats(samples: ResourceSamples) -> ResourceStats:
    if not samples.samples:
        raise EmptySamples("no resource samples")
    cpu = [s.cpu_percent for s in samples.samples]
    rss = [s.rss_bytes for s in samples.samples]
    return ResourceStats(
        cpu_mean=sum(cpu) / len(cpu),
        cpu_peak=max(cpu),
        cpu_min=min(cpu),
        rss_mean=sum(rss) / len(rss),
        rss_peak=max(rss),
        rss_min=min(rss),
    )


def is_timeout(run: Run) -> bool:
    """True when the root span's duration reaches the manifest wall-clock cap."""
    return run.root_span.duration_ns / NS_PER_S >= run.manifest.wall_clock_limit_s


def compute_run_metrics(
    run: Run,
    prices: PriceTable | None = None,
    resources: ResourceSamples | None = None,
) -> RunMetrics:
    tokens_in = 0
    tokens_out = 0
    llm_calls = 0
    tool_calls = 0
    retries = 0
    bytes_a2a = 0
    bytes_a2llm = 0
    for span in run.spans:
        a = span.attributes
        op = a.operation_name
        if op == "call_llm":
            llm_calls += 1
            tokens_in += a.usage_input_tokens or 0
            tokens_out += a.usage_output_tokens or 0
            bytes_a2llm += span.communication.total_message_size_bytes
        elif op == "execute_tool":
            tool_calls += 1
        elif op == "invoke_agent":
            bytes_a2a += span.communication.total_message_size_bytes
        if a.retry_attempt_number is not None and a.retry_attempt_number >= 1:
            retries += 1

    cost_result = (
        compute_cost(run, prices) if prices is not None else CostResult(cost=None)
    )
    stats = resource_stats(resources) if resources is not None and resources.samples else None
    return RunMetrics(
        run_id=run.run_id,
        tokens_in=tokens_in,
        tokens_out=tokens_out,
        tokens_total=tokens_in + tokens_out,
        usage_coverage=usage_coverage(run),
        cost=cost_result.cost,
        uncovered_span_ids=cost_result.uncovered_span_ids,
        latency=latency_breakdown(run),
        bytes_a2a=bytes_a2a,
        bytes_a2llm=bytes_a2llm,
        llm_calls=llm_calls,
        tool_calls=tool_calls,
        retries=retries,
        cpu_mean=stats.cpu_mean if stats else None,
        cpu_peak=stats.cpu_peak if stats else None,
        cpu_min=stats.cpu_min if stats else None,
        rss_mean=stats.rss_mean if stats else None,
        rss_peak=stats.rss_peak if stats else None,
        rss_min=stats.rss_min if stats else None,
        outcome=run.outcome,
        judgement=run.judgement,
        task_id=run.manifest.task_id,
    )


# Metric accessors usable for group summaries and delta analysis. Optional
# metrics (cost, resource stats) may be None for a given run and are skipped.
METRIC_ACCESSORS: dict[str, Callable[[RunMetrics], float | None]] = {
    "latency": lambda rm: rm.latency.end_to_end_s,
    "cost": lambda rm: rm.cost,
    "accuracy": lambda rm: 1.0 if rm.judgement == "correct" else 0.0,
    "tokens_in": lambda rm: float(rm.tokens_in),
    "tokens_out": lambda rm: float(rm.tokens_out),
    "tokens_total": lambda rm: float(rm.tokens_total),
    "usage_coverage": lambda rm: rm.usage_coverage,
    "bytes_a2a": lambda rm: float(rm.bytes_a2a),
    "bytes_a2llm": lambda rm: float(rm.bytes_a2llm),
    "llm_calls": lambda rm: float(rm.llm_calls),
    "tool_calls": lambda rm: float(rm.tool_calls),
    "retries": lambda rm: float(rm.retries),
    "cpu_mean": lambda rm: rm.cpu_mean,
    "cpu_peak": lambda rm: rm.cpu_peak,
    "rss_mean": lambda rm: rm.rss_mean,
    "rss_peak": lambda rm: float(rm.rss_peak) if rm.rss_peak is not None else None,
}

# Metrics where a larger value is the beneficial direction.
HIGHER_IS_BETTER = frozenset({"accuracy", "usage_coverage"})


def summarize_group(runs_metrics: Sequence[RunMetrics], group_label: str = "all") -> GroupSummary:
    """Distribution stats per metric plus accuracy for one group of runs."""
    if not runs_metrics:
        raise DataError("summarize_group needs at least one run")
    stats: dict[str, DistStats] = {}
    for name, accessor in METRIC_ACCESSORS.items():
        values = [v for rm in runs_metrics if (v := accessor(rm)) is not None]
        if values:
            stats[name] = dist_stats(values)
    correct = sum(1 for rm in runs_metrics if rm.judgement == "correct")
    return GroupSummary(
        group_label=group_label,
        n_runs=len(runs_metrics),
        accuracy=correct / len(runs_metrics),
        metrics=stats,
    )


def group_delta(
    metric_name: str,
    group_on: Sequence[RunMetrics],
    group_off: Sequence[RunMetrics],
    pairing: str = "unpaired",
) -> DeltaReport:
    """Per-task (on - off) deltas, or the difference of group medians.

    fraction_improved counts deltas with the beneficial sign for the metric
    (strictly lower for cost/latency-like metrics, strictly higher for
    accuracy-like ones).
    """
    accessor = METRIC_ACCESSORS.get(metric_name)
    if accessor is None:
        raise DataError(f"unknown metric {metric_name!r}")
    if pairing not in ("by_task_id", "unpaired"):
        raise DataError(f"unknown pairing {pairing!r}")

    deltas: list[tuple[str | None, float]] = []
    if pairing == "by_task_id":
        off_by_task = {rm.task_id: rm for rm in group_off if rm.task_id is not None}
        for rm_on in group_on:
            if rm_on.task_id is None or rm_on.task_id not in off_by_task:
                continue
            value_on = accessor(rm_on)
            value_off = accessor(off_by_task[rm_on.task_id])
            if value_on is None or value_off is None:
                continue
            deltas.append((rm_on.task_id, value_on - value_off))
        if not deltas:
            raise NoPairs(f"no matching task ids between groups for {metric_name!r}")
    else:
        values_on = [v for rm in group_on if (v := accessor(rm)) is not None]
        values_off = [v for rm in group_off if (v := accessor(rm)) is not None]
        if not values_on or not values_off:
            raise DataError(f"metric {metric_name!r} absent from one of the groups")
        deltas.append((None, median(values_on) - median(values_off)))

    if metric_name in HIGHER_IS_BETTER:
        improved = sum(1 for _, d in deltas if d > 0)
    else:
        improved = sum(1 for _, d in deltas if d < 0)
    return DeltaReport(
        metric_name=metric_name,
        pairing=pairing,
        deltas=tuple(deltas),
        fraction_improved=improved / len(deltas),
    )
