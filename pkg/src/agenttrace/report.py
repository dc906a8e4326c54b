"""Analysis report bundle: summary JSON, CSV tables, DOT graphs, plot data.

Everything written here is a deterministic function of the corpus and the
analysis configuration; the generation timestamp lives only in the meta.json
sidecar so repeated invocations produce byte-identical report payloads.

Emitted families (one artifact minimum per family and invocation):
token consumption (per-run series + corpus means), delay (per-run breakdown,
group means, folded-stack flame data), CPU/memory (series + aggregates),
message sizes, and call-graph structure/similarity (DOT, matrices, heatmaps).
"""

from __future__ import annotations

import csv
import io
import json
import shutil
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Mapping, Sequence

from . import similarity as sim
from .callgraph import AGENT, LLM, TOOL, CallGraph, build_call_graph, to_dot
from .errors import DataError, IoError
from .failure import FailureRecord, Judge, RuleJudge, composition, classify_run
from .ingest import GroupKey, Run, load_corpus, load_run_resources
from .metrics import (
    GroupSummary,
    PriceTable,
    RunMetrics,
    TokenSeries,
    compute_run_metrics,
    message_size_stats,
    token_timeseries,
    summarize_group,
)
from .trace_model import SpanRecord

DEFAULT_BUCKET_MS = 1000

# Report families; analyze emits all of them unless a subset is requested.
REPORT_FAMILIES = (
    "tokens", "latency", "resources", "messages", "failures", "callgraphs", "similarity",
)


@dataclass(frozen=True)
class AnalysisConfig:
    corpus_dir: Path
    output_dir: Path
    group_by: tuple[str, ...] = ()
    report_families: frozenset[str] = frozenset(REPORT_FAMILIES)
    similarity_metrics: tuple[str, ...] = (sim.JACCARD, sim.LCS)
    aggregation: str = sim.MEDIAN_CROSS
    price_table: PriceTable | None = None
    judge: Judge = field(default_factory=RuleJudge)
    bucket_ms: int = DEFAULT_BUCKET_MS

    def __post_init__(self) -> None:
        if Path(self.output_dir).resolve() == Path(self.corpus_dir).resolve():
            raise DataError("output_dir must differ from corpus_dir")
        unknown = self.report_families - set(REPORT_FAMILIES)
        if unknown:
            raise DataError(f"unknown report families: {sorted(unknown)}")


def _fmt(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    path.write_text(buf.getvalue(), encoding="utf-8")


def _json_text(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def folded_stacks(run: Run) -> str:
    """Folded-stack flame-graph data: one "frame;...;frame microseconds" line per path.

    Frames are agent names, with llm/tool leaves labelled by model/tool name;
    the count is the frame's exclusive time in microseconds.
    """
    children: dict[str, list[SpanRecord]] = {}
    for span in run.spans:
        if span.parent_span_id is not None:
            children.setdefault(span.parent_span_id, []).append(span)

    def frame_label(span: SpanRecord) -> str:
        op = span.attributes.operation_name
        if op == "call_llm":
            return f"llm:{span.attributes.request_model or 'unknown-model'}"
        if op == "execute_tool":
            return f"tool:{span.attributes.tool_name or span.name or 'unknown-tool'}"
        return span.agent_name or span.name or "unknown"

    lines: list[str] = []

    def walk(span: SpanRecord, stack: list[str]) -> None:
        stack = stack + [frame_label(span)]
        kids = sorted(
            children.get(span.span_id, ()), key=lambda s: (s.start_time, s.span_id)
        )
        intervals = [
            (max(kid.start_time, span.start_time), min(kid.end_time, span.end_time))
            for kid in kids
        ]
        intervals = sorted(iv for iv in intervals if iv[1] > iv[0])
        covered = 0
        if intervals:
            cur_s, cur_e = intervals[0]
            for s, e in intervals[1:]:
                if s > cur_e:
                    covered += cur_e - cur_s
                    cur_s, cur_e = s, e
                else:
                    cur_e = max(cur_e, e)
            covered += cur_e - cur_s
        exclusive_us = max(0, (span.end_time - span.start_time - covered)) // 1000
        if exclusive_us > 0:
            lines.append(f"{';'.join(stack)} {exclusive_us}")
        for kid in kids:
            walk(kid, stack)

    walk(run.root_span, [])
    return "\n".join(sorted(lines)) + ("\n" if lines else "")


def _group_label(key: GroupKey) -> str:
    return key.label()


@dataclass
class _RunAnalysis:
    run: Run
    group_label: str
    graph: CallGraph
    metrics: RunMetrics
    tokens: TokenSeries
    record: FailureRecord


def _boxplot_svg(title: str, stats_by_label: Mapping[str, tuple[float, float, float, float, float]]) -> str:
    """Minimal static SVG boxplot; input is label -> (min, q1, median, q3, max)."""
    width, box_w, height, pad = 120 * max(1, len(stats_by_label)), 60, 260, 30
    values = [v for stats in stats_by_label.values() for v in stats]
    lo, hi = (min(values), max(values)) if values else (0.0, 1.0)
    span = (hi - lo) or 1.0

    def y(v: float) -> str:
        return f"{height - pad - (v - lo) / span * (height - 2 * pad):.2f}"

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<text x="6" y="16" font-size="13" font-family="sans-serif">{title}</text>',
    ]
    for i, (label, (vmin, q1, med, q3, vmax)) in enumerate(stats_by_label.items()):
        cx = 60 + i * 120
        x0 = cx - box_w / 2
        parts.append(f'<line x1="{cx}" y1="{y(vmin)}" x2="{cx}" y2="{y(vmax)}" stroke="black"/>')
        parts.append(
            f'<rect x="{x0:.2f}" y="{y(q3)}" width="{box_w}" '
            f'height="{float(y(q1)) - float(y(q3)):.2f}" fill="#9ecae1" stroke="black"/>'
        )
        parts.append(
            f'<line x1="{x0:.2f}" y1="{y(med)}" x2="{x0 + box_w:.2f}" y2="{y(med)}" '
            'stroke="black" stroke-width="2"/>'
        )
        parts.append(
            f'<text x="{cx}" y="{height - 8}" font-size="10" font-family="sans-serif" '
            f'text-anchor="middle">{label}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _heatmap_svg(matrix: sim.SimilarityMatrix) -> str:
    cell, pad = 46, 110
    n = len(matrix.labels)
    size = pad + n * cell + 10
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}">',
        f'<text x="6" y="16" font-size="13" font-family="sans-serif">'
        f"{matrix.metric} similarity ({matrix.aggregation})</text>",
    ]
    for i, label in enumerate(matrix.labels):
        parts.append(
            f'<text x="{pad - 6}" y="{pad + i * cell + cell / 2 + 4:.1f}" font-size="9" '
            f'font-family="sans-serif" text-anchor="end">{label}</text>'
        )
        parts.append(
            f'<text x="{pad + i * cell + cell / 2:.1f}" y="{pad - 6}" font-size="9" '
            f'font-family="sans-serif" text-anchor="middle">{label}</text>'
        )
    for i in range(n):
        for j in range(n):
            value = matrix.values[i][j]
            shade = int(255 - value * 175)
            color = f"#{shade:02x}{shade:02x}ff"
            x, ypos = pad + j * cell, pad + i * cell
            parts.append(
                f'<rect x="{x}" y="{ypos}" width="{cell}" height="{cell}" '
                f'fill="{color}" stroke="white"/>'
            )
            parts.append(
                f'<text x="{x + cell / 2:.1f}" y="{ypos + cell / 2 + 4:.1f}" font-size="10" '
                f'font-family="sans-serif" text-anchor="middle">{value:.2f}</text>'
            )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def analyze_corpus(config: AnalysisConfig) -> dict[str, Any]:
    """Run the full post-processing pipeline and write the report bundle.

    Returns the summary document (also written to summary.json). Partial
    outputs are removed if anything fails mid-flight.
    """
    out = Path(config.output_dir)
    created = not out.exists()
    try:
        return _analyze_into(config, out)
    except BaseException:
        if created and out.exists():
            shutil.rmtree(out, ignore_errors=True)
        raise


def _analyze_into(config: AnalysisConfig, out: Path) -> dict[str, Any]:
    corpus = load_corpus(config.corpus_dir, config.group_by)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create output directory {out}: {exc}") from exc

    meta = {"generated_at": datetime.now(timezone.utc).isoformat(), "tool": "agenttrace"}
    (out / "meta.json").write_text(_json_text(meta), encoding="utf-8")

    if not corpus:
        summary: dict[str, Any] = {
            "n_runs": 0,
            "groups": [],
            "similarity": {},
            "failures": {"n_failures": 0, "composition": {}},
            "judge_agreement": None,
        }
        (out / "summary.json").write_text(_json_text(summary), encoding="utf-8")
        return summary

    analyses: list[_RunAnalysis] = []
    for key in sorted(corpus, key=_group_label):
        for run in corpus[key]:
            resources = load_run_resources(run)
            analyses.append(
                _RunAnalysis(
                    run=run,
                    group_label=_group_label(key),
                    graph=build_call_graph(run),
                    metrics=compute_run_metrics(run, config.price_table, resources),
                    tokens=token_timeseries(run, config.bucket_ms),
                    record=classify_run(run, config.judge),
                )
            )
    analyses.sort(key=lambda a: a.run.run_id)

    families = config.report_families
    for sub in ("tables", "plotdata/token_series", "plotdata/flame", "plotdata/resource_series", "plots", "callgraphs"):
        (out / sub).mkdir(parents=True, exist_ok=True)

    _write_run_metrics_table(out, analyses)
    if "tokens" in families:
        _write_token_outputs(out, analyses, config.bucket_ms)
    if "latency" in families:
        _write_latency_outputs(out, analyses)
        for a in analyses:
            folded = folded_stacks(a.run)
            (out / "plotdata" / "flame" / f"{a.run.run_id}.folded").write_text(folded, encoding="utf-8")
    if "resources" in families:
        _write_resource_outputs(out, analyses)
    if "messages" in families:
        _write_message_sizes(out, analyses)
    if "failures" in families:
        _write_failures(out, analyses)
    if "callgraphs" in families:
        for a in analyses:
            # Similarity uses agent-only graphs; the visualization also shows
            # tool and model nodes.
            full_graph = build_call_graph(a.run, include=frozenset({AGENT, TOOL, LLM}))
            (out / "callgraphs" / f"{a.run.run_id}.dot").write_text(to_dot(full_graph), encoding="utf-8")

    group_labels = sorted({a.group_label for a in analyses})
    summaries: list[GroupSummary] = []
    for label in group_labels:
        group_metrics = [a.metrics for a in analyses if a.group_label == label]
        summaries.append(summarize_group(group_metrics, label))
    _write_group_summary_table(out, summaries)
    _write_boxplots(out, summaries)

    graphs_by_group = {
        label: [a.graph for a in analyses if a.group_label == label] for label in group_labels
    }
    matrices: dict[str, sim.SimilarityMatrix] = {}
    if "similarity" in families:
        for metric in config.similarity_metrics:
            matrix = sim.similarity_matrix(graphs_by_group, metric, config.aggregation)
            matrices[metric] = matrix
            (out / "tables" / f"similarity_{metric}.csv").write_text(matrix.to_csv(), encoding="utf-8")
            (out / f"similarity_{metric}.json").write_text(matrix.to_json(), encoding="utf-8")
            (out / "plots" / f"heatmap_similarity_{metric}.svg").write_text(
                _heatmap_svg(matrix), encoding="utf-8"
            )

    records = [a.record for a in analyses]
    report = composition(records)
    summary = {
        "n_runs": len(analyses),
        "groups": [
            {
                "group": s.group_label,
                "n_runs": s.n_runs,
                "accuracy": s.accuracy,
                "metrics": {
                    name: {
                        "n": d.n,
                        "mean": d.mean,
                        "median": d.median,
                        "q1": d.q1,
                        "q3": d.q3,
                        "min": d.min,
                        "max": d.max,
                    }
                    for name, d in sorted(s.metrics.items())
                },
            }
            for s in summaries
        ],
        "similarity": {
            metric: {
                "labels": list(m.labels),
                "aggregation": m.aggregation,
                "values": [list(row) for row in m.values],
            }
            for metric, m in matrices.items()
        },
        "failures": {
            "n_failures": report.n_failures,
            "composition": dict(report.percentages),
            "silent_pct": report.silent_pct,
            "explicit_pct": report.explicit_pct,
        },
        "judge_agreement": None,
    }
    (out / "summary.json").write_text(_json_text(summary), encoding="utf-8")
    return summary


def _write_run_metrics_table(out: Path, analyses: Sequence[_RunAnalysis]) -> None:
    header = [
        "run_id", "group", "task_id", "outcome", "judgement",
        "tokens_in", "tokens_out", "tokens_total", "usage_coverage", "cost",
        "end_to_end_s", "agent_processing_s", "agent_to_llm_s", "agent_to_agent_s",
        "tool_s", "unattributed_s", "bytes_a2a", "bytes_a2llm",
        "llm_calls", "tool_calls", "retries",
    ]
    rows = []
    for a in analyses:
        m = a.metrics
        rows.append([
            m.run_id, a.group_label, m.task_id, m.outcome, m.judgement,
            m.tokens_in, m.tokens_out, m.tokens_total, m.usage_coverage, m.cost,
            m.latency.end_to_end_s, m.latency.agent_processing_s, m.latency.agent_to_llm_s,
            m.latency.agent_to_agent_s, m.latency.tool_s, m.latency.unattributed_s,
            m.bytes_a2a, m.bytes_a2llm, m.llm_calls, m.tool_calls, m.retries,
        ])
    _write_csv(out / "tables" / "run_metrics.csv", header, rows)


def _write_token_outputs(out: Path, analyses: Sequence[_RunAnalysis], bucket_ms: int) -> None:
    totals_rows = []
    for a in analyses:
        series_rows = []
        for agent in sorted(a.tokens.per_agent):
            for bucket in a.tokens.per_agent[agent]:
                series_rows.append([bucket.bucket_start_ms, agent, bucket.tokens_in, bucket.tokens_out])
        for bucket in a.tokens.total:
            series_rows.append([bucket.bucket_start_ms, "__total__", bucket.tokens_in, bucket.tokens_out])
        _write_csv(
            out / "plotdata" / "token_series" / f"{a.run.run_id}.csv",
            ["bucket_start_ms", "agent", "tokens_in", "tokens_out"],
            series_rows,
        )
        totals_rows.append([a.run.run_id, a.group_label, a.metrics.tokens_in,
                            a.metrics.tokens_out, a.metrics.tokens_total, a.metrics.usage_coverage])
    _write_csv(
        out / "tables" / "tokens.csv",
        ["run_id", "group", "tokens_in", "tokens_out", "tokens_total", "usage_coverage"],
        totals_rows,
    )

    # Mean total-token series across runs, per group, bucket-aligned.
    by_group: dict[str, list[TokenSeries]] = {}
    for a in analyses:
        by_group.setdefault(a.group_label, []).append(a.tokens)
    mean_rows = []
    for label in sorted(by_group):
        series_list = by_group[label]
        longest = max(len(s.total) for s in series_list)
        n = len(series_list)
        for i in range(longest):
            mean_in = sum(s.total[i].tokens_in for s in series_list if i < len(s.total)) / n
            mean_out = sum(s.total[i].tokens_out for s in series_list if i < len(s.total)) / n
            mean_rows.append([label, i * bucket_ms, mean_in, mean_out])
    _write_csv(
        out / "plotdata" / "token_series_mean.csv",
        ["group", "bucket_start_ms", "mean_tokens_in", "mean_tokens_out"],
        mean_rows,
    )


def _write_latency_outputs(out: Path, analyses: Sequence[_RunAnalysis]) -> None:
    rows = []
    for a in analyses:
        lat = a.metrics.latency
        rows.append([
            a.run.run_id, a.group_label, lat.end_to_end_s, lat.agent_processing_s,
            lat.agent_to_llm_s, lat.agent_to_agent_s, lat.tool_s, lat.unattributed_s,
        ])
    header = ["run_id", "group", "end_to_end_s", "agent_processing_s", "agent_to_llm_s",
              "agent_to_agent_s", "tool_s", "unattributed_s"]
    _write_csv(out / "tables" / "latency_breakdown.csv", header, rows)

    by_group: dict[str, list[_RunAnalysis]] = {}
    for a in analyses:
        by_group.setdefault(a.group_label, []).append(a)
    mean_rows = []
    components = ["end_to_end_s", "agent_processing_s", "agent_to_llm_s",
                  "agent_to_agent_s", "tool_s", "unattributed_s"]
    for label in sorted(by_group):
        group = by_group[label]
        for component in components:
            mean = sum(getattr(a.metrics.latency, component) for a in group) / len(group)
            mean_rows.append([label, component, mean])
    _write_csv(
        out / "plotdata" / "latency_breakdown_mean.csv",
        ["group", "component", "mean_s"], mean_rows,
    )


def _write_resource_outputs(out: Path, analyses: Sequence[_RunAnalysis]) -> None:
    rows = []
    for a in analyses:
        m = a.metrics
        rows.append([a.run.run_id, a.group_label, m.cpu_mean, m.cpu_peak, m.cpu_min,
                     m.rss_mean, m.rss_peak, m.rss_min])
        if a.run.base_dir is not None and a.run.manifest.resource_samples_path is not None:
            src = Path(a.run.base_dir) / a.run.manifest.resource_samples_path
            if src.is_file():
                dst = out / "plotdata" / "resource_series" / f"{a.run.run_id}.csv"
                dst.write_bytes(src.read_bytes())
    _write_csv(
        out / "tables" / "resources.csv",
        ["run_id", "group", "cpu_mean", "cpu_peak", "cpu_min", "rss_mean", "rss_peak", "rss_min"],
        rows,
    )


def _write_message_sizes(out: Path, analyses: Sequence[_RunAnalysis]) -> None:
    rows = []
    for a in analyses:
        stats = message_size_stats(a.run)
        for agent in sorted(stats.per_agent):
            t = stats.per_agent[agent]
            rows.append([a.run.run_id, "agent", agent, "", t.input_bytes, t.output_bytes, t.total_bytes])
        for (src, dst) in sorted(stats.per_pair):
            t = stats.per_pair[(src, dst)]
            rows.append([a.run.run_id, "pair", src, dst, t.input_bytes, t.output_bytes, t.total_bytes])
        for (agent, model) in sorted(stats.per_llm):
            t = stats.per_llm[(agent, model)]
            rows.append([a.run.run_id, "llm", agent, model, t.input_bytes, t.output_bytes, t.total_bytes])
    _write_csv(
        out / "tables" / "message_sizes.csv",
        ["run_id", "scope", "src", "dst", "input_bytes", "output_bytes", "total_bytes"],
        rows,
    )


def _write_failures(out: Path, analyses: Sequence[_RunAnalysis]) -> None:
    rows = [
        [a.record.run_id, a.record.failed, a.record.category or "",
         a.record.failure_class, a.record.judge_id, a.record.reason]
        for a in analyses
    ]
    _write_csv(
        out / "tables" / "failures.csv",
        ["run_id", "failed", "category", "failure_class", "judge_id", "reason"],
        rows,
    )


def _write_group_summary_table(out: Path, summaries: Sequence[GroupSummary]) -> None:
    rows = []
    for s in summaries:
        rows.append([s.group_label, s.n_runs, "accuracy", s.accuracy, "", "", "", "", "", s.n_runs])
        for name in sorted(s.metrics):
            d = s.metrics[name]
            rows.append([s.group_label, s.n_runs, name, d.mean, d.median, d.q1, d.q3, d.min, d.max, d.n])
    _write_csv(
        out / "tables" / "group_summary.csv",
        ["group", "n_runs", "metric", "mean", "median", "q1", "q3", "min", "max", "n"],
        rows,
    )


def _write_boxplots(out: Path, summaries: Sequence[GroupSummary]) -> None:
    for metric, filename in (("cost", "boxplot_cost.svg"), ("latency", "boxplot_latency.svg")):
        stats = {}
        for s in summaries:
            d = s.metrics.get(metric)
            if d is not None:
                stats[s.group_label] = (d.min, d.q1, d.median, d.q3, d.max)
        if not stats:
            stats = {"(absent)": (0.0, 0.0, 0.0, 0.0, 0.0)}
        (out / "plots" / filename).write_text(_boxplot_svg(metric, stats), encoding="utf-8")
    accuracy_stats = {
        s.group_label: (s.accuracy, s.accuracy, s.accuracy, s.accuracy, s.accuracy)
        for s in summaries
    }
    (out / "plots" / "boxplot_accuracy.svg").write_text(
        _boxplot_svg("accuracy", accuracy_stats), encoding="utf-8"
    )
