"""Trace analytics for LLM multi-agent systems.

Pipeline: simulate (or ingest real) telemetry corpora, reconstruct per-run
call graphs, quantify run-to-run stability, compute cost/latency/resource
metrics and failure compositions, and emit a deterministic report bundle.
"""

from .callgraph import AgentNode, CallEdge, CallGraph, build_call_graph, edge_multiplicities, to_dot
from .errors import AgentTraceError, DataError, IoError
from .failure import (
    FAILURE_CATEGORIES,
    CompositionReport,
    FailureRecord,
    Judgement,
    LlmJudgeClient,
    RuleJudge,
    classify_run,
    composition,
    judge_agreement,
    llm_judge_client,
    rule_judge,
)
from .ingest import (
    GroupKey,
    ResourceSamples,
    Run,
    RunManifest,
    load_corpus,
    load_resource_samples,
    load_run,
    normalize_usage,
    usage_coverage,
)
from .metrics import (
    DeltaReport,
    GroupSummary,
    LatencyBreakdown,
    PriceTable,
    RunMetrics,
    compute_cost,
    compute_run_metrics,
    group_delta,
    latency_breakdown,
    message_size_stats,
    resource_stats,
    summarize_group,
    token_timeseries,
)
from .report import AnalysisConfig, analyze_corpus, folded_stacks
from .similarity import (
    SimilarityMatrix,
    SimilarityValue,
    cross_group_aggregate,
    jaccard,
    lcs_length,
    lcs_similarity,
    pairwise_average,
    similarity_matrix,
)
from .simgen import SimConfig, generate_corpus, generate_run, replay_check
from .trace_model import (
    CommunicationInfo,
    SpanAttributes,
    SpanRecord,
    SpanStatus,
    Violation,
    parse_trace_file,
    serialize_trace,
    validate_span,
    validate_trace,
)

__version__ = "0.1.0"
