"""Seeded synthetic workload generator.

Emits schema-conformant corpora (trace + manifest + resource CSV per run)
without any LLM backend, so every analytic has a verifiable oracle. Run k of
a corpus derives its own sub-seed from (corpus seed, k); regenerating any
subset from the recorded sub-seeds is byte-identical (Mersenne Twister via
random.Random, documented and stable in CPython).

Architecture templates:

* round_robin: an orchestrator invokes every worker once per round in a
  fixed order; the edge sequence is identical across runs and seeds.
* shuffled_fixed_edges: same edge set as round_robin but the per-run
  invocation order is a seeded permutation (stable structure, unstable order).
* plan_execute: planner/executor iterations with seeded replans; an injected
  timeout reproduces the non-terminating replan loop (the executor keeps
  returning the gold answer, the run is truncated at the wall-clock cap).
* tree_search: expander/evaluator expansions with seeded branching.
* corrective_rag: retrieve -> grade -> generate pipeline; enabling tools adds
  a web-search hop, and grading can loop back to retrieval.

Failure injection allocates per-category run counts by largest-remainder
rounding of the configured probabilities (then shuffles the assignment), so
empirical composition tracks the configured rates up to rounding for every
seed. The injected category is recorded in the manifest for replay.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .errors import DataError, IoError, SeedMissing
from .failure import (
    EMPTY_PREDICTION,
    EXCEPTION,
    FAILURE_CATEGORIES,
    MISSING_OUTPUT,
    OTHER,
    TIMEOUT,
    WRONG_FACT,
)
from .ingest import RunManifest, load_manifest, manifest_to_dict
from .trace_model import (
    CommunicationInfo,
    SpanAttributes,
    SpanRecord,
    SpanStatus,
    serialize_trace,
)

ARCHITECTURES = (
    "round_robin",
    "plan_execute",
    "tree_search",
    "corrective_rag",
    "shuffled_fixed_edges",
)

_INTERACTION_TYPE = {
    "round_robin": "coordination",
    "shuffled_fixed_edges": "coordination",
    "plan_execute": "planning",
    "tree_search": "debate",
    "corrective_rag": "correction",
}

_BASE_EPOCH_NS = 1_750_000_000 * 1_000_000_000
_RESOURCE_INTERVAL_NS = 500_000_000  # one sample per 500 ms

NS_PER_MS = 1_000_000
NS_PER_S = 1_000_000_000


@dataclass(frozen=True)
class SimConfig:
    """Generator knobs.

    n_agents is the number of invoked worker agents for the round-robin
    style architectures (the orchestrator is implicit); plan_execute,
    tree_search and corrective_rag use fixed role casts.
    """

    architecture: str
    n_agents: int = 4
    n_runs: int = 20
    seed: int = 0
    model_label: str = "sim-model-a"
    tools_enabled: bool = False
    rounds: int = 1
    branch_prob: float = 0.3
    retry_prob: float = 0.2
    response_tokens: tuple[int, int] = (200, 120)
    token_cap: int = 8192
    wall_clock_limit_s: float = 600.0
    failure_injection: Mapping[str, float] = field(default_factory=dict)
    example_name: str = ""

    def __post_init__(self) -> None:
        if self.architecture not in ARCHITECTURES:
            raise DataError(f"unknown architecture {self.architecture!r}")
        if self.n_agents < 2:
            raise DataError("n_agents must be >= 2")
        if self.n_runs < 1:
            raise DataError("n_runs must be >= 1")
        if self.rounds < 1:
            raise DataError("rounds must be >= 1")
        for name in ("branch_prob", "retry_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise DataError(f"{name} must be in [0, 1]")
        if self.token_cap < 1:
            raise DataError("token_cap must be >= 1")
        if self.wall_clock_limit_s <= 0:
            raise DataError("wall_clock_limit_s must be > 0")
        total = 0.0
        for category, p in self.failure_injection.items():
            if category not in FAILURE_CATEGORIES:
                raise DataError(f"unknown failure category {category!r}")
            if not 0.0 <= p <= 1.0:
                raise DataError(f"injection probability for {category!r} must be in [0, 1]")
            total += p
        if total > 1.0 + 1e-9:
            raise DataError("failure_injection probabilities sum to more than 1")

    @property
    def effective_example_name(self) -> str:
        return self.example_name or f"sim_{self.architecture}"


def _sub_seed(seed: int, run_index: int) -> int:
    digest = hashlib.sha256(f"{seed}:{run_index}".encode("ascii")).digest()
    return int.from_bytes(digest[:8], "big")


def _corpus_rng(seed: int, label: str) -> random.Random:
    digest = hashlib.sha256(f"{seed}:{label}".encode("ascii")).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def _allocate_injections(config: SimConfig) -> list[str | None]:
    """Assign one (or no) injected category per run, quota-based then shuffled."""
    quotas: dict[str, int] = {}
    remainders: list[tuple[float, str]] = []
    assigned = 0
    for category in FAILURE_CATEGORIES:  # fixed order keeps this deterministic
        p = config.failure_injection.get(category, 0.0)
        if p <= 0.0:
            continue
        exact = p * config.n_runs
        base = int(exact)
        quotas[category] = base
        assigned += base
        remainders.append((exact - base, category))
    target = min(config.n_runs, round(sum(config.failure_injection.values()) * config.n_runs))
    remainders.sort(key=lambda item: (-item[0], item[1]))
    for _, category in remainders:
        if assigned >= target:
            break
        quotas[category] += 1
        assigned += 1
    assignment: list[str | None] = []
    for category, count in quotas.items():
        assignment.extend([category] * count)
    assignment.extend([None] * (config.n_runs - len(assignment)))
    _corpus_rng(config.seed, "injection").shuffle(assignment)
    return assignment


def _draw_ms_ns(rng: random.Random, lo_ms: float, hi_ms: float) -> int:
    return int((lo_ms + (hi_ms - lo_ms) * rng.random()) * NS_PER_MS)


def _draw_tokens(rng: random.Random, mean: int, spread: int, cap: int) -> int:
    value = mean + int(round((2.0 * rng.random() - 1.0) * spread))
    return max(1, min(value, cap))


class _TraceBuilder:
    """Accumulates spans for one run with deterministic ids and times."""

    def __init__(self, rng: random.Random, config: SimConfig, run_id: str) -> None:
        self.rng = rng
        self.config = config
        self.run_id = run_id
        self.trace_id = f"{rng.getrandbits(128):032x}"
        self.spans: list[SpanRecord] = []
        self.base_ns = _BASE_EPOCH_NS
        self.resource = {
            "service.name": config.effective_example_name,
            "service.version": "0.1.0",
            "deployment.environment": "local",
            "telemetry.sdk.name": "agenttrace-sim",
            "telemetry.sdk.language": "python",
            "telemetry.sdk.version": "0.1.0",
            "host.name": "sim-host",
        }

    def new_span_id(self) -> str:
        return f"{self.rng.getrandbits(64):016x}"

    def add(
        self,
        *,
        span_id: str | None = None,
        parent_id: str | None,
        name: str,
        agent: str,
        start: int,
        end: int,
        kind: str = "INTERNAL",
        status: SpanStatus = SpanStatus("OK"),
        attributes: SpanAttributes | None = None,
        communication: CommunicationInfo | None = None,
    ) -> SpanRecord:
        span = SpanRecord(
            trace_id=self.trace_id,
            span_id=span_id if span_id is not None else self.new_span_id(),
            parent_span_id=parent_id,
            name=name,
            agent_name=agent,
            start_time=start,
            end_time=end,
            duration_ns=end - start,
            kind=kind,
            status=status,
            attributes=attributes if attributes is not None else SpanAttributes(agent_name=agent),
            communication=communication if communication is not None else CommunicationInfo(),
            resource=dict(self.resource),
        )
        self.spans.append(span)
        return span

    def llm_span(
        self,
        parent_id: str,
        agent: str,
        start: int,
        *,
        response_text: str,
        retry: tuple[int, str] | None = None,
        duration_range_ms: tuple[float, float] = (400.0, 2500.0),
    ) -> SpanRecord:
        rng = self.rng
        mean, spread = self.config.response_tokens
        tokens_out = _draw_tokens(rng, mean, spread, self.config.token_cap)
        tokens_in = _draw_tokens(rng, mean * 2, spread, self.config.token_cap)
        duration = _draw_ms_ns(rng, *duration_range_ms)
        in_bytes = tokens_in * 4 + int(rng.random() * 64)
        out_bytes = tokens_out * 4 + int(rng.random() * 64)
        attrs = SpanAttributes(
            operation_name="call_llm",
            system="simgen",
            agent_name=agent,
            request_model=self.config.model_label,
            usage_input_tokens=tokens_in,
            usage_output_tokens=tokens_out,
            usage_total_tokens=tokens_in + tokens_out,
            llm_call_count=1,
            finish_reasons=("stop",),
            llm_request=f"prompt for {agent}",
            llm_response=response_text,
            retry_attempt_number=retry[0] if retry else None,
            retry_trigger="quality" if retry else None,
            retry_previous_span_id=retry[1] if retry else None,
            retry_reason="replanning after quality check" if retry else None,
            comm_input_bytes=in_bytes,
            comm_output_bytes=out_bytes,
            comm_total_bytes=in_bytes + out_bytes,
        )
        return self.add(
            parent_id=parent_id,
            name=f"call_llm {self.config.model_label}",
            agent=agent,
            start=start,
            end=start + duration,
            kind="CLIENT",
            attributes=attrs,
            communication=CommunicationInfo(False, in_bytes, out_bytes, in_bytes + out_bytes),
        )

    def tool_span(
        self, parent_id: str, agent: str, tool_name: str, start: int, *, in_process: bool
    ) -> SpanRecord:
        rng = self.rng
        duration = _draw_ms_ns(rng, 50.0, 300.0)
        in_bytes = 128 + int(rng.random() * 256)
        out_bytes = 512 + int(rng.random() * 2048)
        attrs = SpanAttributes(
            operation_name="execute_tool",
            system="simgen",
            agent_name=agent,
            tool_name=tool_name,
            tool_type="FunctionTool",
            tool_call_id=self.new_span_id(),
            tool_call_args=f'{{"query": "task for {agent}"}}',
            tool_response=f"{tool_name} result",
            comm_input_bytes=in_bytes,
            comm_output_bytes=out_bytes,
            comm_total_bytes=in_bytes + out_bytes,
        )
        return self.add(
            parent_id=parent_id,
            name=f"execute_tool {tool_name}",
            agent=agent,
            start=start,
            end=start + duration,
            kind="CLIENT",
            attributes=attrs,
            communication=CommunicationInfo(in_process, in_bytes, out_bytes, in_bytes + out_bytes),
        )


@dataclass(frozen=True)
class _Injection:
    category: str | None
    gold: str | None
    final_response: str
    outcome: str
    outcome_reason: str | None
    judgement: str
    status: SpanStatus


def _plan_injection(category: str | None, task_gold: str) -> _Injection:
    ok = SpanStatus("OK")
    if category is None:
        return _Injection(None, task_gold, f"The answer is {task_gold}.", "success", None, "correct", ok)
    if category == MISSING_OUTPUT:
        return _Injection(category, None, "Done.", "success", None, "wrong", ok)
    if category == WRONG_FACT:
        return _Injection(
            category,
            task_gold,
            "After careful analysis, the final answer is definitely epsilon-0.",
            "success",
            None,
            "wrong",
            ok,
        )
    if category == EMPTY_PREDICTION:
        return _Injection(category, task_gold, "", "failure", "empty output", "wrong", ok)
    if category == EXCEPTION:
        return _Injection(
            category,
            task_gold,
            "",
            "failure",
            "unhandled exception",
            "wrong",
            SpanStatus("ERROR", "RuntimeError: injected failure"),
        )
    if category == TIMEOUT:
        return _Injection(
            category,
            task_gold,
            f"Draft response mentioning {task_gold} pending review.",
            "failure",
            "wall clock limit exceeded",
            "wrong",
            ok,
        )
    if category == OTHER:
        return _Injection(
            category,
            None,
            "The pipeline halted after the relevance guard rejected the draft output.",
            "failure",
            "guard rejected output",
            "wrong",
            ok,
        )
    raise DataError(f"unknown injected category {category!r}")


def _invoke_worker(
    b: _TraceBuilder,
    parent_id: str,
    agent: str,
    t: int,
    *,
    response_text: str,
    in_process: bool = True,
    tool: str | None = None,
    tool_in_process: bool = True,
) -> tuple[SpanRecord, int]:
    """One agent invocation wrapping an optional tool call and one LLM call."""
    rng = b.rng
    invoke_id = b.new_span_id()
    invoke_start = t
    dispatch = _draw_ms_ns(rng, 2.0, 30.0)
    cursor = invoke_start + dispatch
    if tool is not None:
        tool_span = b.tool_span(invoke_id, agent, tool, cursor, in_process=tool_in_process)
        cursor = tool_span.end_time + _draw_ms_ns(rng, 1.0, 5.0)
    llm = b.llm_span(invoke_id, agent, cursor, response_text=response_text)
    cursor = llm.end_time
    wrap = _draw_ms_ns(rng, 2.0, 30.0)
    invoke_end = cursor + wrap
    in_bytes = 256 + int(rng.random() * 512)
    out_bytes = 256 + int(rng.random() * 512)
    invoke = b.add(
        span_id=invoke_id,
        parent_id=parent_id,
        name=f"invoke_agent {agent}",
        agent=agent,
        start=invoke_start,
        end=invoke_end,
        attributes=SpanAttributes(
            operation_name="invoke_agent",
            system="simgen",
            agent_name=agent,
            comm_input_bytes=in_bytes,
            comm_output_bytes=out_bytes,
            comm_total_bytes=in_bytes + out_bytes,
        ),
        communication=CommunicationInfo(in_process, in_bytes, out_bytes, in_bytes + out_bytes),
    )
    return invoke, invoke_end


def _gen_round_robin(
    b: _TraceBuilder, root_id: str, t: int, inj: _Injection, *, shuffled: bool
) -> int:
    order: list[int] = []
    for _ in range(b.config.rounds):
        cycle = list(range(1, b.config.n_agents + 1))
        if shuffled:
            b.rng.shuffle(cycle)
        order.extend(cycle)
    for worker in order:
        _, t = _invoke_worker(
            b,
            root_id,
            f"agent_{worker}",
            t,
            response_text=f"agent_{worker} contribution: {inj.final_response or 'partial draft'}",
        )
        t += _draw_ms_ns(b.rng, 1.0, 10.0)
    return t


def _gen_plan_execute(b: _TraceBuilder, root_id: str, t: int, inj: _Injection) -> int:
    rng = b.rng
    config = b.config
    cap_ns = int(config.wall_clock_limit_s * NS_PER_S)
    executor_answer = (
        f"Executor result: {inj.gold}." if inj.gold is not None else "Executor result: draft."
    )
    iteration = 0
    previous_llm: SpanRecord | None = None
    slow = (20_000.0, 40_000.0) if inj.category == TIMEOUT else (400.0, 2500.0)
    while True:
        iteration += 1
        retry = (iteration - 1, previous_llm.span_id) if previous_llm is not None else None
        plan = b.llm_span(
            root_id,
            "planner",
            t,
            response_text=f"plan iteration {iteration}",
            retry=retry,
            duration_range_ms=slow,
        )
        previous_llm = plan
        t = plan.end_time + _draw_ms_ns(rng, 1.0, 10.0)
        _, t = _invoke_worker(
            b,
            root_id,
            "executor",
            t,
            response_text=executor_answer,
            in_process=False,
            tool="web_search" if config.tools_enabled else None,
            tool_in_process=False,
        )
        t += _draw_ms_ns(rng, 1.0, 10.0)
        if inj.category == TIMEOUT:
            # Non-terminating replan loop: the replanner keeps rejecting the
            # executor's (correct) result until the wall-clock cap truncates it.
            if t - b.base_ns >= cap_ns:
                return t
            continue
        if iteration >= 8 or rng.random() >= config.retry_prob:
            return t


def _gen_tree_search(b: _TraceBuilder, root_id: str, t: int, inj: _Injection) -> int:
    rng = b.rng
    policy = b.llm_span(root_id, "searcher", t, response_text="root expansion policy")
    t = policy.end_time + _draw_ms_ns(rng, 1.0, 10.0)
    frontier = 1
    for _ in range(3):
        expansions = 0
        for _ in range(frontier):
            expansions += 2 if rng.random() < b.config.branch_prob else 1
        expansions = min(expansions, 4)
        for _ in range(expansions):
            _, t = _invoke_worker(b, root_id, "expander", t, response_text="candidate branch")
            t += _draw_ms_ns(rng, 1.0, 5.0)
            _, t = _invoke_worker(
                b, root_id, "evaluator", t, response_text=f"evaluation mentions {inj.gold or 'no gold'}"
            )
            t += _draw_ms_ns(rng, 1.0, 5.0)
        frontier = expansions
    return t


def _gen_corrective_rag(b: _TraceBuilder, root_id: str, t: int, inj: _Injection) -> int:
    rng = b.rng
    config = b.config

    retrieve_id = b.new_span_id()
    retrieve_start = t
    cursor = retrieve_start + _draw_ms_ns(rng, 2.0, 20.0)
    vector = b.tool_span(retrieve_id, "retriever", "vector_store", cursor, in_process=True)
    cursor = vector.end_time + _draw_ms_ns(rng, 1.0, 5.0)

    grade_id = b.new_span_id()
    grade_start = cursor
    cursor = grade_start + _draw_ms_ns(rng, 2.0, 10.0)
    grade_llm = b.llm_span(grade_id, "grader", cursor, response_text="grading retrieved evidence")
    cursor = grade_llm.end_time + _draw_ms_ns(rng, 1.0, 5.0)

    if rng.random() < config.retry_prob:
        second_retrieve_id = b.new_span_id()
        second_start = cursor
        inner = b.tool_span(second_retrieve_id, "retriever", "vector_store", cursor + _draw_ms_ns(rng, 1.0, 10.0), in_process=True)
        second_end = inner.end_time + _draw_ms_ns(rng, 1.0, 10.0)
        b.add(
            span_id=second_retrieve_id,
            parent_id=grade_id,
            name="invoke_agent retriever",
            agent="retriever",
            start=second_start,
            end=second_end,
            attributes=SpanAttributes(operation_name="invoke_agent", system="simgen", agent_name="retriever"),
            communication=CommunicationInfo(True, 128, 128, 256),
        )
        cursor = second_end + _draw_ms_ns(rng, 1.0, 5.0)

    if config.tools_enabled:
        search_id = b.new_span_id()
        search_start = cursor
        web = b.tool_span(search_id, "web_searcher", "web_search", cursor + _draw_ms_ns(rng, 1.0, 10.0), in_process=False)
        search_end = web.end_time + _draw_ms_ns(rng, 1.0, 10.0)
        b.add(
            span_id=search_id,
            parent_id=grade_id,
            name="invoke_agent web_searcher",
            agent="web_searcher",
            start=search_start,
            end=search_end,
            attributes=SpanAttributes(operation_name="invoke_agent", system="simgen", agent_name="web_searcher"),
            communication=CommunicationInfo(False, 384, 4096, 4480),
        )
        cursor = search_end + _draw_ms_ns(rng, 1.0, 5.0)

    generate_id = b.new_span_id()
    generate_start = cursor
    gen_llm = b.llm_span(
        generate_id, "generator", cursor + _draw_ms_ns(rng, 1.0, 10.0), response_text=inj.final_response or "draft"
    )
    generate_end = gen_llm.end_time + _draw_ms_ns(rng, 1.0, 10.0)
    b.add(
        span_id=generate_id,
        parent_id=grade_id,
        name="invoke_agent generator",
        agent="generator",
        start=generate_start,
        end=generate_end,
        attributes=SpanAttributes(operation_name="invoke_agent", system="simgen", agent_name="generator"),
        communication=CommunicationInfo(True, 512, 2048, 2560),
    )

    grade_end = generate_end + _draw_ms_ns(rng, 1.0, 10.0)
    b.add(
        span_id=grade_id,
        parent_id=retrieve_id,
        name="invoke_agent grader",
        agent="grader",
        start=grade_start,
        end=grade_end,
        attributes=SpanAttributes(operation_name="invoke_agent", system="simgen", agent_name="grader"),
        communication=CommunicationInfo(True, 256, 256, 512),
    )
    retrieve_end = grade_end + _draw_ms_ns(rng, 1.0, 10.0)
    b.add(
        span_id=retrieve_id,
        parent_id=root_id,
        name="invoke_agent retriever",
        agent="retriever",
        start=retrieve_start,
        end=retrieve_end,
        attributes=SpanAttributes(operation_name="invoke_agent", system="simgen", agent_name="retriever"),
        communication=CommunicationInfo(True, 256, 256, 512),
    )
    return retrieve_end + _draw_ms_ns(rng, 1.0, 10.0)


_ROOT_AGENT = {
    "round_robin": "orchestrator",
    "shuffled_fixed_edges": "orchestrator",
    "plan_execute": "planner",
    "tree_search": "searcher",
    "corrective_rag": "rag_pipeline",
}


def generate_run(
    config: SimConfig, run_index: int, sub_seed: int, injected: str | None
) -> tuple[RunManifest, list[SpanRecord], str]:
    """Build one run (manifest, spans, resources CSV text), fully deterministic."""
    rng = random.Random(sub_seed)
    tools_tag = "ton" if config.tools_enabled else "toff"
    run_id = (
        f"{config.effective_example_name}-{config.model_label}-{tools_tag}"
        f"-s{config.seed}-r{run_index:03d}"
    )
    b = _TraceBuilder(rng, config, run_id)
    task_gold = f"gold-{run_index:03d}"
    inj = _plan_injection(injected, task_gold)

    root_id = b.new_span_id()
    root_start = b.base_ns
    t = root_start + _draw_ms_ns(rng, 5.0, 50.0)
    if config.architecture in ("round_robin", "shuffled_fixed_edges"):
        t = _gen_round_robin(b, root_id, t, inj, shuffled=config.architecture == "shuffled_fixed_edges")
    elif config.architecture == "plan_execute":
        t = _gen_plan_execute(b, root_id, t, inj)
    elif config.architecture == "tree_search":
        t = _gen_tree_search(b, root_id, t, inj)
    else:
        t = _gen_corrective_rag(b, root_id, t, inj)

    root_end = t + _draw_ms_ns(rng, 5.0, 50.0)
    cap_ns = int(config.wall_clock_limit_s * NS_PER_S)
    if inj.category == TIMEOUT and root_end - root_start < cap_ns:
        root_end = root_start + cap_ns + _draw_ms_ns(rng, 100.0, 5000.0)

    root_attrs = SpanAttributes(
        agent_name=_ROOT_AGENT[config.architecture],
        llm_response=inj.final_response,
        run_outcome=inj.outcome,
        run_outcome_reason=inj.outcome_reason,
        run_judgement=inj.judgement,
        run_judgement_reason="synthetic ground truth",
        failure_category="guard" if inj.category == OTHER else None,
        failure_reason="relevance guard rejected output" if inj.category == OTHER else None,
        output_useless=True if inj.category in (MISSING_OUTPUT, OTHER) else None,
        output_useless_reason="insufficient detail" if inj.category == MISSING_OUTPUT else None,
    )
    b.add(
        span_id=root_id,
        parent_id=None,
        name=f"run {config.effective_example_name}",
        agent=_ROOT_AGENT[config.architecture],
        start=root_start,
        end=root_end,
        kind="SERVER",
        status=inj.status,
        attributes=root_attrs,
    )

    cpu_peak = float(f"{20.0 + 50.0 * rng.random():.1f}")
    rss_peak = (150 + int(300 * rng.random())) * 1024 * 1024
    resources_csv = _resources_csv(rng, root_start, root_end, cpu_peak, rss_peak)

    manifest = RunManifest(
        run_id=run_id,
        example_name=config.effective_example_name,
        framework="simgen",
        application_field="synthetic",
        interaction_type=_INTERACTION_TYPE[config.architecture],
        model_label=config.model_label,
        tools_enabled=config.tools_enabled,
        suite_tags=("synthetic", config.architecture),
        seed=sub_seed,
        wall_clock_limit_s=config.wall_clock_limit_s,
        token_cap=config.token_cap,
        trace_path="run.trace.json",
        resource_samples_path="run.resources.csv",
        gold_answer=inj.gold,
        task_id=f"task-{run_index:03d}",
        sim_info={
            "synthetic": True,
            "generator": "agenttrace.simgen",
            "run_index": run_index,
            "injected_failure": injected,
            "cpu_peak": cpu_peak,
            "rss_peak": rss_peak,
            "config": _config_snapshot(config),
        },
    )
    return manifest, b.spans, resources_csv


def _resources_csv(
    rng: random.Random, start_ns: int, end_ns: int, cpu_peak: float, rss_peak: int
) -> str:
    n_samples = max(3, min(1200, (end_ns - start_ns) // _RESOURCE_INTERVAL_NS + 1))
    peak_index = 1 + int(rng.random() * (n_samples - 1))
    lines = ["timestamp_ns,cpu_percent,rss_bytes"]
    for i in range(n_samples):
        ts = start_ns + i * _RESOURCE_INTERVAL_NS
        if i == peak_index:
            cpu, rss = cpu_peak, rss_peak
        else:
            cpu = float(f"{max(0.0, (cpu_peak - 0.1) * rng.random()):.1f}")
            rss = int(rss_peak * (0.4 + 0.55 * rng.random()))
        lines.append(f"{ts},{cpu:.1f},{rss}")
    return "\n".join(lines) + "\n"


def _config_snapshot(config: SimConfig) -> dict[str, Any]:
    return {
        "architecture": config.architecture,
        "n_agents": config.n_agents,
        "n_runs": config.n_runs,
        "seed": config.seed,
        "model_label": config.model_label,
        "tools_enabled": config.tools_enabled,
        "rounds": config.rounds,
        "branch_prob": config.branch_prob,
        "retry_prob": config.retry_prob,
        "response_tokens": list(config.response_tokens),
        "token_cap": config.token_cap,
        "wall_clock_limit_s": config.wall_clock_limit_s,
        "failure_injection": dict(config.failure_injection),
        "example_name": config.example_name,
    }


def _config_from_snapshot(snapshot: Mapping[str, Any]) -> SimConfig:
    data = dict(snapshot)
    data["response_tokens"] = tuple(data.get("response_tokens", (200, 120)))
    return SimConfig(**data)


def generate_corpus(config: SimConfig, out_dir: Path | str) -> list[Path]:
    """Write n_runs run directories under out_dir; returns manifest paths."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create corpus directory {out}: {exc}") from exc
    assignment = _allocate_injections(config)
    manifest_paths: list[Path] = []
    for k in range(config.n_runs):
        manifest, spans, resources_csv = generate_run(config, k, _sub_seed(config.seed, k), assignment[k])
        run_dir = out / manifest.run_id
        try:
            run_dir.mkdir(parents=True, exist_ok=True)
            (run_dir / manifest.trace_path).write_bytes(serialize_trace(spans))
            assert manifest.resource_samples_path is not None
            (run_dir / manifest.resource_samples_path).write_text(resources_csv, encoding="utf-8")
            manifest_path = run_dir / "run.manifest.json"
            manifest_path.write_text(
                json.dumps(manifest_to_dict(manifest), indent=2, sort_keys=True) + "\n",
                encoding="utf-8",
            )
        except OSError as exc:
            raise IoError(f"cannot write run {manifest.run_id}: {exc}") from exc
        manifest_paths.append(manifest_path)
    return manifest_paths


def replay_check(manifest_path: Path | str) -> bool:
    """Regenerate a run from its recorded sub-seed; True iff byte-identical."""
    manifest_path = Path(manifest_path)
    manifest = load_manifest(manifest_path)
    if manifest.seed is None:
        raise SeedMissing(f"manifest {manifest_path} has no recorded seed")
    info = manifest.sim_info
    if not info or "config" not in info:
        raise SeedMissing(f"manifest {manifest_path} lacks generator config")
    config = _config_from_snapshot(info["config"])
    _, spans, resources_csv = generate_run(
        config, int(info.get("run_index", 0)), manifest.seed, info.get("injected_failure")
    )
    trace_file = manifest_path.parent / manifest.trace_path
    if trace_file.read_bytes() != serialize_trace(spans):
        return False
    if manifest.resource_samples_path is not None:
        resources_file = manifest_path.parent / manifest.resource_samples_path
        if resources_file.read_text(encoding="utf-8") != resources_csv:
            return False
    return True
