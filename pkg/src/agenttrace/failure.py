"""Run-level failure classification and composition analysis.

Classification is online-first: runtime execution signals (root span error
status, wall-clock cap breach, empty final response) take precedence over any
semantic judge, because an offline judge that only sees the final response can
mislabel a timed-out run whose trace happens to contain the correct answer.

Run-level categories follow the six-way taxonomy; the two categories that
complete without any system-visible error (missing/underspecified output and
wrong fact/entity) are the silent "gray" failures, everything else is
explicit. Span-level failure categories (guard/quality/system/timeout/
upstream) are collected as-is and kept orthogonal to the run-level taxonomy.
"""

from __future__ import annotations

import json
import urllib.error
import urllib.request
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Protocol, Sequence

from .errors import JudgeUnavailable, MalformedJudgeReply, MismatchedRunSets
from .ingest import Run
from .metrics import is_timeout

MISSING_OUTPUT = "missing_or_underspecified_output"
WRONG_FACT = "wrong_fact_or_entity"
EMPTY_PREDICTION = "empty_prediction"
EXCEPTION = "exception"
TIMEOUT = "timeout"
OTHER = "other"

FAILURE_CATEGORIES = (MISSING_OUTPUT, WRONG_FACT, EMPTY_PREDICTION, EXCEPTION, TIMEOUT, OTHER)
SILENT_CATEGORIES = frozenset({MISSING_OUTPUT, WRONG_FACT})

SILENT = "silent"
EXPLICIT = "explicit"

DEFAULT_MIN_RESPONSE_LENGTH = 20


@dataclass(frozen=True)
class Judgement:
    verdict: str  # correct | wrong | unknown
    category: str | None = None
    reason: str = ""

    def __post_init__(self) -> None:
        if self.verdict not in ("correct", "wrong", "unknown"):
            raise ValueError(f"bad verdict {self.verdict!r}")
        if (self.category is not None) != (self.verdict == "wrong"):
            raise ValueError("category must be present iff verdict is wrong")


class Judge(Protocol):
    judge_id: str

    def judge(self, final_response: str, gold: str | None) -> Judgement: ...


@dataclass(frozen=True)
class FailureRecord:
    run_id: str
    failed: bool
    category: str | None
    failure_class: str
    judge_id: str
    reason: str
    verdict: str = "unknown"
    span_failure_categories: Mapping[str, int] = field(default_factory=dict)


@dataclass(frozen=True)
class CompositionReport:
    n_failures: int
    percentages: Mapping[str, float]
    silent_pct: float
    explicit_pct: float


@dataclass(frozen=True)
class JudgeAgreement:
    judge_ids: tuple[str, ...]
    verdict_agreement: tuple[tuple[float, ...], ...]
    category_agreement: tuple[tuple[float, ...], ...]


def _normalize(text: str) -> str:
    return " ".join(text.casefold().split())


def rule_judge(
    final_response: str,
    gold: str | None,
    min_response_length: int = DEFAULT_MIN_RESPONSE_LENGTH,
) -> Judgement:
    """Deterministic offline judge: substring containment against the gold answer.

    Empty response -> wrong/empty_prediction. With a gold answer: containment
    decides correct vs wrong/wrong_fact_or_entity. Without one: a too-short
    response is wrong/missing_or_underspecified_output, anything else is
    unknown.
    """
    if not final_response.strip():
        return Judgement("wrong", EMPTY_PREDICTION, "empty or whitespace-only response")
    if gold is not None:
        if _normalize(gold) in _normalize(final_response):
            return Judgement("correct", reason="gold answer contained in response")
        return Judgement("wrong", WRONG_FACT, "gold answer not contained in response")
    if len(final_response.strip()) < min_response_length:
        return Judgement(
            "wrong", MISSING_OUTPUT, f"response shorter than {min_response_length} chars, no gold answer"
        )
    return Judgement("unknown", reason="no gold answer; response not obviously deficient")


@dataclass(frozen=True)
class RuleJudge:
    judge_id: str = "rule"
    min_response_length: int = DEFAULT_MIN_RESPONSE_LENGTH

    def judge(self, final_response: str, gold: str | None) -> Judgement:
        return rule_judge(final_response, gold, self.min_response_length)


@dataclass(frozen=True)
class LlmJudgeClient:
    """HTTP judge: POSTs response/gold/taxonomy, expects a structured verdict.

    Wire format: request {"final_response", "gold_answer", "taxonomy"} and
    reply {"verdict", "category"?, "reason"?}. Malformed replies map to an
    unknown judgement; transport failures raise JudgeUnavailable.
    """

    endpoint: str
    model_label: str
    timeout_s: float = 30.0

    @property
    def judge_id(self) -> str:
        return f"external:{self.model_label}"

    def judge(self, final_response: str, gold: str | None) -> Judgement:
        payload = json.dumps(
            {
                "final_response": final_response,
                "gold_answer": gold,
                "taxonomy": list(FAILURE_CATEGORIES),
            }
        ).encode("utf-8")
        request = urllib.request.Request(
            self.endpoint, data=payload, headers={"Content-Type": "application/json"}
        )
        try:
            with urllib.request.urlopen(request, timeout=self.timeout_s) as response:
                body = response.read()
        except (urllib.error.URLError, OSError) as exc:
            raise JudgeUnavailable(f"judge endpoint {self.endpoint} unreachable: {exc}") from exc
        try:
            return self._parse_reply(body)
        except MalformedJudgeReply as exc:
            return Judgement("unknown", reason=f"malformed judge reply: {exc}")

    @staticmethod
    def _parse_reply(body: bytes) -> Judgement:
        try:
            reply = json.loads(body.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise MalformedJudgeReply(str(exc)) from exc
        if not isinstance(reply, dict) or "verdict" not in reply:
            raise MalformedJudgeReply("reply is not an object with a 'verdict' key")
        verdict = reply["verdict"]
        if verdict not in ("correct", "wrong", "unknown"):
            raise MalformedJudgeReply(f"unknown verdict {verdict!r}")
        category = reply.get("category")
        if verdict == "wrong":
            if category not in FAILURE_CATEGORIES:
                raise MalformedJudgeReply(f"wrong verdict with bad category {category!r}")
        else:
            category = None
        return Judgement(verdict, category, str(reply.get("reason", "")))


def llm_judge_client(endpoint: str, model_label: str) -> LlmJudgeClient:
    return LlmJudgeClient(endpoint=endpoint, model_label=model_label)


def final_response_text(run: Run) -> str:
    """The run's final answer: root span response text, else the last LLM call's."""
    root_response = run.root_span.attributes.llm_response
    if root_response is not None:
        return root_response
    llm_spans = [s for s in run.spans if s.attributes.operation_name == "call_llm"]
    for span in sorted(llm_spans, key=lambda s: (s.end_time, s.span_id), reverse=True):
        if span.attributes.llm_response is not None:
            return span.attributes.llm_response
    return ""


def _span_failure_categories(run: Run) -> dict[str, int]:
    counter: Counter[str] = Counter()
    for span in run.spans:
        category = span.attributes.failure_category
        if category is not None:
            counter[category] += 1
    return dict(sorted(counter.items()))


def failure_class_of(category: str | None) -> str:
    return SILENT if category in SILENT_CATEGORIES else EXPLICIT


def classify_run(run: Run, judge: Judge) -> FailureRecord:
    """Classify one run against the taxonomy, runtime signals first.

    An unreachable judge yields an unknown (non-failed) record rather than
    dropping the run. A judge that cannot attribute a run the runtime itself
    reported as failed yields the catch-all "other" category.
    """
    span_categories = _span_failure_categories(run)

    def record(
        failed: bool, category: str | None, verdict: str, reason: str, judge_id: str
    ) -> FailureRecord:
        return FailureRecord(
            run_id=run.run_id,
            failed=failed,
            category=category if failed else None,
            failure_class=failure_class_of(category if failed else None),
            judge_id=judge_id,
            reason=reason,
            verdict=verdict,
            span_failure_categories=span_categories,
        )

    if run.root_span.status.status_code == "ERROR":
        description = run.root_span.status.description or "root span status ERROR"
        return record(True, EXCEPTION, "wrong", description, "online")
    if is_timeout(run):
        return record(
            True,
            TIMEOUT,
            "wrong",
            f"root duration reached wall-clock cap ({run.manifest.wall_clock_limit_s}s)",
            "online",
        )
    final_response = final_response_text(run)
    if not final_response.strip():
        return record(True, EMPTY_PREDICTION, "wrong", "empty final response", "online")

    try:
        judgement = judge.judge(final_response, run.manifest.gold_answer)
    except JudgeUnavailable as exc:
        return record(False, None, "unknown", f"judge unavailable: {exc}", judge.judge_id)

    if judgement.verdict == "correct":
        return record(False, None, "correct", judgement.reason, judge.judge_id)
    if judgement.verdict == "wrong":
        return record(True, judgement.category, "wrong", judgement.reason, judge.judge_id)
    if run.outcome == "failure":
        reason = judgement.reason or "runtime reported failure without attributable category"
        return record(True, OTHER, "wrong", f"runtime failure, unattributed: {reason}", judge.judge_id)
    return record(False, None, "unknown", judgement.reason, judge.judge_id)


def composition(records: Sequence[FailureRecord]) -> CompositionReport:
    """Failure composition as percentages of all failed records."""
    failed = [r for r in records if r.failed]
    if not failed:
        return CompositionReport(
            n_failures=0,
            percentages={category: 0.0 for category in FAILURE_CATEGORIES},
            silent_pct=0.0,
            explicit_pct=0.0,
        )
    counts = Counter(r.category for r in failed)
    n = len(failed)
    percentages = {category: 100.0 * counts.get(category, 0) / n for category in FAILURE_CATEGORIES}
    silent = sum(1 for r in failed if r.failure_class == SILENT)
    return CompositionReport(
        n_failures=n,
        percentages=percentages,
        silent_pct=100.0 * silent / n,
        explicit_pct=100.0 * (n - silent) / n,
    )


def judge_agreement(records_by_judge: Mapping[str, Sequence[FailureRecord]]) -> JudgeAgreement:
    """Pairwise agreement on failed-ness, and on categories among commonly-failed runs."""
    judge_ids = tuple(records_by_judge.keys())
    indexed: dict[str, dict[str, FailureRecord]] = {}
    run_ids: set[str] | None = None
    for judge_id, records in records_by_judge.items():
        by_run = {r.run_id: r for r in records}
        indexed[judge_id] = by_run
        ids = set(by_run)
        if run_ids is None:
            run_ids = ids
        elif ids != run_ids:
            raise MismatchedRunSets(
                f"judge {judge_id!r} covers {len(ids)} runs, expected the same "
                f"{len(run_ids)} run ids as the others"
            )
    assert run_ids is not None
    ordered_runs = sorted(run_ids)

    size = len(judge_ids)
    verdict_matrix = [[1.0] * size for _ in range(size)]
    category_matrix = [[1.0] * size for _ in range(size)]
    for i in range(size):
        for j in range(i + 1, size):
            a, b = indexed[judge_ids[i]], indexed[judge_ids[j]]
            if ordered_runs:
                same_failed = sum(1 for rid in ordered_runs if a[rid].failed == b[rid].failed)
                verdict_value = same_failed / len(ordered_runs)
            else:
                verdict_value = 1.0
            both_failed = [rid for rid in ordered_runs if a[rid].failed and b[rid].failed]
            if both_failed:
                same_category = sum(1 for rid in both_failed if a[rid].category == b[rid].category)
                category_value = same_category / len(both_failed)
            else:
                category_value = 1.0
            verdict_matrix[i][j] = verdict_matrix[j][i] = verdict_value
            category_matrix[i][j] = category_matrix[j][i] = category_value
    return JudgeAgreement(
        judge_ids=judge_ids,
        verdict_agreement=tuple(tuple(row) for row in verdict_matrix),
        category_agreement=tuple(tuple(row) for row in category_matrix),
    )
