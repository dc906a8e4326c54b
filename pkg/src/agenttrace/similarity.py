"""Run-to-run call-graph similarity and its group aggregation conventions.

Two metrics over per-run graphs:

* jaccard: edge-set overlap (intersection size over union size), order
  agnostic. An empty union counts as 0.
* lcs: longest-common-subsequence length of the ordered edge sequences,
  normalized by the longer length. Two empty sequences count as 1, exactly
  one empty as 0.

Within a group, similarity aggregates as the mean over all unordered run
pairs (0 when fewer than two runs). Across two groups it aggregates as the
median over all cross pairs.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Hashable, Mapping, Sequence

from .callgraph import CallGraph
from .errors import SequenceTooLong

JACCARD = "jaccard"
LCS = "lcs"
METRICS = (JACCARD, LCS)

MEAN_WITHIN = "pairwise_mean_within"
MEDIAN_CROSS = "pairwise_median_cross"

MAX_SEQUENCE_LENGTH = 10_000


@dataclass(frozen=True)
class SimilarityValue:
    value: float
    metric: str

    def __post_init__(self) -> None:
        if not 0.0 <= self.value <= 1.0:
            raise ValueError(f"similarity out of [0, 1]: {self.value}")


@dataclass(frozen=True)
class SimilarityMatrix:
    labels: tuple[str, ...]
    values: tuple[tuple[float, ...], ...]
    metric: str
    aggregation: str

    def to_json(self) -> str:
        return json.dumps(
            {
                "labels": list(self.labels),
                "metric": self.metric,
                "aggregation": self.aggregation,
                "values": [list(row) for row in self.values],
            },
            indent=2,
        ) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["", *self.labels])
        for label, row in zip(self.labels, self.values):
            writer.writerow([label, *[repr(v) for v in row]])
        return buf.getvalue()


def jaccard(edges_i: frozenset, edges_j: frozenset) -> SimilarityValue:
    """Edge-set overlap; 0 when both sets are empty."""
    union = edges_i | edges_j
    if not union:
        return SimilarityValue(0.0, JACCARD)
    return SimilarityValue(len(edges_i & edges_j) / len(union), JACCARD)


def lcs_length(seq_i: Sequence[Hashable], seq_j: Sequence[Hashable]) -> int:
    """Longest-common-subsequence length, O(n*m) time, O(min(n,m)) space."""
    if len(seq_i) > MAX_SEQUENCE_LENGTH or len(seq_j) > MAX_SEQUENCE_LENGTH:
        raise SequenceTooLong(
            f"sequence lengths {len(seq_i)}/{len(seq_j)} exceed cap {MAX_SEQUENCE_LENGTH}"
        )
    if len(seq_j) > len(seq_i):
        seq_i, seq_j = seq_j, seq_i
    prev = [0] * (len(seq_j) + 1)
    for x in seq_i:
        row = [0]
        for j, y in enumerate(seq_j, start=1):
            if x == y:
                row.append(prev[j - 1] + 1)
            else:
                row.append(max(prev[j], row[j - 1]))
        prev = row
    return prev[-1]


def lcs_similarity(seq_i: Sequence[Hashable], seq_j: Sequence[Hashable]) -> SimilarityValue:
    """Normalized LCS; both empty -> 1, exactly one empty -> 0."""
    if not seq_i and not seq_j:
        return SimilarityValue(1.0, LCS)
    if not seq_i or not seq_j:
        return SimilarityValue(0.0, LCS)
    return SimilarityValue(lcs_length(seq_i, seq_j) / max(len(seq_i), len(seq_j)), LCS)


def graph_similarity(a: CallGraph, b: CallGraph, metric: str) -> float:
    if metric == JACCARD:
        return jaccard(a.edge_set(), b.edge_set()).value
    if metric == LCS:
        return lcs_similarity(a.sequence, b.sequence).value
    raise ValueError(f"unknown metric {metric!r}")


def pairwise_average(runs: Sequence[CallGraph], metric: str) -> float:
    """Mean similarity over all unordered run pairs; 0 when fewer than 2 runs."""
    n = len(runs)
    if n < 2:
        return 0.0
    total = 0.0
    pairs = 0
    for i in range(n):
        for j in range(i + 1, n):
            total += graph_similarity(runs[i], runs[j], metric)
            pairs += 1
    return total / pairs


def _median(values: list[float]) -> float:
    values = sorted(values)
    n = len(values)
    mid = n // 2
    if n % 2 == 1:
        return values[mid]
    return (values[mid - 1] + values[mid]) / 2.0


def cross_group_aggregate(
    group_a: Sequence[CallGraph], group_b: Sequence[CallGraph], metric: str
) -> float:
    """Median similarity over all cross pairs; within-group pairs when a == b.

    Returns 0 when no pairs exist (e.g. a singleton group compared with
    itself).
    """
    same = group_a is group_b or list(group_a) == list(group_b)
    values: list[float] = []
    if same:
        for i in range(len(group_a)):
            for j in range(i + 1, len(group_a)):
                values.append(graph_similarity(group_a[i], group_a[j], metric))
    else:
        for a in group_a:
            for b in group_b:
                values.append(graph_similarity(a, b, metric))
    if not values:
        return 0.0
    return _median(values)


def similarity_matrix(
    groups: Mapping[str, Sequence[CallGraph]],
    metric: str,
    aggregation: str = MEDIAN_CROSS,
) -> SimilarityMatrix:
    """Square matrix of group-to-group similarity, symmetric by construction.

    Off-diagonal cells are cross-group medians; the diagonal is the
    within-group mean under MEAN_WITHIN, else the within-group median.
    """
    if aggregation not in (MEAN_WITHIN, MEDIAN_CROSS):
        raise ValueError(f"unknown aggregation {aggregation!r}")
    labels = tuple(groups.keys())
    size = len(labels)
    cells = [[0.0] * size for _ in range(size)]
    for i in range(size):
        runs_i = groups[labels[i]]
        if aggregation == MEAN_WITHIN:
            cells[i][i] = pairwise_average(runs_i, metric)
        else:
            cells[i][i] = cross_group_aggregate(runs_i, runs_i, metric)
        for j in range(i + 1, size):
            value = cross_group_aggregate(runs_i, groups[labels[j]], metric)
            cells[i][j] = value
            cells[j][i] = value
    for row in cells:
        for value in row:
            if math.isnan(value) or not 0.0 <= value <= 1.0:
                raise AssertionError(f"similarity out of bounds: {value}")
    return SimilarityMatrix(
        labels=labels,
        values=tuple(tuple(row) for row in cells),
        metric=metric,
        aggregation=aggregation,
    )
