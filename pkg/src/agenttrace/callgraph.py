"""Per-run directed agent-interaction graphs.

Each run yields a graph with an edge set (which interactions occurred) and a
linearized edge sequence (the order they occurred in). Edge attribution uses
the nearest ancestor span with a *different* agent name, because frameworks
interpose plumbing spans that share the caller's agent name.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from .ingest import Run
from .trace_model import SpanRecord

AGENT = "agent"
TOOL = "tool"
LLM = "llm"
DEFAULT_INCLUDE = frozenset({AGENT})


@dataclass(frozen=True, order=True)
class AgentNode:
    name: str
    node_kind: str = AGENT


Edge = tuple[AgentNode, AgentNode]


@dataclass(frozen=True)
class CallEdge:
    src: AgentNode
    dst: AgentNode
    count: int


@dataclass(frozen=True)
class CallGraph:
    run_id: str
    nodes: frozenset[AgentNode]
    edges: tuple[CallEdge, ...]
    sequence: tuple[Edge, ...]

    def edge_set(self) -> frozenset[Edge]:
        """The unweighted edge set (multiplicity dropped)."""
        return frozenset((e.src, e.dst) for e in self.edges)


def nearest_distinct_ancestor(
    span: SpanRecord, by_id: dict[str, SpanRecord]
) -> SpanRecord | None:
    """Walk parents until an ancestor with a different agent_name is found."""
    seen: set[str] = {span.span_id}
    parent_id = span.parent_span_id
    while parent_id is not None and parent_id in by_id and parent_id not in seen:
        parent = by_id[parent_id]
        seen.add(parent_id)
        if parent.agent_name and parent.agent_name != span.agent_name:
            return parent
        parent_id = parent.parent_span_id
    return None


def build_call_graph(run: Run, include: frozenset[str] = DEFAULT_INCLUDE) -> CallGraph:
    """Reconstruct the directed interaction graph of one run.

    Agent edges come from invoke_agent spans (nearest distinct-agent ancestor
    -> invoked agent). With "tool"/"llm" in `include`, execute_tool and
    call_llm spans add agent->tool and agent->model edges. The sequence is
    ordered by child span start_time, ties broken by span_id.
    """
    by_id = {s.span_id: s for s in run.spans}
    timed: list[tuple[int, str, Edge]] = []
    for span in run.spans:
        op = span.attributes.operation_name
        edge: Edge | None = None
        if op == "invoke_agent" and AGENT in include:
            caller = nearest_distinct_ancestor(span, by_id)
            if caller is not None and span.agent_name:
                edge = (AgentNode(caller.agent_name), AgentNode(span.agent_name))
        elif op == "execute_tool" and TOOL in include:
            tool_name = span.attributes.tool_name or span.name
            if span.agent_name and tool_name:
                edge = (AgentNode(span.agent_name), AgentNode(tool_name, TOOL))
        elif op == "call_llm" and LLM in include:
            model = span.attributes.request_model or "unknown-model"
            if span.agent_name:
                edge = (AgentNode(span.agent_name), AgentNode(model, LLM))
        if edge is not None:
            timed.append((span.start_time, span.span_id, edge))

    timed.sort(key=lambda item: (item[0], item[1]))
    sequence = tuple(edge for _, _, edge in timed)
    counts = Counter(sequence)
    edges = tuple(CallEdge(src, dst, n) for (src, dst), n in sorted(counts.items()))
    nodes = frozenset(node for src, dst in counts for node in (src, dst))
    return CallGraph(run_id=run.manifest.run_id, nodes=nodes, edges=edges, sequence=sequence)


def edge_multiplicities(graph: CallGraph) -> dict[Edge, int]:
    """Occurrence count per distinct (src, dst) pair."""
    return {(e.src, e.dst): e.count for e in graph.edges}


_DOT_SHAPES = {AGENT: "box", TOOL: "ellipse", LLM: "hexagon"}


def to_dot(graph: CallGraph) -> str:
    """Graphviz DOT rendering of the graph, deterministic ordering."""
    lines = [f'digraph "{graph.run_id}" {{', "  rankdir=LR;"]
    for node in sorted(graph.nodes):
        shape = _DOT_SHAPES.get(node.node_kind, "box")
        lines.append(f'  "{node.node_kind}:{node.name}" [label="{node.name}" shape={shape}];')
    for edge in graph.edges:
        label = f' [label="{edge.count}"]' if edge.count > 1 else ""
        lines.append(
            f'  "{edge.src.node_kind}:{edge.src.name}" -> '
            f'"{edge.dst.node_kind}:{edge.dst.name}"{label};'
        )
    lines.append("}")
    return "\n".join(lines) + "\n"
