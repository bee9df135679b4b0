"""Reasoning-topology graphs: representation, sanitization, and structural scoring.

A reasoning topology is a small directed graph whose nodes are atomic
sub-claims (premises, intermediates, one conclusion) and whose edges carry
support or contradiction relations. This module computes the structural
features (path coverage, cycle count, dangling nodes, contradiction level)
and the linear topology score built from them.
"""

from __future__ import annotations

import itertools
import logging
import re
from dataclasses import dataclass

import networkx as nx

logger = logging.getLogger(__name__)

NODE_KINDS = ("premise", "intermediate", "conclusion")
EDGE_RELATIONS = ("support", "contradict")

CYCLE_CAP = 1000
EXACT_FAS_MAX_EDGES = 12
EXACT_FAS_MAX_NODES = 8


class GraphError(ValueError):
    """Invalid reasoning graph."""


class EmptyGraphError(GraphError):
    """Graph has no nodes."""


class DegenerateGraphError(GraphError):
    """Graph lacks the premises/conclusion needed for path analysis."""


class ConfigError(ValueError):
    """Invalid scoring configuration."""


_PUNCT = re.compile(r"[^\w\s]")
_WS = re.compile(r"\s+")


def normalize_text(text: str) -> str:
    """Case-fold, strip punctuation, and collapse whitespace."""
    return _WS.sub(" ", _PUNCT.sub(" ", text.casefold())).strip()


@dataclass(frozen=True)
class Node:
    id: str
    text: str
    kind: str
    p_v: float

    def __post_init__(self):
        if self.kind not in NODE_KINDS:
            raise GraphError(f"node {self.id!r}: unknown kind {self.kind!r}")
        if not 0.0 <= self.p_v <= 1.0:
            raise GraphError(f"node {self.id!r}: p_v={self.p_v} outside [0, 1]")


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    relation: str
    contradiction_signal: float = 0.0

    def __post_init__(self):
        if self.relation not in EDGE_RELATIONS:
            raise GraphError(f"edge {self.src}->{self.dst}: unknown relation {self.relation!r}")
        if not 0.0 <= self.contradiction_signal <= 1.0:
            raise GraphError(
                f"edge {self.src}->{self.dst}: contradiction_signal="
                f"{self.contradiction_signal} outside [0, 1]"
            )


@dataclass(frozen=True)
class ReasoningGraph:
    nodes: tuple[Node, ...]
    edges: tuple[Edge, ...]

    def __post_init__(self):
        ids = [n.id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise GraphError("duplicate node ids")
        known = set(ids)
        for e in self.edges:
            if e.src not in known or e.dst not in known:
                raise GraphError(f"edge {e.src}->{e.dst} references unknown node")
        if self.nodes and not 3 <= len(self.nodes) <= 6:
            logger.debug("graph has %d nodes, outside the typical 3-6 range", len(self.nodes))

    def node(self, node_id: str) -> Node:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)


@dataclass(frozen=True)
class TopologyWeights:
    alpha1: float = 1.0
    alpha2: float = 1.0
    alpha3: float = 1.0
    alpha4: float = 1.0

    def __post_init__(self):
        for name in ("alpha1", "alpha2", "alpha3", "alpha4"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be nonnegative")


@dataclass(frozen=True)
class TopologyFeatures:
    q_path: float
    c_cycle: int
    d_dangling: int
    q_contradict: float
    graph_size: int


# ---------------------------------------------------------------------------
# internal graph views


def _digraph(g: ReasoningGraph, support_only: bool = False) -> nx.DiGraph:
    dg = nx.DiGraph()
    dg.add_nodes_from(n.id for n in g.nodes)
    for e in g.edges:
        if support_only and e.relation != "support":
            continue
        dg.add_edge(e.src, e.dst)
    return dg


def _is_acyclic(edges: list[tuple[str, str]], nodes: list[str]) -> bool:
    dg = nx.DiGraph()
    dg.add_nodes_from(nodes)
    dg.add_edges_from(edges)
    return nx.is_directed_acyclic_graph(dg)


# ---------------------------------------------------------------------------
# sanitization


def _merge_paraphrases(g: ReasoningGraph) -> ReasoningGraph:
    by_text: dict[str, list[Node]] = {}
    for n in g.nodes:
        by_text.setdefault(normalize_text(n.text), []).append(n)

    rep: dict[str, str] = {}
    merged_nodes = []
    for group in by_text.values():
        first = group[0]
        for n in group:
            rep[n.id] = first.id
        p_v = sum(n.p_v for n in group) / len(group)
        merged_nodes.append(Node(first.id, first.text, first.kind, p_v))
    # preserve original node order by first occurrence
    order = {n.id: i for i, n in enumerate(g.nodes)}
    merged_nodes.sort(key=lambda n: order[n.id])

    edges = tuple(
        Edge(rep[e.src], rep[e.dst], e.relation, e.contradiction_signal) for e in g.edges
    )
    return ReasoningGraph(tuple(merged_nodes), edges)


def _dedupe_edges(edges: tuple[Edge, ...]) -> tuple[Edge, ...]:
    grouped: dict[tuple[str, str, str], list[Edge]] = {}
    order: list[tuple[str, str, str]] = []
    for e in edges:
        key = (e.src, e.dst, e.relation)
        if key not in grouped:
            grouped[key] = []
            order.append(key)
        grouped[key].append(e)
    out = []
    for key in order:
        group = grouped[key]
        signal = sum(e.contradiction_signal for e in group) / len(group)
        out.append(Edge(key[0], key[1], key[2], signal))
    return tuple(out)


def _min_fas_by_ordering(nodes: list[str], edges: list[tuple[str, str]]) -> set[tuple[str, str]]:
    """Exact minimum feedback arc set via linear-ordering enumeration.

    The minimum FAS equals the minimum number of backward edges over all
    linear orderings of the nodes. Feasible for small node counts.
    """
    best = None
    best_count = len(edges) + 1
    for perm in itertools.permutations(sorted(nodes)):
        pos = {v: i for i, v in enumerate(perm)}
        back = {(u, v) for u, v in edges if pos[u] >= pos[v]}
        if len(back) < best_count:
            best_count = len(back)
            best = back
            if best_count == 0:
                break
    return best if best is not None else set()


def _min_fas_by_subsets(nodes: list[str], edges: list[tuple[str, str]]) -> set[tuple[str, str]]:
    """Exact minimum feedback arc set via subset enumeration (small edge counts)."""
    if _is_acyclic(edges, nodes):
        return set()
    for size in range(1, len(edges) + 1):
        for subset in itertools.combinations(edges, size):
            remaining = [e for e in edges if e not in set(subset)]
            if _is_acyclic(remaining, nodes):
                return set(subset)
    return set(edges)


def _greedy_fas(nodes: list[str], edges: list[tuple[str, str]]) -> set[tuple[str, str]]:
    """Greedy cycle breaking: repeatedly drop the edge on the most simple cycles."""
    removed: set[tuple[str, str]] = set()
    current = list(edges)
    while True:
        dg = nx.DiGraph()
        dg.add_nodes_from(nodes)
        dg.add_edges_from(current)
        cycles = list(itertools.islice(nx.simple_cycles(dg), CYCLE_CAP))
        if not cycles:
            return removed
        counts: dict[tuple[str, str], int] = {}
        for cycle in cycles:
            for u, v in zip(cycle, cycle[1:] + cycle[:1]):
                counts[(u, v)] = counts.get((u, v), 0) + 1
        worst = max(sorted(counts), key=lambda e: counts[e])
        removed.add(worst)
        current = [e for e in current if e != worst]


def minimum_feedback_edges(g: ReasoningGraph) -> set[tuple[str, str]]:
    """Edges whose removal makes the graph acyclic, minimal when tractable."""
    nodes = [n.id for n in g.nodes]
    edges = sorted({(e.src, e.dst) for e in g.edges if e.src != e.dst})
    if _is_acyclic(edges, nodes):
        return set()
    if len(nodes) <= EXACT_FAS_MAX_NODES:
        return _min_fas_by_ordering(nodes, edges)
    if len(edges) <= EXACT_FAS_MAX_EDGES:
        return _min_fas_by_subsets(nodes, edges)
    return _greedy_fas(nodes, edges)


def sanitize_graph(g: ReasoningGraph) -> ReasoningGraph:
    """Merge paraphrase nodes, drop self-loops and duplicates, break cycles.

    Cycle breaking removes a minimum-cardinality edge set (exact for small
    graphs, greedy otherwise). Idempotent: sanitizing a sanitized graph is
    the identity.
    """
    if not g.nodes:
        raise EmptyGraphError("cannot sanitize an empty graph")
    g = _merge_paraphrases(g)
    edges = tuple(e for e in g.edges if e.src != e.dst)
    edges = _dedupe_edges(edges)
    g = ReasoningGraph(g.nodes, edges)
    to_remove = minimum_feedback_edges(g)
    if to_remove:
        edges = tuple(e for e in g.edges if (e.src, e.dst) not in to_remove)
        g = ReasoningGraph(g.nodes, edges)
    return g


# ---------------------------------------------------------------------------
# structural features


def cycle_count(g: ReasoningGraph) -> int:
    """Number of distinct simple directed cycles, capped at CYCLE_CAP."""
    dg = _digraph(g)
    count = sum(1 for _ in itertools.islice(nx.simple_cycles(dg), CYCLE_CAP))
    return count


def dangling_count(g: ReasoningGraph) -> int:
    """Non-premise nodes with no incoming support edge."""
    supported = {e.dst for e in g.edges if e.relation == "support"}
    return sum(1 for n in g.nodes if n.kind != "premise" and n.id not in supported)


def contradiction_score(g: ReasoningGraph) -> float:
    """Mean contradiction signal over edges; 0 for edgeless graphs."""
    if not g.edges:
        return 0.0
    return sum(e.contradiction_signal for e in g.edges) / len(g.edges)


def _premises_and_conclusion(g: ReasoningGraph) -> tuple[list[str], str]:
    premises = [n.id for n in g.nodes if n.kind == "premise"]
    conclusions = [n.id for n in g.nodes if n.kind == "conclusion"]
    if not premises:
        raise DegenerateGraphError("graph has no premise node")
    if len(conclusions) != 1:
        raise DegenerateGraphError(f"graph has {len(conclusions)} conclusion nodes, expected 1")
    return premises, conclusions[0]


def _path_closure(g: ReasoningGraph) -> tuple[set[str], set[str], str]:
    """Nodes reachable from premises / reaching the conclusion via support edges."""
    premises, conclusion = _premises_and_conclusion(g)
    dg = _digraph(g, support_only=True)
    forward: set[str] = set(premises)
    for p in premises:
        forward |= nx.descendants(dg, p)
    backward: set[str] = {conclusion} | nx.ancestors(dg, conclusion)
    return forward, backward, conclusion


def path_coverage(g: ReasoningGraph) -> float:
    """Fraction of nodes and edges on some premise-to-conclusion support path."""
    forward, backward, _ = _path_closure(g)
    on_path = forward & backward
    covered_nodes = sum(1 for n in g.nodes if n.id in on_path)
    covered_edges = sum(
        1
        for e in g.edges
        if e.relation == "support" and e.src in forward and e.dst in backward
    )
    total = len(g.nodes) + len(g.edges)
    return (covered_nodes + covered_edges) / total


@dataclass(frozen=True)
class PathDistribution:
    """Probability over canonical edge keys, proportional to path counts."""

    probs: dict[tuple[str, str], float]

    def support(self) -> set[tuple[str, str]]:
        return set(self.probs)


def path_distribution(g: ReasoningGraph) -> PathDistribution:
    """Distribution over support edges by premise-to-conclusion path counts.

    Path counts come from the usual DAG dynamic program. Keys are
    (normalized src text, normalized dst text) so distributions from
    independently re-elicited graphs can be aligned.
    """
    try:
        premises, conclusion = _premises_and_conclusion(g)
    except DegenerateGraphError:
        return PathDistribution({})
    dg = _digraph(g, support_only=True)
    if not nx.is_directed_acyclic_graph(dg):
        raise GraphError("path_distribution requires a sanitized (acyclic) graph")

    order = list(nx.topological_sort(dg))
    from_premise = {v: 0 for v in order}
    for p in premises:
        from_premise[p] = 1
    for v in order:
        for _, w in dg.out_edges(v):
            from_premise[w] += from_premise[v]
    to_conclusion = {v: 0 for v in order}
    to_conclusion[conclusion] = 1
    for v in reversed(order):
        for _, w in dg.out_edges(v):
            to_conclusion[v] += to_conclusion[w]

    text = {n.id: normalize_text(n.text) for n in g.nodes}
    counts: dict[tuple[str, str], float] = {}
    for e in g.edges:
        if e.relation != "support":
            continue
        n_paths = from_premise[e.src] * to_conclusion[e.dst]
        if n_paths > 0:
            key = (text[e.src], text[e.dst])
            counts[key] = counts.get(key, 0.0) + n_paths
    total = sum(counts.values())
    if total == 0:
        return PathDistribution({})
    return PathDistribution({k: v / total for k, v in counts.items()})


def topology_score(features: TopologyFeatures, weights: TopologyWeights) -> float:
    """Linear structural score: reward path coverage, penalize defects."""
    return (
        weights.alpha1 * features.q_path
        - weights.alpha2 * features.c_cycle
        - weights.alpha3 * features.d_dangling
        - weights.alpha4 * features.q_contradict
    )


def compute_features(g: ReasoningGraph) -> TopologyFeatures:
    """Features of a raw graph: cycles counted pre-sanitization, the rest after."""
    c_cycle = cycle_count(g)
    clean = sanitize_graph(g)
    try:
        q_path = path_coverage(clean)
    except DegenerateGraphError:
        q_path = 0.0
    return TopologyFeatures(
        q_path=q_path,
        c_cycle=c_cycle,
        d_dangling=dangling_count(clean),
        q_contradict=contradiction_score(clean),
        graph_size=len(clean.nodes) + len(clean.edges),
    )


def score_graph(g: ReasoningGraph, weights: TopologyWeights) -> float:
    """Topology score of a raw graph (features per compute_features)."""
    return topology_score(compute_features(g), weights)


def normalize_scores(scores: list[float]) -> list[float]:
    """Population z-scores with a zero-variance guard."""
    if not scores:
        raise ValueError("cannot normalize an empty score list")
    n = len(scores)
    mean = sum(scores) / n
    var = sum((s - mean) ** 2 for s in scores) / n
    std = var**0.5
    if std < 1e-12:
        return [0.0] * n
    return [(s - mean) / std for s in scores]


# ---------------------------------------------------------------------------
# serialization


def graph_to_dict(g: ReasoningGraph) -> dict:
    return {
        "nodes": [
            {"id": n.id, "text": n.text, "kind": n.kind, "p_v": n.p_v} for n in g.nodes
        ],
        "edges": [
            {
                "src": e.src,
                "dst": e.dst,
                "relation": e.relation,
                "contradiction_signal": e.contradiction_signal,
            }
            for e in g.edges
        ],
    }


def graph_from_dict(data: dict) -> ReasoningGraph:
    try:
        nodes = tuple(
            Node(str(n["id"]), str(n["text"]), str(n["kind"]), float(n["p_v"]))
            for n in data["nodes"]
        )
        edges = tuple(
            Edge(
                str(e["src"]),
                str(e["dst"]),
                str(e["relation"]),
                float(e.get("contradiction_signal", 0.0)),
            )
            for e in data["edges"]
        )
    except (KeyError, TypeError) as exc:
        raise GraphError(f"malformed graph object: {exc}") from exc
    return ReasoningGraph(nodes, edges)
