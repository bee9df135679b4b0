"""Shared test helpers: graph builders and brute-force oracles."""

import itertools
import math

import networkx as nx
import pytest

from turdpo.graphs import Edge, Node, ReasoningGraph


def make_graph(node_specs, edge_specs):
    """node_specs: (id, kind, p_v) or (id, text, kind, p_v); edges: (src, dst[, relation[, signal]])."""
    nodes = []
    for spec in node_specs:
        if len(spec) == 3:
            nid, kind, p_v = spec
            text = f"claim {nid}"
        else:
            nid, text, kind, p_v = spec
        nodes.append(Node(nid, text, kind, p_v))
    edges = []
    for spec in edge_specs:
        src, dst = spec[0], spec[1]
        relation = spec[2] if len(spec) > 2 else "support"
        signal = spec[3] if len(spec) > 3 else 0.0
        edges.append(Edge(src, dst, relation, signal))
    return ReasoningGraph(tuple(nodes), tuple(edges))


def chain_graph(p_vals=(0.9, 0.8, 0.95)):
    """premise -> intermediate -> conclusion, all support."""
    return make_graph(
        [("a", "premise", p_vals[0]), ("b", "intermediate", p_vals[1]), ("c", "conclusion", p_vals[2])],
        [("a", "b"), ("b", "c")],
    )


def diamond_graph():
    """one premise, two parallel intermediates, one conclusion."""
    return make_graph(
        [
            ("p", "premise", 0.9),
            ("l", "intermediate", 0.8),
            ("r", "intermediate", 0.7),
            ("c", "conclusion", 0.95),
        ],
        [("p", "l"), ("p", "r"), ("l", "c"), ("r", "c")],
    )


def brute_force_min_fas(nodes, edges):
    """Minimum feedback arc set size by trying all removal subsets."""

    def acyclic(kept):
        dg = nx.DiGraph()
        dg.add_nodes_from(nodes)
        dg.add_edges_from(kept)
        return nx.is_directed_acyclic_graph(dg)

    if acyclic(edges):
        return 0
    for size in range(1, len(edges) + 1):
        for subset in itertools.combinations(range(len(edges)), size):
            kept = [e for i, e in enumerate(edges) if i not in subset]
            if acyclic(kept):
                return size
    return len(edges)


def binary_entropy(p):
    total = 0.0
    for q in (p, 1.0 - p):
        if q > 0:
            total -= q * math.log(q)
    return total


@pytest.fixture
def data_dir():
    from pathlib import Path

    return Path(__file__).parent / "data"
