"""Anchor sub-graphs: the unified instance shape for node- and
graph-level tasks.

A node instance anchors at the node itself with its k-hop neighborhood;
a graph instance anchors at the mean-pooled node embeddings with the
whole node set as neighborhood.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, ParameterError
from .graph_store import ClassCatalog, EmbeddedGraph

__all__ = ["AnchorTask", "khop_neighborhood", "node_anchor", "graph_anchor"]


@dataclass
class AnchorTask:
    """One instance to classify: its representation plus neighborhood."""

    instance_id: int
    anchor_repr: np.ndarray          # (d,)
    neighborhood: tuple[int, ...]    # node ids, ascending
    neighbor_reprs: np.ndarray       # (len(neighborhood), d), row-aligned

    def __post_init__(self):
        if self.neighbor_reprs.shape[0] != len(self.neighborhood):
            raise ContractViolation(
                f"{len(self.neighborhood)} neighbor ids but "
                f"{self.neighbor_reprs.shape[0]} representation rows")


def khop_neighborhood(g: EmbeddedGraph, v: int, k: int) -> tuple[int, ...]:
    """Nodes at shortest-path distance 1..k from v, ascending id order.

    v itself is always excluded. BFS over the prebuilt adjacency, so
    cost scales with the neighborhood, not the graph.
    """
    if not (0 <= v < g.node_count):
        raise ParameterError(f"node id {v} out of range [0, {g.node_count})")
    if k < 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    adj = g.adjacency
    seen = {v}
    frontier = deque([(v, 0)])
    found = []
    while frontier:
        node, depth = frontier.popleft()
        if depth == k:
            continue
        for nbr in adj[node]:
            if nbr not in seen:
                seen.add(nbr)
                found.append(nbr)
                frontier.append((nbr, depth + 1))
    return tuple(sorted(found))


def node_anchor(g: EmbeddedGraph, catalog: ClassCatalog, v: int,
                k: int) -> AnchorTask:
    """Anchor a node instance: its own embedding plus k-hop neighbors."""
    hood = khop_neighborhood(g, v, k)
    return AnchorTask(instance_id=v,
                      anchor_repr=g.embeddings[v].copy(),
                      neighborhood=hood,
                      neighbor_reprs=g.embeddings[list(hood)].reshape(
                          len(hood), g.dim))


def graph_anchor(g: EmbeddedGraph, catalog: ClassCatalog,
                 instance_id: int = 0) -> AnchorTask:
    """Anchor a graph instance: mean-pooled embedding, all nodes as
    neighborhood.

    Mean pooling is the permutation-invariant, parameter-free reduction
    used as R_graph.
    """
    if g.node_count < 1:
        raise ContractViolation("cannot anchor an empty graph")
    return AnchorTask(instance_id=instance_id,
                      anchor_repr=g.embeddings.mean(axis=0),
                      neighborhood=tuple(range(g.node_count)),
                      neighbor_reprs=g.embeddings.copy())
