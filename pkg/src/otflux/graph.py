"""Weighted channel graphs: incidence matrix, gradient, divergence, Laplacian.

Nodes are density channels; traversing edge e costs c_e.  The edge
weight entering the Laplacian is 1/c_e^2.  Edges are stored with i < j
and oriented i -> j; the orientation is arbitrary and does not affect
transport values (a regression test pins this).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionMismatchError, ValidationError

GRAPH_FORMAT_VERSION = 1


@dataclass(frozen=True)
class TransportGraph:
    """Connected weighted undirected graph on k channel nodes.

    edges are 0-based (i, j) pairs with i < j; costs are the positive
    traversal costs c_e.  orientations optionally flips individual edge
    directions (+1 keeps i -> j); it exists because the choice is
    arbitrary, and lets tests assert invariance.
    """

    k: int
    edges: tuple
    costs: np.ndarray
    orientations: np.ndarray | None = field(default=None)

    def __post_init__(self):
        if self.k < 1:
            raise ValidationError("graph needs at least one node")
        edges = tuple((int(i), int(j)) for i, j in self.edges)
        costs = np.asarray(self.costs, dtype=np.float64)
        if costs.shape != (len(edges),):
            raise DimensionMismatchError(
                f"{len(edges)} edges but {costs.shape} cost entries"
            )
        if np.any(costs <= 0) or not np.all(np.isfinite(costs)):
            raise ValidationError("edge costs must be positive and finite")
        seen = set()
        for i, j in edges:
            if i == j:
                raise ValidationError(f"self-loop at node {i}")
            if not (0 <= i < j < self.k):
                raise ValidationError(f"edge ({i}, {j}) must satisfy 0 <= i < j < k")
            if (i, j) in seen:
                raise ValidationError(f"duplicate edge ({i}, {j})")
            seen.add((i, j))
        orient = self.orientations
        if orient is None:
            orient = np.ones(len(edges))
        orient = np.asarray(orient, dtype=np.float64)
        if orient.shape != (len(edges),) or not np.all(np.abs(orient) == 1):
            raise ValidationError("orientations must be +-1 per edge")
        if not _connected(self.k, edges):
            raise ValidationError("graph must be connected")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "costs", costs)
        object.__setattr__(self, "orientations", orient)
        object.__setattr__(self, "_incidence", build_incidence(self))
        object.__setattr__(self, "_incidence_over_costs", self._incidence / costs)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def incidence(self) -> np.ndarray:
        return self._incidence


def _connected(k: int, edges) -> bool:
    adj = [[] for _ in range(k)]
    for i, j in edges:
        adj[i].append(j)
        adj[j].append(i)
    seen = {0}
    stack = [0]
    while stack:
        v = stack.pop()
        for w in adj[v]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == k


def build_incidence(g: TransportGraph) -> np.ndarray:
    """Signed incidence matrix D, shape (k, ell); each column sums to zero."""
    D = np.zeros((g.k, g.num_edges))
    for e, (i, j) in enumerate(g.edges):
        D[i, e] = g.orientations[e]
        D[j, e] = -g.orientations[e]
    return D


def grad_graph(g: TransportGraph, x: np.ndarray) -> np.ndarray:
    """Graph gradient diag(1/c) D^T x; per edge (x_i - x_j)/c_e.

    x has shape (..., k); the result has shape (..., ell).
    """
    x = np.asarray(x)
    if x.shape[-1] != g.k:
        raise DimensionMismatchError(f"last axis {x.shape[-1]} != node count {g.k}")
    out = x.reshape(-1, g.k) @ g._incidence_over_costs
    return out.reshape(x.shape[:-1] + (g.num_edges,))


def div_graph(g: TransportGraph, y: np.ndarray) -> np.ndarray:
    """Graph divergence -D diag(1/c) y; the negative adjoint of grad_graph."""
    y = np.asarray(y)
    if y.shape[-1] != g.num_edges:
        raise DimensionMismatchError(f"last axis {y.shape[-1]} != edge count {g.num_edges}")
    out = y.reshape(-1, g.num_edges) @ (-g._incidence_over_costs.T)
    return out.reshape(y.shape[:-1] + (g.k,))


def laplacian(g: TransportGraph) -> np.ndarray:
    """Graph Laplacian div_G grad_G = -D diag(1/c^2) D^T (negative semidefinite)."""
    D = g.incidence
    return -(D / g.costs**2) @ D.T


def lambda_max_graph(g: TransportGraph) -> float:
    """Largest eigenvalue of -laplacian, by symmetric eigensolve on k x k."""
    return float(np.linalg.eigvalsh(-laplacian(g)).max())


def load_graph(path) -> TransportGraph:
    """Load a graph from JSON {k, edges (1-indexed), costs}."""
    data = json.loads(Path(path).read_text())
    try:
        k = int(data["k"])
        edges = [(int(i) - 1, int(j) - 1) for i, j in data["edges"]]
        costs = data["costs"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"{path}: malformed graph file ({exc})") from exc
    return TransportGraph(k, edges, costs)


def save_graph(path, g: TransportGraph) -> None:
    data = {
        "format_version": GRAPH_FORMAT_VERSION,
        "k": g.k,
        "edges": [[i + 1, j + 1] for i, j in g.edges],
        "costs": list(map(float, g.costs)),
    }
    Path(path).write_text(json.dumps(data, indent=2) + "\n")


def triangle_graph(costs=(1.0, 1.0, 1.0)) -> TransportGraph:
    """Three-node graph with edges (0,1), (0,2), (1,2); the RGB default."""
    return TransportGraph(3, [(0, 1), (0, 2), (1, 2)], costs)
