"""Sparse graph types, vertex attributes, temporal sequences, edge-error metric.

Graphs are simple (no self-loops, no duplicate edges) with dense integer
vertex ids in [0, n).  Undirected is the default throughout; directed
support is carried by the types but the experiment pipelines are
undirected.  Graph values are immutable after construction and safe to
share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


class GraphError(ValueError):
    """Invalid graph construction or incompatible graph arguments."""


def _canonical_edges(n: int, edges: np.ndarray, directed: bool,
                     weights: np.ndarray | None):
    """Drop self-loops, dedupe, and sort edges; undirected pairs become u < v.

    Duplicate weighted edges keep the first weight seen.
    """
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if edges.size and (edges.min() < 0 or edges.max() >= n):
        raise GraphError(
            f"edge endpoint out of range [0, {n}): "
            f"min={edges.min() if edges.size else 0}, max={edges.max() if edges.size else 0}"
        )
    if weights is not None:
        weights = np.asarray(weights, dtype=np.float64).reshape(-1)
        if weights.shape[0] != edges.shape[0]:
            raise GraphError("weights length does not match edge count")

    keep = edges[:, 0] != edges[:, 1]
    edges = edges[keep]
    if weights is not None:
        weights = weights[keep]

    if not directed:
        lo = edges.min(axis=1)
        hi = edges.max(axis=1)
        edges = np.column_stack([lo, hi])

    codes = edges[:, 0] * n + edges[:, 1]
    # stable first-occurrence dedupe, then sort by (u, v)
    _, first = np.unique(codes, return_index=True)
    first.sort()
    edges = edges[first]
    if weights is not None:
        weights = weights[first]
    order = np.lexsort((edges[:, 1], edges[:, 0])) if edges.size else np.array([], dtype=np.int64)
    return edges[order], (weights[order] if weights is not None else None)


class Graph:
    """Immutable simple graph stored as a canonical edge array plus CSR adjacency.

    Undirected edges are stored once with u < v; the adjacency matrix holds
    both orientations.  Optional real edge weights support fused graphs;
    unweighted graphs have 0/1 adjacency.
    """

    def __init__(self, n: int, edges, directed: bool = False, weights=None):
        if n < 0:
            raise GraphError(f"vertex count must be nonnegative, got {n}")
        self.n = int(n)
        self.directed = bool(directed)
        self.edges, self.weights = _canonical_edges(
            self.n, np.asarray(edges), self.directed, weights
        )
        self.edges.setflags(write=False)
        if self.weights is not None:
            self.weights.setflags(write=False)
        self._adjacency: sp.csr_array | None = None

    @classmethod
    def empty(cls, n: int, directed: bool = False) -> Graph:
        return cls(n, np.empty((0, 2), dtype=np.int64), directed=directed)

    @property
    def num_edges(self) -> int:
        return self.edges.shape[0]

    def adjacency(self) -> sp.csr_array:
        """CSR adjacency; symmetric (both orientations present) when undirected."""
        if self._adjacency is None:
            u, v = self.edges[:, 0], self.edges[:, 1]
            w = self.weights if self.weights is not None else np.ones(len(u))
            if self.directed:
                rows, cols, vals = u, v, w
            else:
                rows = np.concatenate([u, v])
                cols = np.concatenate([v, u])
                vals = np.concatenate([w, w])
            self._adjacency = sp.csr_array(
                (vals, (rows, cols)), shape=(self.n, self.n), dtype=np.float64
            )
        return self._adjacency

    def degrees(self) -> np.ndarray:
        """Per-vertex degree (out-degree if directed)."""
        a = self.adjacency()
        return np.diff(a.indptr).astype(np.int64)

    def degree(self, i: int) -> int:
        if not 0 <= i < self.n:
            raise GraphError(f"vertex id {i} out of range [0, {self.n})")
        a = self.adjacency()
        return int(a.indptr[i + 1] - a.indptr[i])

    def neighbors(self, i: int) -> np.ndarray:
        if not 0 <= i < self.n:
            raise GraphError(f"vertex id {i} out of range [0, {self.n})")
        a = self.adjacency()
        return a.indices[a.indptr[i]:a.indptr[i + 1]].astype(np.int64)

    def edge_codes(self) -> np.ndarray:
        """Canonical edges encoded as u * n + v; set-compatible across graphs of equal n."""
        return self.edges[:, 0] * self.n + self.edges[:, 1]

    def has_edge(self, u: int, v: int) -> bool:
        if not self.directed and u > v:
            u, v = v, u
        code = np.int64(u) * self.n + v
        idx = np.searchsorted(self.edge_codes(), code)
        return bool(idx < self.num_edges and self.edge_codes()[idx] == code)

    def with_edges_added(self, new_edges: np.ndarray) -> Graph:
        """New graph with additional edges unioned in (weights dropped)."""
        if self.weights is not None:
            raise GraphError("edge addition on weighted graphs is not supported")
        combined = np.vstack([self.edges, np.asarray(new_edges, dtype=np.int64).reshape(-1, 2)])
        return Graph(self.n, combined, directed=self.directed)

    def induced_on(self, vertices: np.ndarray) -> Graph:
        """Subgraph induced by ``vertices``, kept on the full [0, n) vertex set."""
        mask = np.zeros(self.n, dtype=bool)
        mask[np.asarray(vertices, dtype=np.int64)] = True
        keep = mask[self.edges[:, 0]] & mask[self.edges[:, 1]]
        w = self.weights[keep] if self.weights is not None else None
        return Graph(self.n, self.edges[keep], directed=self.directed, weights=w)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        if self.n != other.n or self.directed != other.directed:
            return False
        if not np.array_equal(self.edges, other.edges):
            return False
        if (self.weights is None) != (other.weights is None):
            return False
        return self.weights is None or np.array_equal(self.weights, other.weights)

    def __repr__(self) -> str:
        kind = "directed" if self.directed else "undirected"
        w = ", weighted" if self.weights is not None else ""
        return f"Graph(n={self.n}, edges={self.num_edges}, {kind}{w})"


@dataclass
class VertexAttributes:
    """Per-vertex feature vectors and category labels.

    ``x`` has shape (n, d); ``category`` holds labels in [0, k).
    """

    x: np.ndarray
    category: np.ndarray
    k: int = field(default=0)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        if self.x.ndim == 1:
            self.x = self.x.reshape(-1, 1)
        self.category = np.asarray(self.category, dtype=np.int64)
        if self.category.ndim != 1 or self.x.shape[0] != self.category.shape[0]:
            raise GraphError("attribute array length does not match category array")
        if self.k == 0:
            self.k = int(self.category.max()) + 1 if self.category.size else 1
        if self.category.size and (self.category.min() < 0 or self.category.max() >= self.k):
            raise GraphError(f"categories must lie in [0, {self.k})")

    @property
    def n(self) -> int:
        return self.category.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]


@dataclass
class TemporalGraphSequence:
    """Ordered graph snapshots over a shared vertex set."""

    snapshots: list[Graph]

    def __post_init__(self):
        if not self.snapshots:
            raise GraphError("temporal sequence needs at least one snapshot")
        n = self.snapshots[0].n
        if any(g.n != n for g in self.snapshots):
            raise GraphError("all snapshots must share the same vertex count")

    @property
    def n(self) -> int:
        return self.snapshots[0].n

    @property
    def num_snapshots(self) -> int:
        return len(self.snapshots)

    def __len__(self) -> int:
        return len(self.snapshots)

    def __getitem__(self, t: int) -> Graph:
        return self.snapshots[t]


def degree(g: Graph, i: int) -> int:
    """Number of neighbors of vertex i (out-degree if directed)."""
    return g.degree(i)


def edge_error_rate(truth: Graph, observed: Graph) -> float:
    """(missing edges + spurious edges) / edges in the true graph.

    Edges of ``truth`` absent from ``observed`` count as missing; edges of
    ``observed`` absent from ``truth`` count as spurious.  Both graphs must
    live on the same vertex set.
    """
    if truth.n != observed.n:
        raise GraphError(
            f"vertex count mismatch: truth has {truth.n}, observed has {observed.n}"
        )
    if truth.num_edges == 0:
        raise GraphError("edge error rate undefined for an empty truth graph")
    t = truth.edge_codes()
    o = observed.edge_codes()
    common = np.intersect1d(t, o, assume_unique=True).size
    missing = t.size - common
    spurious = o.size - common
    return (missing + spurious) / t.size
