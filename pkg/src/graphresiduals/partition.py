"""Partitioning the residuals matvec across processes, and when it pays off.

Vertices are partitioned into p blocks (arranged as a pr x pc process
grid); the quality metric is hypergraph connectivity volume: each vertex's
net spans the blocks holding its neighbors, and the volume counts the
distinct non-home blocks per net.  A greedy streaming assignment stands in
for a full hypergraph partitioner; the claims tested against it concern
the trade-off structure (amortization, partial-data robustness), not
partitioner internals.

Costs are abstract: a per local nonzero, b per unit of communication
volume.  ``amortization_crossover`` finds the matvec count at which a
more expensive partitioning pays for its cheaper matvecs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from graphresiduals.graph import Graph, GraphError


class PartitionError(ValueError):
    pass


def grid_shape(p: int) -> tuple[int, int]:
    """Process grid (pr, pc) with pr*pc = p, as square as p allows."""
    if p < 1:
        raise PartitionError(f"process count must be positive, got {p}")
    pr = int(math.isqrt(p))
    while p % pr != 0:
        pr -= 1
    return pr, p // pr


@dataclass
class Partition2D:
    """A p-way vertex partition arranged on a pr x pc process grid.

    ``assignment`` maps each vertex to its block in [0, p); the row and
    column maps derive from it (block b sits at grid cell
    (b // pc, b % pc)).  ``process_nnz[r, c]`` counts the adjacency
    nonzeros owned by process (r, c) under the usual 2D layout, filled in
    by ``count_process_nnz``.
    """

    p: int
    assignment: np.ndarray
    process_nnz: np.ndarray = None

    def __post_init__(self):
        self.assignment = np.asarray(self.assignment, dtype=np.int64)
        if self.assignment.ndim != 1:
            raise PartitionError("assignment must be one vertex block per vertex")
        if self.assignment.size and not (0 <= self.assignment.min()
                                         and self.assignment.max() < self.p):
            raise PartitionError(f"assignment blocks must lie in [0, {self.p})")
        self.pr, self.pc = grid_shape(self.p)

    @property
    def n(self) -> int:
        return self.assignment.size

    def row_map(self) -> np.ndarray:
        return self.assignment // self.pc

    def col_map(self) -> np.ndarray:
        return self.assignment % self.pc

    def block_sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.p)


def count_process_nnz(g: Graph, part: Partition2D) -> np.ndarray:
    """Nonzeros owned per process: entry (u, v) lives at (row_map[u], col_map[v])."""
    if part.n != g.n:
        raise PartitionError(f"partition covers {part.n} vertices, graph has {g.n}")
    a = g.adjacency().tocoo()
    rows = part.row_map()[a.row]
    cols = part.col_map()[a.col]
    counts = np.bincount(rows * part.pc + cols, minlength=part.p)
    return counts.reshape(part.pr, part.pc)


def random_partition(g: Graph, p: int, seed: int) -> Partition2D:
    """Uniform random block per vertex; balanced in expectation."""
    if p > g.n:
        raise PartitionError(f"process count {p} exceeds vertex count {g.n}")
    rng = np.random.default_rng(seed)
    part = Partition2D(p=p, assignment=rng.integers(0, p, size=g.n))
    part.process_nnz = count_process_nnz(g, part)
    return part


def balance_cap(n: int, p: int) -> int:
    """Per-block vertex capacity: 10% headroom over even split."""
    return math.ceil(1.1 * n / p)


def greedy_hypergraph_partition(g: Graph, p: int, seed: int) -> Partition2D:
    """Streaming greedy assignment minimizing net connectivity.

    Vertices are visited in seed-shuffled order; each goes to the block
    holding most of its already-assigned neighbors, ties broken toward the
    lighter block then the lower index, subject to the balance cap.
    """
    n = g.n
    if p > n:
        raise PartitionError(f"process count {p} exceeds vertex count {g.n}")
    cap = balance_cap(n, p)
    if cap * p < n:
        raise PartitionError(f"balance cap {cap} infeasible for {n} vertices in {p} blocks")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    adj = g.adjacency()
    assignment = np.full(n, -1, dtype=np.int64)
    loads = np.zeros(p, dtype=np.int64)
    for v in order:
        neigh = adj.indices[adj.indptr[v]:adj.indptr[v + 1]]
        placed = assignment[neigh]
        scores = np.bincount(placed[placed >= 0], minlength=p).astype(np.float64)
        scores[loads >= cap] = -np.inf
        best = scores.max()
        candidates = np.flatnonzero(scores == best)
        block = candidates[np.argmin(loads[candidates])]
        assignment[v] = block
        loads[block] += 1
    part = Partition2D(p=p, assignment=assignment)
    part.process_nnz = count_process_nnz(g, part)
    return part


def communication_volume(g: Graph, part: Partition2D) -> int:
    """Hypergraph connectivity volume: distinct non-home blocks per vertex net.

    Vertex v's net spans the blocks of its neighbors; each block in the
    span other than v's own block costs one unit.
    """
    if part.n != g.n:
        raise PartitionError(f"partition covers {part.n} vertices, graph has {g.n}")
    if g.num_edges == 0 or part.p == 1:
        return 0
    u, v = g.edges[:, 0], g.edges[:, 1]
    home = part.assignment
    # both directions of each undirected edge contribute to the owner's net
    owners = np.concatenate([u, v])
    blocks = home[np.concatenate([v, u])]
    codes = np.unique(owners * part.p + blocks)
    spans = codes // part.p
    hit_blocks = codes % part.p
    return int(np.count_nonzero(home[spans] != hit_blocks))


@dataclass(frozen=True)
class CostModel:
    """Abstract per-matvec cost: a per local nonzero, b per volume unit."""

    a: float
    b: float
    t_partition: float = 0.0

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError("cost constants a and b must be positive")

    def matvec_cost(self, local_nnz: float, comm_volume: float) -> float:
        return self.a * local_nnz + self.b * comm_volume


def amortization_crossover(cm: CostModel, vol_random: float, vol_hg: float,
                           t_part_random: float, t_part_hg: float) -> float:
    """Smallest matvec count at which the better partition wins overall.

    Total cost after n matvecs is t_part + n * t_mv with t_mv differing
    only through b * volume (the local-nonzero work is common).  Returns
    the smallest integer n >= 1 with
    t_part_hg + n*t_mv_hg <= t_part_random + n*t_mv_random, or inf when
    the data-dependent partition is not cheaper per matvec.
    """
    t_mv_random = cm.b * vol_random
    t_mv_hg = cm.b * vol_hg
    saving = t_mv_random - t_mv_hg
    if saving <= 0:
        return math.inf

    def wins(count: int) -> bool:
        return t_part_hg + count * t_mv_hg <= t_part_random + count * t_mv_random

    guess = max(1, math.ceil((t_part_hg - t_part_random) / saving - 1e-12))
    while not wins(guess):
        guess += 1
    while guess > 1 and wins(guess - 1):
        guess -= 1
    return guess


def edge_stream_from_graph(g: Graph, seed: int) -> np.ndarray:
    """The graph's edges in a seed-shuffled arrival order."""
    rng = np.random.default_rng(seed)
    return g.edges[rng.permutation(g.num_edges)]


def partial_stream_partition(edge_stream: np.ndarray, fraction: float, p: int, seed: int,
                             n: int | None = None):
    """Partition from a stream prefix, then watch the frozen partition age.

    Greedy-partitions the graph formed by the first ceil(fraction * |E|)
    stream edges, freezes the assignment, and replays the rest measuring
    communication volume at each 10% mark of the full stream (the freeze
    point first, 100% always).  A random partition of the same vertices is
    traced identically for comparison.  Returns (partition, trace) where
    each trace row is (edges_seen, greedy_volume, random_volume).
    """
    edge_stream = np.asarray(edge_stream, dtype=np.int64)
    if edge_stream.ndim != 2 or edge_stream.shape[1] != 2:
        raise PartitionError("edge stream must be an (m, 2) array")
    m = edge_stream.shape[0]
    if m == 0:
        raise PartitionError("edge stream is empty")
    if not 0.0 < fraction <= 1.0:
        raise PartitionError(f"fraction must be in (0, 1], got {fraction}")
    if n is None:
        n = int(edge_stream.max()) + 1

    prefix = math.ceil(fraction * m)
    frozen = greedy_hypergraph_partition(Graph(n, edge_stream[:prefix]), p, seed)
    random_part = random_partition(Graph(n, edge_stream[:prefix]), p, seed)

    marks = sorted({prefix, m} | {math.ceil(m * f / 10) for f in range(1, 11)
                                  if math.ceil(m * f / 10) >= prefix})
    trace = []
    for mark in marks:
        g_now = Graph(n, edge_stream[:mark])
        trace.append((mark,
                      communication_volume(g_now, frozen),
                      communication_volume(g_now, random_part)))
    return frozen, trace
