"""Synthetic data generation.

Recursive-matrix (R-MAT) backgrounds with skewed degree distributions,
attributed backgrounds sampled from a low-rank edge-probability model, and
embedding of small dense subgraphs into a background, either statically or
across the snapshots of a temporal sequence with a density profile.

All generators are pure functions of their inputs and a seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from graphresiduals.graph import Graph, GraphError, TemporalGraphSequence, VertexAttributes
from graphresiduals.model import LowRankExpectedModel
from graphresiduals.seeds import split_seed

# symmetric ramp up to full density and back down, 8 snapshots
DEFAULT_TEMPORAL_PROFILE = (0.25, 0.5, 0.75, 1.0, 1.0, 0.75, 0.5, 0.25)

DEFAULT_RMAT_PROBS = (0.5, 0.125, 0.125, 0.25)


@dataclass(frozen=True)
class RmatParams:
    """Recursive-matrix generator parameters.

    ``scale`` is log2 of the vertex count; ``avg_degree`` sets the draw
    budget ceil(avg_degree * n / 2).  ``probs`` = (a, b, c, d) are the
    quadrant probabilities, most significant bit first; a > d skews the
    degree distribution toward low-id vertices.
    """

    scale: int
    avg_degree: float
    probs: tuple = DEFAULT_RMAT_PROBS
    seed: int = 0

    def __post_init__(self):
        if self.scale < 1:
            raise ValueError(f"scale must be >= 1, got {self.scale}")
        if not self.avg_degree > 0:
            raise ValueError(f"avg_degree must be positive, got {self.avg_degree}")
        probs = tuple(float(p) for p in self.probs)
        if len(probs) != 4 or any(p < 0 for p in probs):
            raise ValueError("probs must be four nonnegative numbers")
        if abs(sum(probs) - 1.0) > 1e-12:
            raise ValueError(f"probs must sum to 1, got {sum(probs)}")
        object.__setattr__(self, "probs", probs)

    @property
    def n(self) -> int:
        return 1 << self.scale


@dataclass(frozen=True)
class EmbeddingSpec:
    """What to embed: subgraph size, internal edge density, placement.

    ``vertex_selection`` is either the string "random" (uniform without
    replacement) or an explicit vertex list of length ``size``.  For
    temporal embedding, ``temporal_profile`` multiplies the density per
    snapshot.
    """

    size: int
    density: float
    vertex_selection: Union[str, Sequence[int]] = "random"
    temporal_profile: Optional[tuple] = None

    def __post_init__(self):
        if self.size < 0:
            raise ValueError(f"size must be nonnegative, got {self.size}")
        if not 0.0 <= self.density <= 1.0:
            raise ValueError(f"density must be in [0, 1], got {self.density}")
        if isinstance(self.vertex_selection, str):
            if self.vertex_selection != "random":
                raise ValueError(f"unknown vertex selection {self.vertex_selection!r}")
        else:
            chosen = tuple(int(v) for v in self.vertex_selection)
            if len(chosen) != self.size:
                raise ValueError(f"vertex list has {len(chosen)} entries, expected size {self.size}")
            if len(set(chosen)) != len(chosen):
                raise ValueError("vertex list contains duplicates")
            object.__setattr__(self, "vertex_selection", chosen)
        if self.temporal_profile is not None:
            profile = tuple(float(m) for m in self.temporal_profile)
            if any(m < 0 for m in profile):
                raise ValueError("temporal profile multipliers must be nonnegative")
            if any(m * self.density > 1.0 + 1e-12 for m in profile):
                raise ValueError("temporal profile pushes density above 1")
            object.__setattr__(self, "temporal_profile", profile)


def rmat_draws(params: RmatParams) -> np.ndarray:
    """Raw (budget, 2) endpoint draws in generation order, before dedup.

    Exposed separately so edge-stream consumers can see arrival order.
    """
    rng = np.random.default_rng(params.seed)
    n = params.n
    budget = math.ceil(params.avg_degree * n / 2)
    a, b, c, _ = params.probs
    cut = np.array([a, a + b, a + b + c])
    quadrant = np.searchsorted(cut, rng.random((budget, params.scale)), side="right")
    powers = (1 << np.arange(params.scale - 1, -1, -1)).astype(np.int64)
    u = (quadrant >> 1).astype(np.int64) @ powers
    v = (quadrant & 1).astype(np.int64) @ powers
    return np.column_stack([u, v])


def rmat_generate(params: RmatParams) -> Graph:
    """Undirected simple graph on 2^scale vertices by recursive quadrant descent.

    Each of ceil(avg_degree * n / 2) draws picks one adjacency-matrix cell
    bit by bit; self-loops and duplicates are dropped rather than re-thrown,
    so the realized mean degree runs slightly under the target.
    """
    return Graph(params.n, rmat_draws(params), directed=False)


def glm_background_sample(model: LowRankExpectedModel, attrs: VertexAttributes,
                          seed: int) -> Graph:
    """Independent Bernoulli draw of each vertex pair from the model.

    Pair probabilities are clamped to [0, 1]; the model's nominal values can
    exceed 1 for strongly connected category pairs.
    """
    if attrs.n != model.n:
        raise GraphError(f"attributes cover {attrs.n} vertices, model {model.n}")
    if not np.array_equal(attrs.category, model.categories):
        raise GraphError("attribute categories disagree with model categories")
    n = model.n
    rng = np.random.default_rng(seed)
    chunks = []
    block = 256
    for start in range(0, n, block):
        rows = np.arange(start, min(start + block, n))
        p = np.clip(model.probability_rows(rows), 0.0, 1.0)
        hit = rng.random(p.shape) < p
        # keep i < j only
        hit &= np.arange(n)[None, :] > rows[:, None]
        bi, bj = np.nonzero(hit)
        chunks.append(np.column_stack([rows[bi], bj]))
    edges = np.concatenate(chunks) if chunks else np.empty((0, 2), dtype=np.int64)
    return Graph(n, edges, directed=False)


def uniform_attributes(n: int, dim: int, num_categories: int, seed: int) -> VertexAttributes:
    """Uniform unit-hypercube feature vectors and uniform category labels."""
    if n < 1 or dim < 1 or num_categories < 1:
        raise ValueError("n, dim, and num_categories must all be positive")
    rng = np.random.default_rng(seed)
    return VertexAttributes(x=rng.random((n, dim)),
                            category=rng.integers(0, num_categories, size=n))


def planted_attributed_model(n: int, avg_degree: float, num_categories: int,
                             assortativity: float, seed: int,
                             feature_dim: int = 3, degree_sigma: float = 1.0):
    """Skewed-degree blockmodel with category-assortative mixing.

    Target degrees are lognormal with shape ``degree_sigma``, scaled to mean
    ``avg_degree``.  Block masses interpolate between pure within-category
    (assortativity 1) and degree-proportional mixing (assortativity 0), so
    every vertex keeps its target expected degree exactly.  Returns the
    model together with matching attributes (uniform hypercube features
    plus the planted categories).
    """
    if not 0.0 <= assortativity <= 1.0:
        raise ValueError("assortativity must lie in [0, 1]")
    if avg_degree <= 0:
        raise ValueError("avg_degree must be positive")
    attrs = uniform_attributes(n, feature_dim, num_categories, split_seed(seed, "attrs"))
    rng = np.random.default_rng(split_seed(seed, "degrees"))
    d = rng.lognormal(mean=0.0, sigma=degree_sigma, size=n)
    d *= avg_degree / d.mean()
    kappa = np.bincount(attrs.category, weights=d, minlength=num_categories)
    # block masses with doubled diagonal, row sums pinned to kappa_r
    mix = assortativity * np.diag(kappa)
    mix = mix + (1.0 - assortativity) * np.outer(kappa, kappa) / kappa.sum()
    omega = mix / np.outer(kappa, kappa)
    model = LowRankExpectedModel(alpha=d, gamma=d.copy(),
                                 categories=attrs.category.copy(), omega=omega)
    return model, attrs


def _choose_vertices(n: int, spec: EmbeddingSpec, rng: np.random.Generator) -> np.ndarray:
    if spec.size > n:
        raise GraphError(f"embedding size {spec.size} exceeds vertex count {n}")
    if isinstance(spec.vertex_selection, str):
        return np.sort(rng.choice(n, size=spec.size, replace=False))
    chosen = np.asarray(spec.vertex_selection, dtype=np.int64)
    if chosen.size and (chosen.min() < 0 or chosen.max() >= n):
        raise GraphError("embedding vertex list out of range")
    return np.sort(chosen)


def _internal_edges(vertices: np.ndarray, density: float,
                    rng: np.random.Generator) -> np.ndarray:
    s = vertices.size
    iu, ju = np.triu_indices(s, k=1)
    keep = rng.random(iu.size) < density
    return np.column_stack([vertices[iu[keep]], vertices[ju[keep]]])


def embed_subgraph(g: Graph, spec: EmbeddingSpec, seed: int):
    """Add a dense subgraph on a chosen vertex subset; never removes edges.

    Each internal pair is drawn Bernoulli(density) and unioned with the
    background, so pairs already present stay present.  Returns the new
    graph and the sorted ground-truth vertex set.
    """
    rng = np.random.default_rng(seed)
    vertices = _choose_vertices(g.n, spec, rng)
    added = _internal_edges(vertices, spec.density, rng)
    return g.with_edges_added(added), vertices


def dynamic_embed(seq: TemporalGraphSequence, spec: EmbeddingSpec, seed: int):
    """Embed on one vertex set across all snapshots, density scaled per snapshot.

    Snapshot t gets internal density ``spec.density * profile[t]``, drawn
    independently, so the subgraph densifies and disperses following the
    profile while staying on the same vertices.
    """
    profile = spec.temporal_profile
    if profile is None:
        raise GraphError("dynamic embedding requires a temporal profile")
    if len(profile) != seq.num_snapshots:
        raise GraphError(f"profile has {len(profile)} entries for {seq.num_snapshots} snapshots")
    rng = np.random.default_rng(seed)
    vertices = _choose_vertices(seq.n, spec, rng)
    snapshots = []
    for t, g in enumerate(seq.snapshots):
        added = _internal_edges(vertices, spec.density * profile[t], rng)
        snapshots.append(g.with_edges_added(added))
    return TemporalGraphSequence(snapshots), vertices
