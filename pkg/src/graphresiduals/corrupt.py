"""Observation-uncertainty mechanisms and calibration to a target error rate.

Six ways an observed graph can differ from the truth: edge deletion,
uniform pair flips, degree-weighted pair flips, vertex subsampling,
snowball crawling, and similarity-based endpoint confusion.  Each is a
pure function of (truth, spec) with the randomness in ``spec.seed``.

``calibrate`` finds the mechanism parameter whose Monte Carlo mean
normalized edge error hits a target, by bisection on the monotone
parameter-to-error map (closed form for edge deletion).

Sampling mechanisms (vertex-subsample, snowball) keep the full vertex
space with unobserved vertices isolated, so the normalized error measured
against the truth automatically counts every truth edge incident to an
unobserved vertex as missing.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.spatial.distance import cdist

from graphresiduals.graph import Graph, GraphError, VertexAttributes, edge_error_rate
from graphresiduals.seeds import split_seed

MECHANISMS = (
    "edge-deletion",
    "uniform-flip",
    "degree-flip",
    "vertex-subsample",
    "snowball",
    "similarity-confusion",
)

DEFAULT_SNOWBALL_SEEDS = 5
DEFAULT_SNOWBALL_ROUNDS = 5
DEFAULT_CONFUSION_BANDWIDTH = 0.05

# required parameter keys and their validation ranges per mechanism
_PARAM_SCHEMA = {
    "edge-deletion": {"q": (0.0, 1.0)},
    "uniform-flip": {"epsilon": (0.0, 1.0)},
    # epsilon is a scale here, not a probability; the per-pair value is clamped
    "degree-flip": {"epsilon": (0.0, np.inf)},
    "vertex-subsample": {"fraction": (0.0, 1.0)},
    "snowball": {"follow": (0.0, 1.0), "num_seeds": (1, np.inf), "rounds": (1, np.inf)},
    "similarity-confusion": {"bandwidth": (0.0, np.inf)},
}


class CalibrationError(ValueError):
    """Target error rate unreachable; carries the achievable range."""

    def __init__(self, message: str, achievable: tuple[float, float]):
        super().__init__(message)
        self.achievable = achievable


@dataclass(frozen=True)
class CorruptionSpec:
    """One corruption mechanism with its parameters and replay seed."""

    mechanism: str
    params: dict
    seed: int = 0
    achieved_error: Optional[float] = None  # filled in by calibrate

    def __post_init__(self):
        if self.mechanism not in MECHANISMS:
            raise ValueError(f"unknown mechanism {self.mechanism!r}")
        schema = _PARAM_SCHEMA[self.mechanism]
        missing = set(schema) - set(self.params)
        if missing:
            raise ValueError(f"{self.mechanism} spec missing params {sorted(missing)}")
        extra = set(self.params) - set(schema)
        if extra:
            raise ValueError(f"{self.mechanism} spec has unknown params {sorted(extra)}")
        for key, (lo, hi) in schema.items():
            value = self.params[key]
            if not lo <= value <= hi:
                raise ValueError(f"{self.mechanism} param {key}={value} outside [{lo}, {hi}]")

    @classmethod
    def edge_deletion(cls, q: float, seed: int = 0) -> CorruptionSpec:
        return cls("edge-deletion", {"q": float(q)}, seed)

    @classmethod
    def uniform_flip(cls, epsilon: float, seed: int = 0) -> CorruptionSpec:
        return cls("uniform-flip", {"epsilon": float(epsilon)}, seed)

    @classmethod
    def degree_flip(cls, epsilon: float, seed: int = 0) -> CorruptionSpec:
        return cls("degree-flip", {"epsilon": float(epsilon)}, seed)

    @classmethod
    def vertex_subsample(cls, fraction: float, seed: int = 0) -> CorruptionSpec:
        return cls("vertex-subsample", {"fraction": float(fraction)}, seed)

    @classmethod
    def snowball(cls, follow: float, num_seeds: int = DEFAULT_SNOWBALL_SEEDS,
                 rounds: int = DEFAULT_SNOWBALL_ROUNDS, seed: int = 0) -> CorruptionSpec:
        return cls("snowball", {"follow": float(follow), "num_seeds": int(num_seeds),
                                "rounds": int(rounds)}, seed)

    @classmethod
    def similarity_confusion(cls, bandwidth: float = DEFAULT_CONFUSION_BANDWIDTH,
                             seed: int = 0) -> CorruptionSpec:
        return cls("similarity-confusion", {"bandwidth": float(bandwidth)}, seed)

    def with_seed(self, seed: int) -> CorruptionSpec:
        return replace(self, seed=seed)

    def to_json(self) -> dict:
        return {"mechanism": self.mechanism, "params": dict(self.params), "seed": self.seed}

    @classmethod
    def from_json(cls, data: dict) -> CorruptionSpec:
        return cls(data["mechanism"], dict(data["params"]), int(data.get("seed", 0)))


@dataclass
class ObservedGraph:
    """A corrupted view of some truth, with its generating spec.

    The graph lives on the full true vertex space; for sampling mechanisms
    ``observed_vertices`` lists the retained true ids (everything else is
    isolated), and is None when all vertices were observed.
    """

    graph: Graph
    provenance: CorruptionSpec
    observed_vertices: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.observed_vertices is not None:
            ids = np.asarray(self.observed_vertices, dtype=np.int64)
            if ids.size != np.unique(ids).size:
                raise GraphError("observed vertex map must be injective")
            self.observed_vertices = np.sort(ids)

    @property
    def n(self) -> int:
        return self.graph.n


def _sample_distinct_pairs(n: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` distinct unordered pairs, uniform, as codes u*n+v with u<v."""
    if count == 0:
        return np.empty(0, dtype=np.int64)
    total = n * (n - 1) // 2
    if count > total:
        raise GraphError(f"cannot draw {count} distinct pairs from {total}")
    if count > total // 8:
        # dense enumeration; rejection would thrash on collisions
        iu, ju = np.triu_indices(n, k=1)
        picked = rng.choice(total, size=count, replace=False)
        return np.sort(iu[picked].astype(np.int64) * n + ju[picked])
    codes = np.empty(0, dtype=np.int64)
    while True:
        batch = 64 + 2 * (count - codes.size)
        draw = rng.integers(0, n, size=(batch, 2))
        draw = draw[draw[:, 0] != draw[:, 1]]
        lo = draw.min(axis=1)
        hi = draw.max(axis=1)
        codes = np.concatenate([codes, lo * n + hi])
        uniq, first = np.unique(codes, return_index=True)
        if uniq.size >= count:
            # keep draw order so the without-replacement sample stays uniform
            order = np.sort(first)[:count]
            return codes[order]


def _decode_pairs(codes: np.ndarray, n: int) -> np.ndarray:
    return np.column_stack([codes // n, codes % n])


def _apply_edge_deletion(truth: Graph, q: float, rng: np.random.Generator) -> Graph:
    keep = rng.random(truth.num_edges) >= q
    return Graph(truth.n, truth.edges[keep])


def _apply_uniform_flip(truth: Graph, epsilon: float, rng: np.random.Generator) -> Graph:
    n = truth.n
    total = n * (n - 1) // 2
    count = rng.binomial(total, epsilon)
    flips = _sample_distinct_pairs(n, count, rng)
    new_codes = np.setxor1d(truth.edge_codes(), flips)
    return Graph(n, _decode_pairs(new_codes, n))


def _apply_degree_flip(truth: Graph, epsilon: float, rng: np.random.Generator) -> Graph:
    n = truth.n
    d = truth.degrees().astype(np.float64)
    dbar = d.mean()
    if dbar == 0.0:
        return Graph(n, truth.edges)
    flip_chunks = []
    block = max(1, min(n, 8 * 1024 * 1024 // max(1, n)))
    for start in range(0, n, block):
        rows = np.arange(start, min(start + block, n))
        p = np.minimum(1.0, epsilon * np.outer(d[rows], d) / dbar**2)
        hit = rng.random(p.shape) < p
        hit &= np.arange(n)[None, :] > rows[:, None]
        bi, bj = np.nonzero(hit)
        flip_chunks.append(rows[bi] * n + bj)
    flips = np.concatenate(flip_chunks) if flip_chunks else np.empty(0, dtype=np.int64)
    new_codes = np.setxor1d(truth.edge_codes(), flips)
    return Graph(n, _decode_pairs(new_codes, n))


def _apply_vertex_subsample(truth: Graph, fraction: float, rng: np.random.Generator):
    n = truth.n
    count = int(round(fraction * n))
    kept = np.sort(rng.choice(n, size=count, replace=False))
    return truth.induced_on(kept), kept


def _apply_snowball(truth: Graph, follow: float, num_seeds: int, rounds: int,
                    rng: np.random.Generator):
    """Wave-capped crawl from random seeds; one inclusion draw per vertex.

    A vertex first reached in wave k <= rounds joins the observed set with
    probability ``follow`` and is never reconsidered after failing, so the
    crawl is site percolation truncated at ``rounds`` waves.  Observation
    is the exact induced subgraph of the included set.
    """
    n = truth.n
    if num_seeds < 1:
        raise GraphError("snowball needs at least one seed vertex")
    if num_seeds > n:
        raise GraphError(f"snowball seed count {num_seeds} exceeds vertex count {n}")
    seeds = np.sort(rng.choice(n, size=num_seeds, replace=False))
    included = np.zeros(n, dtype=bool)
    decided = np.zeros(n, dtype=bool)
    included[seeds] = True
    decided[seeds] = True
    frontier = [int(s) for s in seeds]
    for _ in range(int(rounds)):
        if not frontier:
            break
        next_frontier = []
        for v in frontier:
            for u in truth.neighbors(v):
                u = int(u)
                if decided[u]:
                    continue
                decided[u] = True
                if rng.random() < follow:
                    included[u] = True
                    next_frontier.append(u)
        frontier = next_frontier
    kept = np.flatnonzero(included)
    return truth.induced_on(kept), kept


def _draw_excluding(cum: np.ndarray, weights: np.ndarray, endpoints: np.ndarray,
                    excluded: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Inverse-CDF draw from each endpoint's weight row, skipping one column.

    The excluded column (the edge's other endpoint, which would form a
    self-loop) is removed by shifting draws that land past its cumulative
    position; the original endpoint itself stays the modal outcome.
    """
    w_ex = weights[endpoints, excluded]
    before = cum[endpoints, excluded] - w_ex
    r = rng.random(endpoints.size) * (cum[endpoints, -1] - w_ex)
    r = np.where(r < before, r, r + w_ex)
    return (cum[endpoints] <= r[:, None]).sum(axis=1)


def _apply_similarity_confusion(truth: Graph, attrs: VertexAttributes, bandwidth: float,
                                rng: np.random.Generator) -> Graph:
    n = truth.n
    if n > 4096:
        raise GraphError("similarity-confusion is desk-scale only (n <= 4096)")
    u, v = truth.edges[:, 0], truth.edges[:, 1]
    weights = np.exp(-cdist(attrs.x, attrs.x, "sqeuclidean") / bandwidth)
    cum = np.cumsum(weights, axis=1)
    new_u = _draw_excluding(cum, weights, u, v, rng)
    new_v = _draw_excluding(cum, weights, v, u, rng)
    return Graph(n, np.column_stack([new_u, new_v]))


def apply_corruption(truth: Graph, spec: CorruptionSpec,
                     attrs: Optional[VertexAttributes] = None) -> ObservedGraph:
    """One corrupted observation of ``truth`` under ``spec``.

    ``attrs`` supplies the feature vectors for similarity-confusion and is
    ignored by every other mechanism.
    """
    if truth.directed:
        raise GraphError("corruption mechanisms are defined for undirected graphs")
    rng = np.random.default_rng(spec.seed)
    p = spec.params
    observed = None
    if spec.mechanism == "edge-deletion":
        g = _apply_edge_deletion(truth, p["q"], rng)
    elif spec.mechanism == "uniform-flip":
        g = _apply_uniform_flip(truth, p["epsilon"], rng)
    elif spec.mechanism == "degree-flip":
        g = _apply_degree_flip(truth, p["epsilon"], rng)
    elif spec.mechanism == "vertex-subsample":
        g, observed = _apply_vertex_subsample(truth, p["fraction"], rng)
    elif spec.mechanism == "snowball":
        g, observed = _apply_snowball(truth, p["follow"], p["num_seeds"], p["rounds"], rng)
    else:  # similarity-confusion
        if attrs is None:
            raise GraphError("similarity-confusion requires vertex attributes")
        if attrs.n != truth.n:
            raise GraphError(f"attributes cover {attrs.n} vertices, graph has {truth.n}")
        g = _apply_similarity_confusion(truth, attrs, p["bandwidth"], rng)
    return ObservedGraph(graph=g, provenance=spec, observed_vertices=observed)


def measure_error(truth: Graph, spec: CorruptionSpec, trials: int, master_seed: int = 0,
                  attrs: Optional[VertexAttributes] = None) -> float:
    """Monte Carlo mean normalized edge error of a mechanism on ``truth``."""
    if trials < 1:
        raise ValueError("need at least one trial")
    errors = [
        edge_error_rate(truth, apply_corruption(truth, spec.with_seed(split_seed(master_seed, t)),
                                                attrs).graph)
        for t in range(trials)
    ]
    return float(np.mean(errors))


# parameter key, bisection direction, and initial bracket guess per mechanism
def _calibration_plan(mechanism: str, truth: Graph, target: float):
    num_pairs = truth.n * (truth.n - 1) // 2
    density_guess = target * truth.num_edges / max(1, num_pairs)
    if mechanism == "uniform-flip":
        return "epsilon", "increasing", max(1e-12, density_guess), None
    if mechanism == "degree-flip":
        return "epsilon", "increasing", max(1e-12, density_guess), None
    if mechanism == "vertex-subsample":
        return "fraction", "decreasing", 1.0 / truth.n, 1.0
    if mechanism == "snowball":
        return "follow", "decreasing", 1e-6, 1.0
    if mechanism == "similarity-confusion":
        return "bandwidth", "increasing", 1e-4, None
    raise ValueError(f"unknown mechanism {mechanism!r}")


def calibrate(truth: Graph, mechanism: str, target_error: float, seeds: int,
              attrs: Optional[VertexAttributes] = None, master_seed: int = 0) -> CorruptionSpec:
    """Mechanism spec whose mean edge error over ``seeds`` trials hits the target.

    Edge deletion is closed form (expected error is exactly the deletion
    probability).  The rest bisect their scalar parameter against the
    Monte Carlo mean with common trial seeds, to |mean - target| <= 0.01;
    an unreachable target raises CalibrationError with the achievable
    range.  The returned spec carries the measured error in
    ``achieved_error``.
    """
    if not 0.0 < target_error <= 1.0:
        raise ValueError(f"target error must be in (0, 1], got {target_error}")
    if truth.num_edges == 0:
        raise GraphError("cannot calibrate against an edgeless truth")
    if mechanism == "edge-deletion":
        spec = CorruptionSpec.edge_deletion(target_error, seed=master_seed)
        return replace(spec, achieved_error=target_error)

    key, direction, lo, hi = _calibration_plan(mechanism, truth, target_error)

    def build(value: float) -> CorruptionSpec:
        params = {key: float(value)}
        if mechanism == "snowball":
            params["num_seeds"] = DEFAULT_SNOWBALL_SEEDS
            params["rounds"] = DEFAULT_SNOWBALL_ROUNDS
        return CorruptionSpec(mechanism, params, seed=master_seed)

    def mean_error(value: float) -> float:
        return measure_error(truth, build(value), trials=seeds, master_seed=master_seed,
                             attrs=attrs)

    if direction == "increasing":
        # grow the upper bracket until the target is straddled
        if hi is None:
            hi = lo
        err_hi = mean_error(hi)
        for _ in range(60):
            if err_hi >= target_error:
                break
            bound = _PARAM_SCHEMA[mechanism][key][1]
            if hi >= bound:
                raise CalibrationError(
                    f"{mechanism} cannot reach error {target_error}; max is about {err_hi:.3f}",
                    (0.0, err_hi))
            hi = min(bound, 2.0 * hi)
            err_hi = mean_error(hi)
        else:
            raise CalibrationError(
                f"{mechanism} cannot reach error {target_error}; max is about {err_hi:.3f}",
                (0.0, err_hi))
        lo_err, hi_err = 0.0, err_hi
    else:
        lo_err = mean_error(lo)
        hi_err = mean_error(hi)
        if not (hi_err <= target_error <= lo_err):
            raise CalibrationError(
                f"{mechanism} cannot reach error {target_error}; "
                f"achievable range is about [{hi_err:.3f}, {lo_err:.3f}]",
                (hi_err, lo_err))

    best, best_err = None, np.inf
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        err = mean_error(mid)
        if abs(err - target_error) < abs(best_err - target_error):
            best, best_err = mid, err
        if abs(err - target_error) <= 0.005:
            break
        went_over = err > target_error
        if direction == "decreasing":
            went_over = not went_over
        if went_over:
            hi = mid
        else:
            lo = mid
    if abs(best_err - target_error) > 0.01:
        raise CalibrationError(
            f"{mechanism} bisection stalled at error {best_err:.3f} for target {target_error}",
            (min(lo_err, hi_err), max(lo_err, hi_err)))
    return replace(build(best), achieved_error=float(best_err))
