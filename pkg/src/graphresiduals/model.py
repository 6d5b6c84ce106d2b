"""Attributed edge-probability models and the implicit low-rank E[A] operator.

The generalized linear edge model assigns pair (i, j) the probability
``link(x_i . b1 + x_j . b2 + x_ij . b3)``.  With an exponential link and
pair features restricted to one-hot category-pair indicators, the
probability factors into a per-source term, a per-destination term, and a
category-pair rate: ``p_ij = alpha_i * gamma_j * omega[c_i, c_j]``.  That
is the degree-corrected blockmodel form, and it makes E[A] low rank, so
E[A] @ x costs O(n k + k^2) without materializing the matrix.

Parameters are estimated by first-moment matching: alpha_i = d_i and
omega_rs = m_rs / (kappa_r * kappa_s), which reproduces every vertex
degree and every block edge count exactly (self-pair term included at
its nominal value).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from graphresiduals.graph import Graph, GraphError, VertexAttributes

MODEL_FORMAT_VERSION = 1


def logistic_link(x):
    """1 / (1 + exp(-x)); monotone, in (0, 1); scalar in, scalar out.

    Accepts arrays too; evaluated on the side that avoids exp overflow.
    """
    arr = np.atleast_1d(np.asarray(x, dtype=np.float64))
    out = np.empty_like(arr)
    pos = arr >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-arr[pos]))
    e = np.exp(arr[~pos])
    out[~pos] = e / (1.0 + e)
    return float(out[0]) if np.ndim(x) == 0 else out


@dataclass(frozen=True)
class GlmEdgeModel:
    """Edge-probability GLM: weights for source, destination, and pair features."""

    beta1: np.ndarray
    beta2: np.ndarray
    beta3: np.ndarray
    link: str = "logistic"

    def __post_init__(self):
        object.__setattr__(self, "beta1", np.asarray(self.beta1, dtype=np.float64).reshape(-1))
        object.__setattr__(self, "beta2", np.asarray(self.beta2, dtype=np.float64).reshape(-1))
        object.__setattr__(self, "beta3", np.asarray(self.beta3, dtype=np.float64).reshape(-1))
        if self.link not in ("logistic", "exponential"):
            raise ValueError(f"unknown link {self.link!r}")
        if self.beta1.shape != self.beta2.shape:
            raise ValueError("beta1 and beta2 must share the attribute dimension")


def edge_probability(model: GlmEdgeModel, xi, xj, xij) -> float:
    """Evaluate the GLM edge probability for one vertex pair.

    The exponential link is clamped to [0, 1]; the logistic link needs none.
    """
    xi = np.asarray(xi, dtype=np.float64).reshape(-1)
    xj = np.asarray(xj, dtype=np.float64).reshape(-1)
    xij = np.asarray(xij, dtype=np.float64).reshape(-1)
    if xi.shape != model.beta1.shape or xj.shape != model.beta2.shape:
        raise ValueError("vertex attribute dimension does not match model")
    if xij.shape != model.beta3.shape:
        raise ValueError("pair feature dimension does not match model")
    eta = float(xi @ model.beta1 + xj @ model.beta2 + (xij @ model.beta3 if xij.size else 0.0))
    if model.link == "logistic":
        return logistic_link(eta)
    return float(min(1.0, np.exp(eta)))


@dataclass
class LowRankExpectedModel:
    """Factored expected-adjacency model p_ij = alpha_i * gamma_j * omega[c_i, c_j].

    For undirected use alpha is gamma and omega is symmetric.  Values are
    nonnegative but not clamped to 1: clamping would destroy the low-rank
    structure, and the small-probability regime keeps the excess
    negligible (sampling clamps; the matvec operator does not).
    """

    alpha: np.ndarray
    gamma: np.ndarray
    categories: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=np.float64).reshape(-1)
        self.gamma = np.asarray(self.gamma, dtype=np.float64).reshape(-1)
        self.categories = np.asarray(self.categories, dtype=np.int64).reshape(-1)
        self.omega = np.asarray(self.omega, dtype=np.float64)
        n, k = self.alpha.shape[0], self.omega.shape[0]
        if self.gamma.shape[0] != n or self.categories.shape[0] != n:
            raise ValueError("alpha, gamma, categories must share length n")
        if self.omega.ndim != 2 or self.omega.shape != (k, k):
            raise ValueError("omega must be a square k x k matrix")
        if self.categories.size and (self.categories.min() < 0 or self.categories.max() >= k):
            raise ValueError(f"categories must lie in [0, {k})")
        if (self.alpha < 0).any() or (self.gamma < 0).any() or (self.omega < 0).any():
            raise ValueError("model factors must be nonnegative")

    @property
    def n(self) -> int:
        return self.alpha.shape[0]

    @property
    def k(self) -> int:
        return self.omega.shape[0]

    @property
    def undirected(self) -> bool:
        return np.array_equal(self.alpha, self.gamma) and np.allclose(self.omega, self.omega.T)

    def pair_probability(self, i: int, j: int) -> float:
        """Unclamped p_ij; zero for the self pair."""
        if i == j:
            return 0.0
        return float(self.alpha[i] * self.gamma[j]
                     * self.omega[self.categories[i], self.categories[j]])

    def probability_row(self, i: int) -> np.ndarray:
        """Unclamped row p_i,: with the self entry zeroed."""
        row = self.alpha[i] * self.gamma * self.omega[self.categories[i], self.categories]
        row[i] = 0.0
        return row

    def probability_rows(self, rows: np.ndarray) -> np.ndarray:
        """Unclamped block p[rows, :] with self entries zeroed; O(|rows| n)."""
        rows = np.asarray(rows, dtype=np.int64)
        block = (self.alpha[rows, None] * self.gamma[None, :]
                 * self.omega[self.categories[rows][:, None], self.categories[None, :]])
        block[np.arange(len(rows)), rows] = 0.0
        return block

    def dense(self) -> np.ndarray:
        """Materialized E[A] with zero diagonal; guarded for test-scale n."""
        if self.n > 4096:
            raise ValueError("dense materialization is capped at n = 4096")
        return self.probability_rows(np.arange(self.n))

    def self_pair_values(self) -> np.ndarray:
        """Nominal diagonal values alpha_i * gamma_i * omega[c_i, c_i]."""
        return self.alpha * self.gamma * self.omega[self.categories, self.categories]

    def expected_degrees(self) -> np.ndarray:
        """Row sums excluding the self pair: sum_{j != i} p_ij."""
        return self.matvec(np.ones(self.n))

    def matvec(self, x: np.ndarray) -> np.ndarray:
        """E[A] @ x in O(n k + k^2), self pairs contributing zero."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.n,):
            raise ValueError(f"expected vector of length {self.n}, got shape {x.shape}")
        block_sums = np.bincount(self.categories, weights=self.gamma * x, minlength=self.k)
        per_category = self.omega @ block_sums
        return self.alpha * per_category[self.categories] - self.self_pair_values() * x

    def to_json(self) -> str:
        if not self.undirected:
            raise ValueError("serialization covers undirected models (alpha == gamma)")
        payload = {
            "format_version": MODEL_FORMAT_VERSION,
            "alpha": self.alpha.tolist(),
            "categories": self.categories.tolist(),
            "omega": self.omega.tolist(),
        }
        return json.dumps(payload, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> LowRankExpectedModel:
        payload = json.loads(text)
        version = payload.get("format_version")
        if version != MODEL_FORMAT_VERSION:
            raise ValueError(f"unsupported model format version {version!r}")
        alpha = np.asarray(payload["alpha"], dtype=np.float64)
        return cls(
            alpha=alpha,
            gamma=alpha.copy(),
            categories=np.asarray(payload["categories"], dtype=np.int64),
            omega=np.asarray(payload["omega"], dtype=np.float64),
        )


def expected_matvec(model: LowRankExpectedModel, x: np.ndarray) -> np.ndarray:
    """E[A] @ x through the factored form; see LowRankExpectedModel.matvec."""
    return model.matvec(x)


def lowrank_from_glm(model: GlmEdgeModel, attrs: VertexAttributes) -> LowRankExpectedModel:
    """Factor an exponential-link GLM with category-pair features into DC-SBM form.

    Pair features must be one-hot indicators over the k*k category pairs
    (beta3[r * k + s] is the weight for pair (r, s)), so
    exp(eta_ij) = exp(x_i . b1) * exp(x_j . b2) * exp(b3[c_i * k + c_j]).
    The factorization reproduces the exponential-link edge probability
    exactly; against the logistic link it overshoots by the factor
    1 + exp(eta), negligible when all linear predictors are well below 0.
    """
    k = attrs.k
    if model.beta3.shape[0] != k * k:
        raise ValueError(
            f"pair features must be one-hot over {k}x{k} category pairs; "
            f"beta3 has length {model.beta3.shape[0]}"
        )
    if model.beta1.shape[0] != attrs.d:
        raise ValueError("attribute dimension does not match model")
    alpha = np.exp(attrs.x @ model.beta1)
    gamma = np.exp(attrs.x @ model.beta2)
    omega = np.exp(model.beta3.reshape(k, k))
    return LowRankExpectedModel(alpha=alpha, gamma=gamma,
                                categories=attrs.category.copy(), omega=omega)


def fit_moment_matching(g: Graph, categories: np.ndarray) -> LowRankExpectedModel:
    """Degree-corrected blockmodel estimate matching first moments exactly.

    alpha_i = gamma_i = d_i and omega_rs = m_rs / (kappa_r * kappa_s),
    where kappa_r sums degrees over block r and m_rs counts edges between
    blocks r and s with the within-block count doubled.  The fitted model
    then satisfies sum_j p_ij = d_i for every vertex (self pair included
    at its nominal value) and reproduces every block edge count.

    Zero-degree vertices get alpha_i = 0; blocks with kappa_r = 0 produce
    0/0 omega entries, defined as 0 (no evidence predicts no edges).
    """
    return fit_moment_matching_pooled([g], categories)


def fit_moment_matching_pooled(graphs, categories: np.ndarray) -> LowRankExpectedModel:
    """Moment-matching fit on snapshot-averaged degrees and block counts.

    Snapshots share one vertex set and one category labeling; degrees and
    block edge counts are averaged over snapshots before the blockmodel
    formulas apply, so sum_j p_ij equals the mean degree of vertex i.
    With a single graph this reduces to ``fit_moment_matching``.
    """
    graphs = list(graphs)
    if not graphs:
        raise GraphError("need at least one snapshot to fit")
    n = graphs[0].n
    for g in graphs:
        if g.directed:
            raise GraphError("moment matching expects undirected graphs")
        if g.n != n:
            raise GraphError("snapshots must share one vertex set")
    categories = np.asarray(categories, dtype=np.int64).reshape(-1)
    if categories.shape[0] != n:
        raise GraphError("category labels must cover all vertices")
    k = int(categories.max()) + 1 if categories.size else 1
    counts = np.bincount(categories, minlength=k)
    if (counts == 0).any():
        raise GraphError(f"empty category among [0, {k})")

    degrees = np.zeros(n)
    m = np.zeros((k, k))
    for g in graphs:
        degrees += g.degrees()
        cu = categories[g.edges[:, 0]]
        cv = categories[g.edges[:, 1]]
        np.add.at(m, (cu, cv), 1.0)
        np.add.at(m, (cv, cu), 1.0)  # doubles the diagonal blocks
    degrees /= len(graphs)
    m /= len(graphs)
    kappa = np.bincount(categories, weights=degrees, minlength=k)

    denom = np.outer(kappa, kappa)
    with np.errstate(divide="ignore", invalid="ignore"):
        omega = np.where(denom > 0, m / np.where(denom > 0, denom, 1.0), 0.0)

    return LowRankExpectedModel(alpha=degrees, gamma=degrees.copy(),
                                categories=categories.copy(), omega=omega)
