"""Fusing multiple corrupted observations of one latent graph.

Two modes.  A weighted sum stacks the observed adjacency matrices with
per-source weights, so the residuals input becomes
``sum_i w_i A_i - (sum_i w_i) E[A]``.  Bayesian fusion instead computes a
per-pair posterior edge probability from the background model prior and
the per-mechanism observation likelihoods, and the residuals input is
``P_posterior - E[A]``.

Bayesian likelihoods are defined pairwise-independently, which restricts
that mode to the deletion and flip mechanisms; crawling and subsampling
observations couple pairs through vertex visibility and are rejected.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

from graphresiduals.corrupt import CorruptionSpec, ObservedGraph
from graphresiduals.model import LowRankExpectedModel, logistic_link
from graphresiduals.spectral import ResidualsOperator

BAYESIAN_MECHANISMS = ("edge-deletion", "uniform-flip", "degree-flip")
BAYESIAN_MAX_N = 8192
_DENSE_CAP = 4096


class FusionError(ValueError):
    pass


def _log(x):
    with np.errstate(divide="ignore"):
        return np.log(x)


class _LikelihoodSource:
    """Per-pair log likelihood ratios log P(obs|edge)/P(obs|no edge).

    ``base(rows)`` is the obs=0 term for a block of rows (constant for
    deletion and uniform flips, degree-dependent for degree flips);
    ``delta`` is a sparse matrix adding (obs=1 term - obs=0 term) at each
    observed edge.  Infinite values are legitimate: a deletion source
    observing an edge certifies it.
    """

    def __init__(self, obs: ObservedGraph, spec: CorruptionSpec,
                 prior: LowRankExpectedModel):
        if spec.mechanism not in BAYESIAN_MECHANISMS:
            raise FusionError(
                f"{spec.mechanism} has no pairwise-independent likelihood; "
                "Bayesian fusion accepts deletion and flip mechanisms only")
        self.mechanism = spec.mechanism
        self.n = obs.n
        if spec.mechanism == "edge-deletion":
            q = spec.params["q"]
            # an observed edge certifies a true edge (nothing is ever added)
            self._lr0 = _log(np.float64(q))
            self._lr1 = np.inf if q < 1.0 else 0.0
            self._degree_p = None
        elif spec.mechanism == "uniform-flip":
            eps = spec.params["epsilon"]
            self._lr0 = _log(np.float64(eps)) - _log(np.float64(1.0 - eps))
            self._lr1 = -self._lr0
            self._degree_p = None
        else:  # degree-flip: plug in the prior's expected degrees for the
            # unknown true degrees
            eps = spec.params["epsilon"]
            d = prior.expected_degrees()
            dbar = d.mean()
            if dbar <= 0:
                raise FusionError("degree-flip likelihood needs a prior with positive "
                                  "expected degrees")
            self._degree_p = (eps, d, dbar)
            self._lr0 = self._lr1 = None
        self._adj = sp.csr_array(obs.graph.adjacency().astype(np.float64))

    def log_odds_rows(self, rows: np.ndarray) -> np.ndarray:
        """Block of log likelihood ratios for rows x all columns."""
        observed = self._adj[rows].toarray() != 0.0
        if self._degree_p is None:
            return np.where(observed, self._lr1, self._lr0)
        eps, d, dbar = self._degree_p
        p = np.minimum(1.0, eps * np.outer(d[rows], d) / dbar**2)
        lr0 = _log(p) - _log(1.0 - p)
        return np.where(observed, -lr0, lr0)


class PosteriorMatrix:
    """Posterior edge-probability matrix, dense when small, blocked when not.

    Symmetric, diagonal zero, values in [0, 1].  Provides the matvec
    interface the residuals operator expects from an observation-side
    term; a dense posterior costs n*n per application.
    """

    def __init__(self, prior: LowRankExpectedModel, sources: list[_LikelihoodSource]):
        self.prior = prior
        self.n = prior.n
        self.sources = sources
        self.matvec_cost = self.n * self.n
        self._dense = self._materialize() if self.n <= _DENSE_CAP else None

    @property
    def dim(self) -> int:
        return self.n

    def rows(self, rows: np.ndarray) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.int64)
        if self._dense is not None:
            return self._dense[rows]
        return self._compute_rows(rows)

    def _compute_rows(self, rows: np.ndarray) -> np.ndarray:
        p = np.clip(self.prior.probability_rows(rows), 0.0, 1.0)
        with np.errstate(divide="ignore"):
            log_odds = np.log(p) - np.log1p(-p)
        for source in self.sources:
            contribution = source.log_odds_rows(rows)
            with np.errstate(invalid="raise"):
                try:
                    log_odds = log_odds + contribution
                except FloatingPointError:
                    raise FusionError(
                        "contradictory zero-noise evidence: some pair is certain-edge "
                        "for one source and certain-non-edge for another") from None
        post = logistic_link(log_odds)
        post[np.arange(rows.size), rows] = 0.0
        return post

    def _materialize(self) -> np.ndarray:
        out = np.empty((self.n, self.n))
        block = max(1, _DENSE_CAP * 1024 // max(1, self.n))
        for start in range(0, self.n, block):
            rows = np.arange(start, min(start + block, self.n))
            out[rows] = self._compute_rows(rows)
        return out

    def dense(self) -> np.ndarray:
        if self._dense is None:
            raise FusionError(f"posterior with n = {self.n} is too large to materialize")
        return self._dense

    def pair(self, u: int, v: int) -> float:
        if u == v:
            return 0.0
        return float(self.rows(np.array([u]))[0, v])

    def matvec(self, x: np.ndarray) -> np.ndarray:
        if self._dense is not None:
            return self._dense @ x
        y = np.empty(self.n)
        block = max(1, _DENSE_CAP * 1024 // max(1, self.n))
        for start in range(0, self.n, block):
            rows = np.arange(start, min(start + block, self.n))
            y[rows] = self._compute_rows(rows) @ x
        return y


@dataclass
class FusedGraph:
    """One fused observation ready to feed the residuals operator.

    ``expectation_scale`` is the weight the expectation side must carry:
    the sum of source weights in weighted mode, 1 in Bayesian mode.
    """

    n: int
    mode: str  # "weighted" | "bayesian"
    expectation_scale: float
    matrix: Optional[sp.csr_array] = None
    posterior: Optional[PosteriorMatrix] = None

    def pair_value(self, u: int, v: int) -> float:
        if self.mode == "weighted":
            return float(self.matrix[u, v])
        return self.posterior.pair(u, v)

    def operator(self, model: Optional[LowRankExpectedModel]) -> ResidualsOperator:
        """Residuals operator B = fused - expectation_scale * E[A].

        Bayesian mode embeds its prior; passing a different model here
        overrides it as the expectation side.
        """
        if self.mode == "weighted":
            return ResidualsOperator.from_matrix(
                self.matrix, model, expectation_scale=self.expectation_scale)
        if model is None:
            model = self.posterior.prior
        return ResidualsOperator([(self.posterior, 1.0)], model,
                                 expectation_scale=self.expectation_scale, n=self.n)


def _default_weights(observations: list[ObservedGraph]) -> np.ndarray:
    errs = []
    for i, obs in enumerate(observations):
        err = obs.provenance.achieved_error
        if err is None:
            raise FusionError(
                f"observation {i} has no calibrated error rate; pass weights explicitly")
        errs.append(err)
    w = 1.0 - np.asarray(errs, dtype=np.float64)
    w = np.clip(w, 0.0, None)
    if w.sum() == 0.0:
        raise FusionError("all sources have error rate >= 1; weights are degenerate")
    return w / w.sum()


def weighted_sum_fusion(observations: list[ObservedGraph],
                        weights=None) -> FusedGraph:
    """Per-pair weighted sum of the observed adjacency matrices.

    Default weights are proportional to (1 - calibrated error rate),
    normalized to sum 1.  Sampling-mechanism observations participate on
    the full vertex space, unobserved vertices contributing zero rows.
    """
    if not observations:
        raise FusionError("need at least one observation")
    n = observations[0].n
    if any(o.n != n for o in observations):
        raise FusionError("all observations must share the same vertex count")
    if weights is None:
        weights = _default_weights(observations)
    weights = np.asarray(weights, dtype=np.float64).reshape(-1)
    if weights.shape[0] != len(observations):
        raise FusionError(f"{weights.shape[0]} weights for {len(observations)} observations")
    total = sp.csr_array((n, n), dtype=np.float64)
    for obs, w in zip(observations, weights):
        total = total + w * obs.graph.adjacency().astype(np.float64)
    return FusedGraph(n=n, mode="weighted", expectation_scale=float(weights.sum()),
                      matrix=sp.csr_array(total))


def bayesian_fusion(observations: list[ObservedGraph],
                    specs: Optional[list[CorruptionSpec]] = None,
                    prior: LowRankExpectedModel = None) -> FusedGraph:
    """Per-pair posterior edge probability from prior odds and source likelihoods.

    ``specs`` defaults to each observation's provenance; pass them
    explicitly when the generating parameters are known more precisely
    than the replayed specs.  Only deletion and flip mechanisms are
    accepted (their likelihoods factor over pairs).
    """
    if not observations:
        raise FusionError("need at least one observation")
    if prior is None:
        raise FusionError("Bayesian fusion needs a prior background model")
    if specs is None:
        specs = [o.provenance for o in observations]
    if len(specs) != len(observations):
        raise FusionError(f"{len(specs)} specs for {len(observations)} observations")
    n = observations[0].n
    if any(o.n != n for o in observations) or prior.n != n:
        raise FusionError("observations and prior must share the same vertex count")
    if n > BAYESIAN_MAX_N:
        raise FusionError(f"Bayesian fusion is desk-scale only (n <= {BAYESIAN_MAX_N})")
    sources = [_LikelihoodSource(o, s, prior) for o, s in zip(observations, specs)]
    posterior = PosteriorMatrix(prior, sources)
    return FusedGraph(n=n, mode="bayesian", expectation_scale=1.0, posterior=posterior)
