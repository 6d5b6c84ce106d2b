"""Spectral detection of small anomalous subgraphs in large graphs.

The processing chain: fit an expected-connectivity model to the observed
graph, form the residuals operator B = A - E[A] implicitly, project onto
the principal eigenvectors of B, compute a scalar detection statistic,
and identify the vertices carrying the anomaly.  Supporting machinery
covers synthetic backgrounds and embeddings, calibrated observation-noise
models, multi-source fusion, and communication-volume analysis of 2D
matvec partitionings.
"""

from graphresiduals.graph import (
    Graph,
    TemporalGraphSequence,
    VertexAttributes,
    edge_error_rate,
)
from graphresiduals.model import (
    GlmEdgeModel,
    LowRankExpectedModel,
    edge_probability,
    fit_moment_matching,
    fit_moment_matching_pooled,
    logistic_link,
    lowrank_from_glm,
)
from graphresiduals.spectral import EigenResult, ResidualsOperator, top_eigenpairs

__all__ = [
    "Graph",
    "VertexAttributes",
    "TemporalGraphSequence",
    "edge_error_rate",
    "GlmEdgeModel",
    "LowRankExpectedModel",
    "logistic_link",
    "edge_probability",
    "lowrank_from_glm",
    "fit_moment_matching",
    "fit_moment_matching_pooled",
    "ResidualsOperator",
    "EigenResult",
    "top_eigenpairs",
]

__version__ = "0.1.0"
