"""Edge-wise representation learning on edge-attributed bipartite graphs.

The package factors the edge transition structure of a bipartite graph and
propagates per-edge features through it to build edge embeddings, with a
small semi-supervised classification head on top.  Every factorized
computation has an exact dense counterpart used for verification.
"""

from .errors import (
    DegenerateGraphError,
    DenseCapError,
    NumericalError,
    ValidationError,
)
from .estimators import BipartiteEdgeClassifier, EdgePropagationEmbedder
from .graph import (
    BipartiteEdgeGraph,
    Incidence,
    build_incidence,
    combined_incidence,
    normalized_incidence,
    transition_dense,
    transition_matvec,
    transition_u,
    transition_v,
)
from .metrics import (
    DataSplit,
    MetricReport,
    average_precision,
    evaluate_scores,
    make_split,
    roc_auc,
)
from .propagation import (
    EdgeEmbedding,
    PropagationFactor,
    build_factor,
    objective_value,
    propagate,
    propagate_dual,
    view_svd,
)
from .sparse import (
    CsrMatrix,
    SvdFactors,
    dense_inverse_solve,
    power_iteration_solve,
    spmm,
    truncated_series,
    truncated_svd,
)
from .spectral import SpectralReport, spectral_report, variance_contraction
from .synth import bfs_sample, synthetic_graph
from .training import (
    ModelParams,
    SvdCache,
    TrainConfig,
    TrainResult,
    adam_step,
    bce_loss,
    build_propagators,
    feature_transform,
    predict_graph,
    predict_probabilities,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "BipartiteEdgeGraph",
    "Incidence",
    "CsrMatrix",
    "SvdFactors",
    "PropagationFactor",
    "EdgeEmbedding",
    "SpectralReport",
    "MetricReport",
    "DataSplit",
    "TrainConfig",
    "ModelParams",
    "TrainResult",
    "SvdCache",
    "BipartiteEdgeClassifier",
    "EdgePropagationEmbedder",
    "ValidationError",
    "DegenerateGraphError",
    "DenseCapError",
    "NumericalError",
    "build_incidence",
    "transition_u",
    "transition_v",
    "combined_incidence",
    "normalized_incidence",
    "transition_dense",
    "transition_matvec",
    "spmm",
    "truncated_svd",
    "dense_inverse_solve",
    "truncated_series",
    "power_iteration_solve",
    "spectral_report",
    "variance_contraction",
    "view_svd",
    "build_factor",
    "propagate",
    "propagate_dual",
    "objective_value",
    "feature_transform",
    "predict_probabilities",
    "bce_loss",
    "adam_step",
    "build_propagators",
    "train",
    "predict_graph",
    "make_split",
    "average_precision",
    "roc_auc",
    "evaluate_scores",
    "synthetic_graph",
    "bfs_sample",
]
