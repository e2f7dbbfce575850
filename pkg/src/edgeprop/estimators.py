"""Scikit-learn style estimators wrapping the functional core.

Both estimators follow the usual conventions (constructor stores
hyperparameters untouched, ``fit`` returns ``self``, fitted state lives in
trailing-underscore attributes, ``get_params``/``set_params``/``clone``
work), so they compose with pipelines and parameter search.  The "X" they
consume is a :class:`~edgeprop.graph.BipartiteEdgeGraph`: the classifier is
transductive, like label propagation, and predicts for the edges of the
graph it was fitted on.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.exceptions import NotFittedError

from .errors import ValidationError
from .graph import BipartiteEdgeGraph, build_incidence
from .metrics import DataSplit, evaluate_scores, make_split
from .propagation import VIEWS, ExactPropagator, FactorPropagator, build_factor
from .training import (
    SvdCache,
    TrainConfig,
    build_propagators,
    predict_graph,
    train,
)

__all__ = ["EdgePropagationEmbedder", "BipartiteEdgeClassifier"]


def _check_graph(graph) -> BipartiteEdgeGraph:
    if not isinstance(graph, BipartiteEdgeGraph):
        raise ValidationError(
            f"expected a BipartiteEdgeGraph, got {type(graph).__name__}"
        )
    return graph


class EdgePropagationEmbedder(TransformerMixin, BaseEstimator):
    """Fixed (non-trained) edge feature propagation as a transformer.

    ``fit`` factorizes the requested view of the graph; ``transform`` then
    propagates any per-edge feature matrix through it.  With ``k=None`` the
    propagation is solved exactly by fixed-point iteration instead.
    """

    def __init__(
        self,
        alpha: float = 0.5,
        beta: float = 0.5,
        k: int | None = 256,
        view: str = "combined",
        seed: int = 0,
        oversample: int = 10,
        power_iters: int = 7,
    ):
        self.alpha = alpha
        self.beta = beta
        self.k = k
        self.view = view
        self.seed = seed
        self.oversample = oversample
        self.power_iters = power_iters

    def fit(self, graph: BipartiteEdgeGraph, y=None) -> "EdgePropagationEmbedder":
        graph = _check_graph(graph)
        if self.view not in VIEWS:
            raise ValidationError(f"unknown view {self.view!r}")
        inc = build_incidence(graph)
        beta = self.beta if self.view == "combined" else None
        if self.k is None:
            self._propagator_ = ExactPropagator(inc, self.alpha,
                                                view=self.view, beta=beta)
            self.k_ = graph.num_edges
        else:
            k = min(self.k, graph.num_edges)
            factor = build_factor(
                inc, self.alpha, view=self.view, k=k, seed=self.seed,
                beta=beta, oversample=self.oversample,
                power_iters=self.power_iters,
            )
            self._propagator_ = FactorPropagator(factor)
            self.k_ = k
        self.n_edges_ = graph.num_edges
        return self

    def transform(self, features: np.ndarray) -> np.ndarray:
        if not hasattr(self, "_propagator_"):
            raise NotFittedError("EdgePropagationEmbedder is not fitted")
        features = np.asarray(features, dtype=np.float64)
        if features.ndim != 2 or features.shape[0] != self.n_edges_:
            raise ValidationError(
                f"features must be ({self.n_edges_}, z), got {features.shape}"
            )
        return self._propagator_.apply(features)


class BipartiteEdgeClassifier(ClassifierMixin, BaseEstimator):
    """Semi-supervised multi-label edge classifier.

    Trains the feature transform and output head with full-batch Adam,
    propagating features through the graph between them, and keeps the
    weight snapshot with the best validation AUC.  Refitting after changing
    only ``alpha``, ``gamma``, or ``combinator`` reuses the cached
    factorization of the same graph.
    """

    def __init__(
        self,
        alpha: float = 0.5,
        beta: float = 0.5,
        gamma: float = 0.5,
        k: int | None = 256,
        hidden_dim: int = 256,
        dropout: float = 0.5,
        learning_rate: float = 0.001,
        max_epochs: int = 300,
        mode: str = "single",
        combinator: str = "sum",
        seed: int = 0,
    ):
        self.alpha = alpha
        self.beta = beta
        self.gamma = gamma
        self.k = k
        self.hidden_dim = hidden_dim
        self.dropout = dropout
        self.learning_rate = learning_rate
        self.max_epochs = max_epochs
        self.mode = mode
        self.combinator = combinator
        self.seed = seed

    def _config(self, graph: BipartiteEdgeGraph) -> TrainConfig:
        k = self.k
        if k is not None:
            k = min(k, graph.num_edges)
        return TrainConfig(
            alpha=self.alpha, beta=self.beta, gamma=self.gamma, k=k,
            hidden_dim=self.hidden_dim, dropout=self.dropout,
            learning_rate=self.learning_rate, max_epochs=self.max_epochs,
            mode=self.mode, combinator=self.combinator, seed=self.seed,
        )

    def fit(
        self,
        graph: BipartiteEdgeGraph,
        y=None,
        split: DataSplit | None = None,
    ) -> "BipartiteEdgeClassifier":
        graph = _check_graph(graph)
        if y is not None:
            graph = BipartiteEdgeGraph(
                num_u=graph.num_u, num_v=graph.num_v, edges=graph.edges,
                attrs=graph.attrs, labels=np.asarray(y, dtype=np.float64),
            )
        if graph.labels is None:
            raise ValidationError("fit needs labels on the graph or via y")
        if split is None:
            split = make_split(graph, seed=self.seed)
        config = self._config(graph)
        if getattr(self, "_cached_graph_id_", None) != id(graph):
            self._svd_cache_ = SvdCache()
            self._cached_graph_id_ = id(graph)
            self._incidence_ = build_incidence(graph)
        result = train(graph, split, config,
                       cache=self._svd_cache_, incidence=self._incidence_)
        self.params_ = result.params
        self.history_ = result.history
        self.config_ = config
        self.split_ = split
        self.graph_ = graph
        self.n_classes_ = graph.num_classes
        self._propagators_ = build_propagators(
            self._incidence_, config, cache=self._svd_cache_
        )
        return self

    def predict_proba(self, edge_indices: np.ndarray | None = None) -> np.ndarray:
        """Per-class probabilities for the fitted graph's edges."""
        if not hasattr(self, "params_"):
            raise NotFittedError("BipartiteEdgeClassifier is not fitted")
        probs = predict_graph(
            self.graph_, self.params_, self.config_, propagators=self._propagators_
        )
        if edge_indices is None:
            return probs
        return probs[np.asarray(edge_indices, dtype=np.int64)]

    def predict(self, edge_indices: np.ndarray | None = None) -> np.ndarray:
        """Multi-hot 0/1 predictions at the 0.5 probability threshold."""
        return (self.predict_proba(edge_indices) >= 0.5).astype(np.float64)

    def score(self, edge_indices: np.ndarray | None = None, y=None) -> float:
        """Macro AUC on the given edges (defaults to the held-out test set)."""
        if not hasattr(self, "params_"):
            raise NotFittedError("BipartiteEdgeClassifier is not fitted")
        if edge_indices is None:
            edge_indices = self.split_.test_idx
        edge_indices = np.asarray(edge_indices, dtype=np.int64)
        y_true = self.graph_.labels[edge_indices] if y is None else np.asarray(y)
        report = evaluate_scores(self.predict_proba(edge_indices), y_true)
        return report.auc
