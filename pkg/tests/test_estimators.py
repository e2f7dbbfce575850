"""Estimator API: params handling, fit/transform/predict, cache reuse."""

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from edgeprop.errors import ValidationError
from edgeprop.estimators import BipartiteEdgeClassifier, EdgePropagationEmbedder
from edgeprop.graph import build_incidence, transition_dense
from edgeprop.metrics import evaluate_scores, make_split
from edgeprop.propagation import build_factor, propagate
from edgeprop.sparse import dense_inverse_solve
from edgeprop.synth import synthetic_graph

from conftest import random_bipartite


@pytest.fixture(scope="module")
def labeled_graph():
    return synthetic_graph(15, 10, 120, num_attrs=8, num_classes=3,
                           structure_signal=0.95, noise=0.4, seed=13)


class TestEmbedder:
    def test_get_set_params_and_clone(self):
        emb = EdgePropagationEmbedder(alpha=0.3, k=12)
        assert emb.get_params()["alpha"] == 0.3
        emb.set_params(alpha=0.7)
        assert emb.alpha == 0.7
        cloned = clone(emb)
        assert cloned.get_params() == emb.get_params()

    def test_transform_matches_functional_path(self, labeled_graph):
        g = labeled_graph
        emb = EdgePropagationEmbedder(alpha=0.5, beta=0.5, k=20, seed=3).fit(g)
        feats = np.random.default_rng(14).standard_normal((g.num_edges, 4))
        factor = build_factor(g, 0.5, view="combined", k=20, seed=3, beta=0.5)
        np.testing.assert_array_equal(emb.transform(feats),
                                      propagate(factor, feats).matrix)

    def test_exact_mode_matches_dense_solve(self):
        g = random_bipartite(6, 5, 24, seed=15)
        emb = EdgePropagationEmbedder(alpha=0.5, beta=0.5, k=None).fit(g)
        feats = np.random.default_rng(16).standard_normal((24, 3))
        p = transition_dense(build_incidence(g), "combined", 0.5)
        np.testing.assert_allclose(emb.transform(feats),
                                   dense_inverse_solve(p, 0.5, feats), atol=1e-8)

    def test_per_view_embedding(self, labeled_graph):
        g = labeled_graph
        emb = EdgePropagationEmbedder(alpha=0.5, k=15, view="u", seed=0).fit(g)
        feats = np.random.default_rng(17).standard_normal((g.num_edges, 2))
        factor = build_factor(g, 0.5, view="u", k=15, seed=0)
        np.testing.assert_array_equal(emb.transform(feats),
                                      propagate(factor, feats).matrix)

    def test_not_fitted_and_bad_inputs(self, labeled_graph):
        emb = EdgePropagationEmbedder(k=5)
        with pytest.raises(NotFittedError):
            emb.transform(np.ones((3, 2)))
        with pytest.raises(ValidationError):
            EdgePropagationEmbedder(view="sideways").fit(labeled_graph)
        emb.fit(labeled_graph)
        with pytest.raises(ValidationError):
            emb.transform(np.ones((3, 2)))


class TestClassifier:
    def make(self, **kw):
        base = dict(k=24, hidden_dim=12, dropout=0.3, learning_rate=0.01,
                    max_epochs=8, seed=4)
        base.update(kw)
        return BipartiteEdgeClassifier(**base)

    def test_fit_predict_shapes_and_ranges(self, labeled_graph):
        clf = self.make().fit(labeled_graph)
        probs = clf.predict_proba()
        assert probs.shape == (labeled_graph.num_edges, 3)
        assert ((probs > 0) & (probs < 1)).all()
        preds = clf.predict()
        assert set(np.unique(preds)) <= {0.0, 1.0}

    def test_score_is_macro_auc_on_test_split(self, labeled_graph):
        clf = self.make().fit(labeled_graph)
        report = evaluate_scores(
            clf.predict_proba(clf.split_.test_idx),
            labeled_graph.labels[clf.split_.test_idx],
        )
        assert clf.score() == pytest.approx(report.auc)

    def test_same_seed_deterministic(self, labeled_graph):
        p1 = self.make().fit(labeled_graph).predict_proba()
        p2 = self.make().fit(labeled_graph).predict_proba()
        np.testing.assert_array_equal(p1, p2)

    def test_refit_with_new_gamma_reuses_svd(self, labeled_graph):
        clf = self.make(mode="dual", max_epochs=2).fit(labeled_graph)
        misses = clf._svd_cache_.misses
        assert misses == 2
        clf.set_params(gamma=0.9, combinator="max")
        clf.fit(labeled_graph)
        assert clf._svd_cache_.misses == misses

    def test_explicit_labels_override(self, labeled_graph):
        g = labeled_graph
        flipped = np.roll(g.labels, 1, axis=1)
        clf = self.make(max_epochs=2).fit(g, y=flipped)
        np.testing.assert_array_equal(clf.graph_.labels, flipped)

    def test_unlabeled_graph_rejected(self):
        g = random_bipartite(4, 4, 16, seed=18)
        with pytest.raises(ValidationError):
            self.make().fit(g)

    def test_not_fitted(self):
        clf = self.make()
        with pytest.raises(NotFittedError):
            clf.predict_proba()

    def test_split_override(self, labeled_graph):
        split = make_split(labeled_graph, seed=99)
        clf = self.make(max_epochs=2).fit(labeled_graph, split=split)
        np.testing.assert_array_equal(clf.split_.test_idx, split.test_idx)

    def test_clone_preserves_params(self):
        clf = self.make(alpha=0.2, mode="dual", combinator="concat")
        cloned = clone(clf)
        assert cloned.get_params() == clf.get_params()
