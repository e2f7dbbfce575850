"""Synthetic graph generation and BFS edge sampling."""

import numpy as np
import pytest

from edgeprop.errors import ValidationError
from edgeprop.graph import BipartiteEdgeGraph
from edgeprop.synth import bfs_sample, synthetic_graph


class TestSyntheticGraph:
    def test_full_signal_no_noise_labels_follow_endpoint(self):
        g = synthetic_graph(12, 9, 60, num_attrs=4, num_classes=4,
                            structure_signal=1.0, noise=0.0, seed=1)
        u_comm = np.arange(12) % 4
        np.testing.assert_array_equal(g.labels.argmax(axis=1),
                                      u_comm[g.edges[:, 0]])
        # Attributes are then the exact one-hot labels.
        np.testing.assert_array_equal(g.attrs[:, :4], g.labels)

    def test_zero_signal_decouples_labels_from_structure(self):
        g = synthetic_graph(10, 10, 2000, num_attrs=4, num_classes=4,
                            structure_signal=0.0, noise=0.5, seed=2)
        u_comm = np.arange(10) % 4
        match = (g.labels.argmax(axis=1) == u_comm[g.edges[:, 0]]).mean()
        assert abs(match - 0.25) < 0.1

    def test_fixed_seed_reproducible(self):
        g1 = synthetic_graph(8, 6, 40, num_attrs=5, num_classes=3, seed=7)
        g2 = synthetic_graph(8, 6, 40, num_attrs=5, num_classes=3, seed=7)
        np.testing.assert_array_equal(g1.edges, g2.edges)
        np.testing.assert_array_equal(g1.attrs, g2.attrs)
        np.testing.assert_array_equal(g1.labels, g2.labels)

    def test_minimal_edge_count_covers_all_nodes(self):
        g = synthetic_graph(7, 4, 7, num_attrs=3, num_classes=2, seed=3)
        assert g.num_edges == 7
        assert set(g.edges[:, 0].tolist()) == set(range(7))
        assert set(g.edges[:, 1].tolist()) == set(range(4))

    def test_one_label_per_edge(self):
        g = synthetic_graph(6, 6, 50, num_attrs=6, num_classes=3, seed=4)
        np.testing.assert_array_equal(g.labels.sum(axis=1), 1.0)

    def test_infeasible_sizes_rejected(self):
        with pytest.raises(ValidationError):
            synthetic_graph(10, 4, 5, num_attrs=4, num_classes=2)
        with pytest.raises(ValidationError):
            synthetic_graph(4, 4, 10, num_attrs=1, num_classes=2)
        with pytest.raises(ValidationError):
            synthetic_graph(4, 4, 10, num_attrs=4, num_classes=2,
                            structure_signal=1.2)


def star_graph() -> BipartiteEdgeGraph:
    """One U hub with four leaves plus a detached second component."""
    edges = np.array([[0, 0], [0, 1], [0, 2], [0, 3], [1, 4], [1, 5]])
    labels = np.zeros((6, 2))
    labels[:, 0] = 1.0
    return BipartiteEdgeGraph(num_u=2, num_v=6, edges=edges,
                              attrs=np.arange(12.0).reshape(6, 2),
                              labels=labels)


class TestBfsSample:
    def test_whole_connected_graph(self):
        g = synthetic_graph(5, 5, 30, num_attrs=3, num_classes=2, seed=5)
        sampled = bfs_sample(g, start_edge=0, max_edges=1000)
        if sampled.num_edges == g.num_edges:  # connected case
            np.testing.assert_array_equal(sampled.attrs, g.attrs)

    def test_single_edge_sample(self):
        g = star_graph()
        sampled = bfs_sample(g, start_edge=2, max_edges=1)
        assert sampled.num_edges == 1
        np.testing.assert_array_equal(sampled.attrs, g.attrs[[2]])
        assert (sampled.num_u, sampled.num_v) == (1, 1)

    def test_star_expansion_order(self):
        g = star_graph()
        sampled = bfs_sample(g, start_edge=0, max_edges=3)
        # Neighbors of edge 0 through the hub are 1, 2, 3 in index order.
        np.testing.assert_array_equal(sampled.attrs, g.attrs[[0, 1, 2]])

    def test_stays_inside_component(self):
        g = star_graph()
        sampled = bfs_sample(g, start_edge=4, max_edges=10)
        np.testing.assert_array_equal(sampled.attrs, g.attrs[[4, 5]])

    def test_output_is_compact_and_carries_labels(self):
        g = star_graph()
        sampled = bfs_sample(g, start_edge=0, max_edges=4)
        # Construction would raise if any node index were unused.
        assert sampled.labels is not None
        np.testing.assert_array_equal(sampled.labels, g.labels[[0, 1, 2, 3]])
        assert sampled.edges[:, 0].max() < sampled.num_u
        assert sampled.edges[:, 1].max() < sampled.num_v

    def test_invalid_arguments(self):
        g = star_graph()
        with pytest.raises(ValidationError):
            bfs_sample(g, start_edge=10, max_edges=2)
        with pytest.raises(ValidationError):
            bfs_sample(g, start_edge=0, max_edges=0)
