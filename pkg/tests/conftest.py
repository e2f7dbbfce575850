"""Shared graph factories for the test suite."""

import numpy as np
import pytest

from edgeprop.graph import BipartiteEdgeGraph


def random_bipartite(
    num_u: int,
    num_v: int,
    num_edges: int,
    seed: int,
    num_attrs: int = 3,
    num_classes: int | None = None,
) -> BipartiteEdgeGraph:
    """Random graph with guaranteed node coverage and optional one-hot labels."""
    assert num_edges >= max(num_u, num_v)
    rng = np.random.default_rng(seed)
    cover = max(num_u, num_v)
    u_idx = np.empty(num_edges, dtype=np.int64)
    v_idx = np.empty(num_edges, dtype=np.int64)
    u_idx[:cover] = np.arange(cover) % num_u
    v_idx[:cover] = np.arange(cover) % num_v
    u_idx[cover:] = rng.integers(0, num_u, num_edges - cover)
    v_idx[cover:] = rng.integers(0, num_v, num_edges - cover)
    attrs = rng.standard_normal((num_edges, num_attrs))
    labels = None
    if num_classes is not None:
        labels = np.zeros((num_edges, num_classes))
        labels[np.arange(num_edges), rng.integers(0, num_classes, num_edges)] = 1.0
    return BipartiteEdgeGraph(
        num_u=num_u, num_v=num_v,
        edges=np.stack([u_idx, v_idx], axis=1),
        attrs=attrs, labels=labels,
    )


@pytest.fixture
def small_graph() -> BipartiteEdgeGraph:
    return random_bipartite(8, 6, 40, seed=11)


@pytest.fixture
def two_edge_fan() -> BipartiteEdgeGraph:
    """Two edges sharing one U node: the smallest non-trivial shape."""
    return BipartiteEdgeGraph(
        num_u=1, num_v=2,
        edges=np.array([[0, 0], [0, 1]]),
        attrs=np.array([[1.0], [2.0]]),
    )


@pytest.fixture
def single_edge() -> BipartiteEdgeGraph:
    return BipartiteEdgeGraph(
        num_u=1, num_v=1,
        edges=np.array([[0, 0]]),
        attrs=np.array([[2.0]]),
    )
