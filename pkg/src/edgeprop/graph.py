"""Edge-attributed bipartite graph model and edge-wise transition matrices.

A graph here couples two disjoint node sets (``U`` and ``V``), a list of
edges between them, a dense per-edge attribute matrix, and an optional
multi-hot label matrix.  All structural matrices are derived from the two
edge-node incidence matrices: each row of ``E_U`` (shape ``|E| x |U|``)
selects the U endpoint of one edge, and likewise for ``E_V``.

The edge-wise transition matrices

    ``P_U = E_U D_U^-1 E_U^T``    and    ``P_V = E_V D_V^-1 E_V^T``

describe one step of a walk that moves between edges through a shared
endpoint; both are symmetric doubly stochastic.  Their beta-weighted mixture
equals ``B @ B.T`` for the combined normalized incidence

    ``B = sqrt(beta) * E_U D_U^-1/2  ||  sqrt(1-beta) * E_V D_V^-1/2``,

which is the only matrix the factorized pipeline ever decomposes.  Dense
``|E| x |E|`` forms are materialized for diagnostics and oracle checks only,
and refuse to build above a configurable edge cap.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateGraphError, DenseCapError, ValidationError
from .sparse import CsrMatrix

__all__ = [
    "BipartiteEdgeGraph",
    "Incidence",
    "DENSE_EDGE_CAP",
    "build_incidence",
    "transition_u",
    "transition_v",
    "combined_incidence",
    "normalized_incidence",
    "transition_dense",
    "transition_matvec",
]

#: Default refusal threshold for dense edge-by-edge materializations.
DENSE_EDGE_CAP = 5000


def _frozen(arr: np.ndarray, dtype) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=dtype)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class BipartiteEdgeGraph:
    """An edge-attributed bipartite graph.

    Attributes:
        num_u: number of U-side nodes (indices ``0 .. num_u-1``).
        num_v: number of V-side nodes.
        edges: ``(|E|, 2)`` int array of ``(u_index, v_index)`` pairs.
        attrs: ``(|E|, d)`` float matrix of edge attributes.
        labels: optional ``(|E|, |C|)`` multi-hot 0/1 matrix.

    Every node index must be used by at least one edge; zero-degree nodes
    make the degree normalization undefined and are rejected.  Parallel
    edges (repeated ``(u, v)`` pairs under distinct edge ids) are allowed.
    """

    num_u: int
    num_v: int
    edges: np.ndarray
    attrs: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self) -> None:
        edges = _frozen(np.asarray(self.edges), np.int64)
        attrs = _frozen(np.asarray(self.attrs), np.float64)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "attrs", attrs)
        if edges.ndim != 2 or edges.shape[1] != 2:
            raise ValidationError("edges must be an (|E|, 2) array")
        if len(edges) == 0:
            raise ValidationError("graph must contain at least one edge")
        if self.num_u <= 0 or self.num_v <= 0:
            raise ValidationError("node counts must be positive")
        if edges[:, 0].min() < 0 or edges[:, 0].max() >= self.num_u:
            raise ValidationError("edge references a U index out of range")
        if edges[:, 1].min() < 0 or edges[:, 1].max() >= self.num_v:
            raise ValidationError("edge references a V index out of range")
        used_u = np.bincount(edges[:, 0], minlength=self.num_u)
        used_v = np.bincount(edges[:, 1], minlength=self.num_v)
        if used_u.min() == 0 or used_v.min() == 0:
            raise DegenerateGraphError(
                "every node index must be used by at least one edge; "
                "compact the index space before constructing the graph"
            )
        if attrs.ndim != 2 or attrs.shape[0] != len(edges):
            raise ValidationError(
                f"attrs must have one row per edge, got {attrs.shape} for "
                f"{len(edges)} edges"
            )
        if not np.all(np.isfinite(attrs)):
            raise ValidationError("attrs must be finite")
        if self.labels is not None:
            labels = _frozen(np.asarray(self.labels), np.float64)
            object.__setattr__(self, "labels", labels)
            if labels.ndim != 2 or labels.shape[0] != len(edges):
                raise ValidationError("labels must have one row per edge")
            if not np.isin(labels, (0.0, 1.0)).all():
                raise ValidationError("label entries must be 0 or 1")

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def num_attrs(self) -> int:
        return self.attrs.shape[1]

    @property
    def num_classes(self) -> int:
        return 0 if self.labels is None else self.labels.shape[1]

    def labeled_indices(self) -> np.ndarray:
        """Edge indices that carry at least one label."""
        if self.labels is None:
            return np.empty(0, dtype=np.int64)
        return np.flatnonzero(self.labels.any(axis=1)).astype(np.int64)

    def duplicate_edge_count(self) -> int:
        """Number of edges repeating an already-seen (u, v) pair."""
        pairs = self.edges[:, 0].astype(np.int64) * self.num_v + self.edges[:, 1]
        return int(len(pairs) - len(np.unique(pairs)))

    @classmethod
    def from_raw(
        cls,
        raw_edges: Sequence[tuple[object, object]],
        attrs: np.ndarray,
        labels: np.ndarray | None = None,
    ) -> tuple["BipartiteEdgeGraph", list, list]:
        """Build a graph from arbitrary node identifiers.

        Identifiers are interned in order of first appearance, which compacts
        the index space and guarantees the zero-degree invariant.  Returns the
        graph together with the U and V identifier tables.
        """
        u_ids: dict = {}
        v_ids: dict = {}
        edges = np.empty((len(raw_edges), 2), dtype=np.int64)
        for i, (u, v) in enumerate(raw_edges):
            edges[i, 0] = u_ids.setdefault(u, len(u_ids))
            edges[i, 1] = v_ids.setdefault(v, len(v_ids))
        graph = cls(num_u=len(u_ids), num_v=len(v_ids), edges=edges,
                    attrs=attrs, labels=labels)
        return graph, list(u_ids), list(v_ids)


@dataclass(frozen=True)
class Incidence:
    """Edge-node incidence matrices and node degree vectors for one graph."""

    e_u: CsrMatrix
    e_v: CsrMatrix
    deg_u: np.ndarray
    deg_v: np.ndarray

    @property
    def num_edges(self) -> int:
        return self.e_u.shape[0]


def build_incidence(g: BipartiteEdgeGraph) -> Incidence:
    """Incidence matrices ``E_U``, ``E_V`` and degree vectors for ``g``.

    Each incidence row holds exactly one 1 marking the edge's endpoint on
    that side; column sums therefore equal node degrees.
    """
    m = g.num_edges
    rows = np.arange(m, dtype=np.int64)
    ones = np.ones(m)
    e_u = CsrMatrix.from_coo(rows, g.edges[:, 0], ones, (m, g.num_u))
    e_v = CsrMatrix.from_coo(rows, g.edges[:, 1], ones, (m, g.num_v))
    deg_u = np.bincount(g.edges[:, 0], minlength=g.num_u).astype(np.float64)
    deg_v = np.bincount(g.edges[:, 1], minlength=g.num_v).astype(np.float64)
    if deg_u.min() < 1 or deg_v.min() < 1:  # unreachable given graph invariants
        raise DegenerateGraphError("zero-degree node survived ingestion")
    deg_u.flags.writeable = False
    deg_v.flags.writeable = False
    return Incidence(e_u=e_u, e_v=e_v, deg_u=deg_u, deg_v=deg_v)


def _check_cap(num_edges: int, max_edges: int) -> None:
    if num_edges > max_edges:
        raise DenseCapError(
            f"edge-by-edge materialization refused for {num_edges} edges "
            f"(cap {max_edges})"
        )


def _transition(inc_side: CsrMatrix, deg: np.ndarray, max_edges: int) -> CsrMatrix:
    m = inc_side.shape[0]
    _check_cap(m, max_edges)
    node_of = inc_side.col_idx  # one entry per edge, row order
    order = np.argsort(node_of, kind="stable")
    grouped = node_of[order]
    # For each node, all incident edge pairs (i, j) get weight 1/deg(node).
    rows_out: list[np.ndarray] = []
    cols_out: list[np.ndarray] = []
    vals_out: list[np.ndarray] = []
    starts = np.searchsorted(grouped, np.arange(len(deg)))
    ends = np.searchsorted(grouped, np.arange(len(deg)), side="right")
    for node, (lo, hi) in enumerate(zip(starts, ends)):
        members = order[lo:hi]
        d = hi - lo
        rows_out.append(np.repeat(members, d))
        cols_out.append(np.tile(members, d))
        vals_out.append(np.full(d * d, 1.0 / deg[node]))
    return CsrMatrix.from_coo(
        np.concatenate(rows_out), np.concatenate(cols_out),
        np.concatenate(vals_out), (m, m),
    )


def transition_u(inc: Incidence, max_edges: int = DENSE_EDGE_CAP) -> CsrMatrix:
    """Edge transition matrix through shared U endpoints, ``E_U D_U^-1 E_U^T``.

    Entry ``(i, j)`` is ``1/deg(u)`` when edges ``i`` and ``j`` share the
    U-side node ``u`` (including ``i == j``), else 0.
    """
    return _transition(inc.e_u, inc.deg_u, max_edges)


def transition_v(inc: Incidence, max_edges: int = DENSE_EDGE_CAP) -> CsrMatrix:
    """Edge transition matrix through shared V endpoints, ``E_V D_V^-1 E_V^T``."""
    return _transition(inc.e_v, inc.deg_v, max_edges)


def combined_incidence(inc: Incidence, beta: float) -> CsrMatrix:
    """Combined normalized incidence ``B`` with ``B @ B.T`` the mixed transition.

    Shape ``|E| x (|U| + |V|)`` with two stored entries per row:
    ``sqrt(beta / deg_u)`` in the U block and ``sqrt((1-beta) / deg_v)`` in
    the V block.
    """
    if not 0.0 <= beta <= 1.0:
        raise ValidationError(f"beta={beta} must lie in [0, 1]")
    m = inc.num_edges
    num_u = inc.e_u.shape[1]
    u_cols = inc.e_u.col_idx
    v_cols = inc.e_v.col_idx + num_u
    rows = np.repeat(np.arange(m, dtype=np.int64), 2)
    cols = np.stack([u_cols, v_cols], axis=1).ravel()
    u_vals = np.sqrt(beta / inc.deg_u[u_cols])
    v_vals = np.sqrt((1.0 - beta) / inc.deg_v[inc.e_v.col_idx])
    vals = np.stack([u_vals, v_vals], axis=1).ravel()
    return CsrMatrix.from_coo(rows, cols, vals, (m, num_u + inc.e_v.shape[1]))


def normalized_incidence(inc: Incidence, view: str, beta: float | None = None) -> CsrMatrix:
    """Normalized incidence matrix for one propagation view.

    ``"combined"`` yields ``B`` (requires ``beta``); ``"u"`` and ``"v"``
    yield the single-side matrices ``E_U D_U^-1/2`` and ``E_V D_V^-1/2``.
    """
    if view == "combined":
        if beta is None:
            raise ValidationError("combined view requires beta")
        return combined_incidence(inc, beta)
    if view == "u":
        side, deg = inc.e_u, inc.deg_u
    elif view == "v":
        side, deg = inc.e_v, inc.deg_v
    else:
        raise ValidationError(f"unknown view {view!r}")
    vals = 1.0 / np.sqrt(deg[side.col_idx])
    return CsrMatrix(shape=side.shape, row_ptr=side.row_ptr,
                     col_idx=side.col_idx, values=vals)


def transition_dense(
    inc: Incidence,
    view: str = "combined",
    beta: float | None = None,
    max_edges: int = DENSE_EDGE_CAP,
) -> np.ndarray:
    """Dense edge transition matrix for oracle checks on small graphs."""
    _check_cap(inc.num_edges, max_edges)
    if view == "combined":
        b = normalized_incidence(inc, "combined", beta).to_dense()
        return b @ b.T
    if view == "u":
        return transition_u(inc, max_edges=max_edges).to_dense()
    if view == "v":
        return transition_v(inc, max_edges=max_edges).to_dense()
    raise ValidationError(f"unknown view {view!r}")


def transition_matvec(inc: Incidence, view: str = "combined", beta: float | None = None):
    """Matrix-free application of the transition matrix.

    Returns a callable computing ``P @ x`` as ``B @ (B.T @ x)``, two sparse
    products per call, without forming the edge-by-edge matrix.
    """
    b = normalized_incidence(inc, view, beta)
    bt = b.transpose()

    def matvec(x: np.ndarray) -> np.ndarray:
        return b @ (bt @ x)

    return matvec
