"""Factorized feature propagation over the edge transition chain.

The exact propagated representation is ``(1 - alpha) * (I - alpha*P)^-1 @ H``,
a Neumann series that geometrically downweights longer walks.  Materializing
it is quadratic in the edge count, so instead we factor the normalized
incidence ``B`` (with ``P = B @ B.T``) by a k-truncated SVD and carry the
series through the singular values:

    ``F = U * sqrt(1 / (1 - alpha * Sigma^2))``,
    ``propagate(H) = (1 - alpha) * F @ (F.T @ H)``.

At ``k = |E|`` this reproduces the exact closed form (the basis is padded
with zero-singular-value directions whose series weight is exactly 1); for
smaller ``k`` it is the best rank-k approximation of the propagation
operator.  The raw SVD of ``B`` does not depend on ``alpha``, so it is
cached and only the cheap reweighting is redone when ``alpha`` changes.

The dual-view variant propagates through the U-side and V-side transitions
separately (each the ``beta = 1`` / ``beta = 0`` special case of the
combined walk) and merges the two streams with a weighted combinator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DenseCapError, ValidationError
from .graph import (
    DENSE_EDGE_CAP,
    BipartiteEdgeGraph,
    Incidence,
    build_incidence,
    normalized_incidence,
    transition_matvec,
)
from .sparse import SvdFactors, power_iteration_solve, truncated_svd

__all__ = [
    "PropagationFactor",
    "EdgeEmbedding",
    "VIEWS",
    "COMBINATORS",
    "view_svd",
    "build_factor",
    "propagate",
    "propagate_dual",
    "combine_streams",
    "objective_value",
    "FactorPropagator",
    "ExactPropagator",
    "IdentityPropagator",
]

VIEWS = ("combined", "u", "v")
COMBINATORS = ("sum", "max", "concat")

#: Floor for ``1 - alpha * sigma^2`` before inversion; with ``alpha < 1`` and
#: clamped singular values the denominator stays well above this, but the
#: guard keeps the weights finite against any upstream drift.
_WEIGHT_FLOOR = 1e-12


@dataclass(frozen=True)
class PropagationFactor:
    """Weighted singular basis of one view's propagation operator.

    ``factor`` holds ``U * sqrt(1/(1 - alpha * Sigma^2))`` for the view's
    normalized incidence; columns are ordered by descending series weight
    (equivalently descending singular value).
    """

    factor: np.ndarray
    view: str
    alpha: float
    k: int
    beta: float | None = None
    sigma: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.view not in VIEWS:
            raise ValidationError(f"unknown view {self.view!r}")
        if not np.all(np.isfinite(self.factor)):
            raise ValidationError("factor entries must be finite")
        if self.factor.shape[1] != self.k:
            raise ValidationError("factor must have k columns")


@dataclass(frozen=True)
class EdgeEmbedding:
    """Edge representation matrix plus a note on which path produced it."""

    matrix: np.ndarray
    provenance: str

    @property
    def num_edges(self) -> int:
        return self.matrix.shape[0]


def view_svd(
    g_or_inc: BipartiteEdgeGraph | Incidence,
    view: str,
    k: int,
    seed: int = 0,
    beta: float | None = None,
    oversample: int = 10,
    power_iters: int = 7,
) -> SvdFactors:
    """Truncated SVD of one view's normalized incidence.

    Separated from :func:`build_factor` because the factors do not depend on
    ``alpha`` (and the per-side views do not depend on ``beta``), so they can
    be cached across hyperparameter sweeps.
    """
    inc = g_or_inc if isinstance(g_or_inc, Incidence) else build_incidence(g_or_inc)
    if not 1 <= k <= inc.num_edges:
        raise ValidationError(f"k={k} out of range for {inc.num_edges} edges")
    b = normalized_incidence(inc, view, beta)
    return truncated_svd(b, k, seed=seed, oversample=oversample,
                         power_iters=power_iters)


def build_factor(
    g: BipartiteEdgeGraph | Incidence,
    alpha: float,
    view: str = "combined",
    k: int = 256,
    seed: int = 0,
    beta: float | None = None,
    factors: SvdFactors | None = None,
    oversample: int = 10,
    power_iters: int = 7,
) -> PropagationFactor:
    """Build the weighted propagation basis for one view.

    Singular values are clamped to ``[0, 1]`` before the series weight
    ``1/(1 - alpha * sigma^2)`` is evaluated; analytically they never exceed
    1, but floating point can overshoot and would otherwise blow the weight
    up.  Pass precomputed ``factors`` to reuse a cached SVD.
    """
    if not 0.0 <= alpha < 1.0:
        raise ValidationError(f"alpha={alpha} must lie in [0, 1)")
    if factors is None:
        factors = view_svd(g, view, k, seed=seed, beta=beta,
                           oversample=oversample, power_iters=power_iters)
    if factors.k != k:
        raise ValidationError(f"cached factors have k={factors.k}, expected {k}")
    sigma = np.clip(factors.sigma, 0.0, 1.0)
    weights = 1.0 / np.maximum(1.0 - alpha * sigma**2, _WEIGHT_FLOOR)
    return PropagationFactor(
        factor=factors.u * np.sqrt(weights),
        view=view,
        alpha=alpha,
        k=k,
        beta=beta,
        sigma=sigma,
    )


def propagate(factor: PropagationFactor, feats: np.ndarray) -> EdgeEmbedding:
    """Propagate per-edge features through one view.

    Computes ``(1 - alpha) * F @ (F.T @ feats)`` right to left in
    ``O(|E| * k * z)`` without ever materializing the edge-by-edge operator.
    """
    feats = np.asarray(feats, dtype=np.float64)
    if feats.shape[0] != factor.factor.shape[0]:
        raise ValidationError(
            f"feats has {feats.shape[0]} rows, factor expects "
            f"{factor.factor.shape[0]}"
        )
    out = (1.0 - factor.alpha) * (factor.factor @ (factor.factor.T @ feats))
    return EdgeEmbedding(matrix=out, provenance=f"single:{factor.view}")


def combine_streams(
    z_u: np.ndarray, z_v: np.ndarray, gamma: float, combinator: str
) -> np.ndarray:
    """Merge two per-view streams scaled by ``gamma`` and ``1 - gamma``.

    ``sum`` and ``max`` work elementwise (max ties keep the U value);
    ``concat`` stacks horizontally with the U block first.
    """
    if combinator not in COMBINATORS:
        raise ValidationError(f"unknown combinator {combinator!r}")
    if not 0.0 <= gamma <= 1.0:
        raise ValidationError(f"gamma={gamma} must lie in [0, 1]")
    if z_u.shape != z_v.shape:
        raise ValidationError("per-view streams must have equal shape")
    a = gamma * z_u
    b = (1.0 - gamma) * z_v
    if combinator == "sum":
        return a + b
    if combinator == "max":
        return np.where(a >= b, a, b)
    return np.hstack([a, b])


def propagate_dual(
    factor_u: PropagationFactor,
    factor_v: PropagationFactor,
    feats_u: np.ndarray,
    feats_v: np.ndarray,
    gamma: float = 0.5,
    combinator: str = "sum",
) -> EdgeEmbedding:
    """Propagate through both single-side views and merge the streams."""
    if factor_u.view != "u" or factor_v.view != "v":
        raise ValidationError("propagate_dual expects a 'u' and a 'v' factor")
    z_u = propagate(factor_u, feats_u).matrix
    z_v = propagate(factor_v, feats_v).matrix
    out = combine_streams(z_u, z_v, gamma, combinator)
    return EdgeEmbedding(matrix=out, provenance=f"dual:{combinator}")


class FactorPropagator:
    """Linear operator ``h -> (1 - alpha) * F @ (F.T @ h)``.

    Symmetric by construction, which is what lets gradient backpropagation
    reuse the forward operator unchanged.
    """

    def __init__(self, factor: PropagationFactor):
        self.factor = factor

    def apply(self, h: np.ndarray) -> np.ndarray:
        f = self.factor.factor
        return (1.0 - self.factor.alpha) * (f @ (f.T @ h))


class ExactPropagator:
    """Exact propagation by fixed-point iteration, no factorization.

    Used for the un-truncated setting: each application solves the linear
    system matrix-free through two sparse products per iteration.
    """

    def __init__(
        self,
        inc: Incidence,
        alpha: float,
        view: str = "combined",
        beta: float | None = None,
        tol: float = 1e-10,
        max_iters: int = 10_000,
    ):
        self.matvec = transition_matvec(inc, view, beta)
        self.alpha = alpha
        self.tol = tol
        self.max_iters = max_iters

    def apply(self, h: np.ndarray) -> np.ndarray:
        return power_iteration_solve(self.matvec, self.alpha, h,
                                     tol=self.tol, max_iters=self.max_iters)


class IdentityPropagator:
    """No-op propagation; the structure-free control path."""

    def apply(self, h: np.ndarray) -> np.ndarray:
        return h


def objective_value(
    g: BipartiteEdgeGraph,
    z: EdgeEmbedding | np.ndarray,
    feats: np.ndarray,
    alpha: float,
    beta: float,
    max_edges: int = DENSE_EDGE_CAP,
) -> float:
    """Evaluate the propagation objective at a candidate representation.

    The objective balances a fitting term ``(1-alpha) * ||Z - H||_F^2``
    against a smoothness penalty that, for every node, sums the squared
    distances between all ordered pairs of its incident edges' rows, each
    pair weighted by the inverse node degree (U-side pairs scaled by
    ``beta/2``, V-side by ``(1-beta)/2``).  The exact propagated output is
    the unique minimizer, which is what the optimality tests exploit.
    """
    zm = z.matrix if isinstance(z, EdgeEmbedding) else np.asarray(z, dtype=np.float64)
    feats = np.asarray(feats, dtype=np.float64)
    if g.num_edges > max_edges:
        raise DenseCapError(
            f"objective evaluation refused for {g.num_edges} edges (cap {max_edges})"
        )
    if zm.shape != feats.shape or zm.shape[0] != g.num_edges:
        raise ValidationError("z and feats must both be (|E|, z)")
    fit = float(((zm - feats) ** 2).sum())

    def side_penalty(endpoints: np.ndarray, count: int) -> float:
        total = 0.0
        for node in range(count):
            members = np.flatnonzero(endpoints == node)
            block = zm[members]
            m = len(members)
            # Sum over ordered pairs (i, j): 2m * sum||z_i||^2 - 2||sum z_i||^2.
            sq = float((block**2).sum())
            colsum = block.sum(axis=0)
            total += (2.0 * m * sq - 2.0 * float(colsum @ colsum)) / m
        return total

    reg = 0.5 * beta * side_penalty(g.edges[:, 0], g.num_u)
    reg += 0.5 * (1.0 - beta) * side_penalty(g.edges[:, 1], g.num_v)
    return (1.0 - alpha) * fit + alpha * reg
