"""Spectral diagnostics for the edge transition chain.

The second-largest singular value of the combined normalized incidence
controls both how slowly the edge walk mixes (the walk needs at least
``1/(1 - sigma2^2) - 1`` steps) and how fast per-step variance contracts
(a factor ``sigma2^4`` per step).  The report also evaluates the
rank-truncation error factor ``1/(1 - alpha * sigma_k^2)`` used to judge
how much a k-truncated factorization can lose.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DenseCapError, ValidationError
from .graph import (
    DENSE_EDGE_CAP,
    BipartiteEdgeGraph,
    build_incidence,
    normalized_incidence,
)
from .sparse import truncated_svd

__all__ = ["SpectralReport", "spectral_report", "variance_contraction"]


@dataclass(frozen=True)
class SpectralReport:
    """Mixing and truncation diagnostics of the combined edge walk.

    ``mixing_lower_bound`` is ``1/(1 - sigma2^2) - 1``; it (and the raw
    ``1/(1 - sigma2^2)`` factor) is infinite when the edge graph is
    disconnected (``sigma2 == 1``).  For a single-edge graph ``sigma2`` is
    defined as 0: a one-state chain mixes immediately.
    """

    sigma2: float
    sigma2_sq: float
    inv_gap: float
    mixing_lower_bound: float
    truncation_bound: float
    sigma_k: float
    k: int
    alpha: float
    beta: float

    def to_json_dict(self) -> dict:
        """JSON-ready mapping; IEEE infinities become the string ``"inf"``."""

        def enc(x: float):
            return "inf" if math.isinf(x) else x

        return {
            "schema_version": 1,
            "sigma2": self.sigma2,
            "sigma2_sq": self.sigma2_sq,
            "inv_one_minus_sigma2_sq": enc(self.inv_gap),
            "mixing_time_lower_bound": enc(self.mixing_lower_bound),
            "inv_one_minus_alpha_sigma_k_sq": self.truncation_bound,
            "sigma_k": self.sigma_k,
            "k": self.k,
            "alpha": self.alpha,
            "beta": self.beta,
        }


def spectral_report(
    g: BipartiteEdgeGraph,
    alpha: float = 0.5,
    beta: float = 0.5,
    k: int = 256,
    seed: int = 0,
    oversample: int = 10,
    power_iters: int = 7,
) -> SpectralReport:
    """Compute the spectral diagnostics of the combined edge walk.

    Runs a truncated SVD of the combined normalized incidence, reads off
    the second and k-th singular values, and evaluates the two bound
    formulas.  ``k`` must not exceed the edge count.
    """
    if not 1 <= k <= g.num_edges:
        raise ValidationError(f"k={k} out of range for {g.num_edges} edges")
    if not 0.0 <= alpha < 1.0:
        raise ValidationError(f"alpha={alpha} must lie in [0, 1)")
    inc = build_incidence(g)
    b = normalized_incidence(inc, "combined", beta)
    # Always request at least two directions so sigma2 exists when |E| > 1.
    want = min(max(k, 2), g.num_edges)
    factors = truncated_svd(b, want, seed=seed, oversample=oversample,
                            power_iters=power_iters)
    sigma = np.clip(factors.sigma, 0.0, 1.0)
    sigma2 = float(sigma[1]) if g.num_edges > 1 else 0.0
    sigma_k = float(sigma[k - 1])
    sigma2_sq = sigma2 * sigma2
    inv_gap = math.inf if sigma2_sq >= 1.0 else 1.0 / (1.0 - sigma2_sq)
    mixing = math.inf if math.isinf(inv_gap) else inv_gap - 1.0
    truncation = 1.0 / (1.0 - alpha * sigma_k * sigma_k)
    return SpectralReport(
        sigma2=sigma2,
        sigma2_sq=sigma2_sq,
        inv_gap=inv_gap,
        mixing_lower_bound=mixing,
        truncation_bound=truncation,
        sigma_k=sigma_k,
        k=k,
        alpha=alpha,
        beta=beta,
    )


def variance_contraction(
    p_dense: np.ndarray,
    f: np.ndarray,
    t: int,
    max_edges: int = DENSE_EDGE_CAP,
) -> np.ndarray:
    """Per-edge deviation of ``P^t @ f`` from its stationary rows.

    Because the transition matrix is doubly stochastic, the stationary
    limit replicates the column means of ``f`` in every row.  The returned
    vector holds each row's mean squared deviation from that limit; its
    average over edges contracts at least as fast as ``sigma2^(4t)``.
    ``t = 0`` returns the deviation of ``f`` itself.
    """
    p_dense = np.asarray(p_dense, dtype=np.float64)
    f = np.asarray(f, dtype=np.float64)
    if f.ndim == 1:
        f = f[:, None]
    n = p_dense.shape[0]
    if p_dense.shape != (n, n) or f.shape[0] != n:
        raise ValidationError("p_dense must be square and match f rows")
    if n > max_edges:
        raise DenseCapError(f"refusing dense power walk on {n} edges (cap {max_edges})")
    if t < 0:
        raise ValidationError("t must be non-negative")
    stationary = f.mean(axis=0)
    x = f
    for _ in range(t):
        x = p_dense @ x
    return ((x - stationary) ** 2).mean(axis=1)
