"""Sparse CSR kernels, randomized truncated SVD, and dense reference solvers.

The CSR type here is deliberately small: the rest of the package only needs
sparse-times-dense products and transposes of very sparse incidence matrices
(one or two nonzeros per row).  The dense solvers are the exact references
that every factorized computation is checked against; they are never used on
large graphs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import NumericalError, ValidationError

__all__ = [
    "CsrMatrix",
    "SvdFactors",
    "spmm",
    "truncated_svd",
    "dense_inverse_solve",
    "truncated_series",
    "power_iteration_solve",
]


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class CsrMatrix:
    """Immutable compressed-sparse-row matrix with float64 values."""

    shape: tuple[int, int]
    row_ptr: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        rows, cols = self.shape
        if rows < 0 or cols < 0:
            raise ValidationError(f"negative shape {self.shape}")
        row_ptr = _readonly(np.asarray(self.row_ptr, dtype=np.int64))
        col_idx = _readonly(np.asarray(self.col_idx, dtype=np.int64))
        values = _readonly(np.asarray(self.values, dtype=np.float64))
        object.__setattr__(self, "row_ptr", row_ptr)
        object.__setattr__(self, "col_idx", col_idx)
        object.__setattr__(self, "values", values)
        if row_ptr.shape != (rows + 1,):
            raise ValidationError("row_ptr must have length rows + 1")
        if row_ptr[0] != 0 or row_ptr[-1] != len(values):
            raise ValidationError("row_ptr must start at 0 and end at nnz")
        if np.any(np.diff(row_ptr) < 0):
            raise ValidationError("row_ptr must be monotone non-decreasing")
        if len(col_idx) != len(values):
            raise ValidationError("col_idx and values must have equal length")
        if len(col_idx) and (col_idx.min() < 0 or col_idx.max() >= cols):
            raise ValidationError("column index out of bounds")
        # Strictly increasing columns inside each row: the only places where
        # consecutive indices may be non-increasing are row boundaries.
        inner = np.setdiff1d(np.arange(1, len(col_idx)), row_ptr[1:-1])
        if inner.size and np.any(col_idx[inner] <= col_idx[inner - 1]):
            raise ValidationError("col_idx must be strictly increasing within a row")
        if not np.all(np.isfinite(values)):
            raise ValidationError("values must be finite")

    @property
    def nnz(self) -> int:
        return len(self.values)

    @classmethod
    def from_coo(
        cls,
        rows: np.ndarray,
        cols: np.ndarray,
        data: np.ndarray,
        shape: tuple[int, int],
    ) -> "CsrMatrix":
        """Build from coordinate triplets; duplicate coordinates are summed."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        data = np.asarray(data, dtype=np.float64)
        order = np.lexsort((cols, rows))
        rows, cols, data = rows[order], cols[order], data[order]
        if len(rows):
            keep = np.concatenate(([True], (np.diff(rows) != 0) | (np.diff(cols) != 0)))
            group = np.cumsum(keep) - 1
            summed = np.zeros(group[-1] + 1, dtype=np.float64)
            np.add.at(summed, group, data)
            rows, cols, data = rows[keep], cols[keep], summed
        row_ptr = np.zeros(shape[0] + 1, dtype=np.int64)
        np.add.at(row_ptr, rows + 1, 1)
        np.cumsum(row_ptr, out=row_ptr)
        return cls(shape=shape, row_ptr=row_ptr, col_idx=cols, values=data)

    @classmethod
    def from_dense(cls, dense: np.ndarray) -> "CsrMatrix":
        dense = np.asarray(dense, dtype=np.float64)
        rows, cols = np.nonzero(dense)
        return cls.from_coo(rows, cols, dense[rows, cols], dense.shape)

    @classmethod
    def identity(cls, n: int) -> "CsrMatrix":
        idx = np.arange(n, dtype=np.int64)
        return cls(shape=(n, n), row_ptr=np.arange(n + 1, dtype=np.int64),
                   col_idx=idx, values=np.ones(n))

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape)
        row_of = np.repeat(np.arange(self.shape[0]), np.diff(self.row_ptr))
        out[row_of, self.col_idx] = self.values
        return out

    def transpose(self) -> "CsrMatrix":
        row_of = np.repeat(np.arange(self.shape[0]), np.diff(self.row_ptr))
        return CsrMatrix.from_coo(self.col_idx, row_of, self.values,
                                  (self.shape[1], self.shape[0]))

    def __matmul__(self, dense: np.ndarray) -> np.ndarray:
        return spmm(self, dense)


def spmm(a: CsrMatrix, b: np.ndarray) -> np.ndarray:
    """Sparse-times-dense product ``a @ b``.

    Computed as a segmented sum over the gathered rows of ``b``, which keeps
    the evaluation order fixed and the result reproducible.
    """
    b = np.asarray(b, dtype=np.float64)
    if b.ndim == 1:
        return spmm(a, b[:, None])[:, 0]
    if b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValidationError(
            f"dimension mismatch: {a.shape} @ {b.shape}"
        )
    out = np.zeros((a.shape[0], b.shape[1]))
    if a.nnz == 0:
        return out
    contrib = a.values[:, None] * b[a.col_idx, :]
    starts = a.row_ptr[:-1]
    nonempty = np.diff(a.row_ptr) > 0
    out[nonempty] = np.add.reduceat(contrib, starts[nonempty], axis=0)
    return out


@dataclass(frozen=True)
class SvdFactors:
    """Left singular vectors and singular values from a truncated SVD.

    ``residual`` is the worst-case eigen-residual of ``a @ a.T`` over the
    returned columns; ``converged`` flags whether it met the requested
    tolerance.  Callers that need a hard failure should check the flag.
    """

    u: np.ndarray
    sigma: np.ndarray
    residual: float = 0.0
    converged: bool = True

    def __post_init__(self) -> None:
        u = _readonly(np.asarray(self.u, dtype=np.float64))
        sigma = _readonly(np.asarray(self.sigma, dtype=np.float64))
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "sigma", sigma)
        if u.ndim != 2 or sigma.ndim != 1 or u.shape[1] != sigma.shape[0]:
            raise ValidationError("u must be (rows, k) and sigma length k")
        if np.any(np.diff(sigma) > 1e-12):
            raise ValidationError("sigma must be sorted in descending order")
        if np.any(sigma < -1e-12):
            raise ValidationError("sigma must be non-negative")

    @property
    def k(self) -> int:
        return self.sigma.shape[0]


def _sign_fix(u: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive."""
    if u.size == 0:
        return u
    lead = np.abs(u).argmax(axis=0)
    signs = np.sign(u[lead, np.arange(u.shape[1])])
    signs[signs == 0] = 1.0
    return u * signs


def truncated_svd(
    a: CsrMatrix,
    k: int,
    seed: int = 0,
    oversample: int = 10,
    power_iters: int = 7,
    residual_tol: float = 1e-6,
) -> SvdFactors:
    """Randomized top-``k`` left singular vectors/values of a sparse matrix.

    Uses a Gaussian range finder with QR-stabilized power iterations.  When
    the sketch covers the full column space (``k + oversample`` at least the
    rank), the result agrees with a dense SVD up to roundoff.  If ``k``
    exceeds the number of recoverable directions, the basis is padded with an
    orthonormal completion carrying zero singular values, so that ``u`` always
    has ``k`` orthonormal columns.

    Reproducible for a fixed ``seed``; columns are sign-fixed so the leading
    entry of each is positive.
    """
    rows, cols = a.shape
    if not 1 <= k <= rows:
        raise ValidationError(f"k={k} out of range for shape {a.shape}")
    if a.nnz == 0:
        raise ValidationError("cannot factor an all-zero matrix")
    rng = np.random.default_rng(seed)
    at = a.transpose()

    sketch = min(k + oversample, rows, cols)
    omega = rng.standard_normal((cols, sketch))
    q, _ = np.linalg.qr(spmm(a, omega))
    for _ in range(power_iters):
        z, _ = np.linalg.qr(spmm(at, q))
        q, _ = np.linalg.qr(spmm(a, z))
    b = spmm(at, q).T  # q.T @ a, shape (sketch, cols)
    ub, sigma, _ = np.linalg.svd(b, full_matrices=False)
    u = q @ ub

    keep = min(k, sketch)
    u, sigma = u[:, :keep], sigma[:keep]
    if keep < k:
        u = np.hstack([u, _orthonormal_completion(u, k - keep, rng)])
        sigma = np.concatenate([sigma, np.zeros(k - keep)])
    u = _sign_fix(u)

    # Eigen-residual of a @ a.T on the returned columns, relative to sigma_1^2.
    back = spmm(a, spmm(at, u))
    resid = np.linalg.norm(back - u * sigma**2, axis=0).max()
    scale = max(1.0, float(sigma[0]) ** 2)
    return SvdFactors(u=u, sigma=sigma, residual=float(resid),
                      converged=bool(resid <= residual_tol * scale))


def _orthonormal_completion(u: np.ndarray, extra: int, rng: np.random.Generator) -> np.ndarray:
    """Orthonormal columns spanning directions orthogonal to ``u``."""
    rows = u.shape[0]
    gauss = rng.standard_normal((rows, extra))
    gauss -= u @ (u.T @ gauss)
    q, _ = np.linalg.qr(gauss)
    # One re-orthogonalization pass guards against cancellation.
    q -= u @ (u.T @ q)
    q, _ = np.linalg.qr(q)
    return q


def dense_inverse_solve(p_dense: np.ndarray, alpha: float, rhs: np.ndarray) -> np.ndarray:
    """Exact closed-form propagation ``(1 - alpha) * (I - alpha * P)^-1 @ rhs``.

    This is the reference every factorized or iterative propagation path is
    verified against.  Valid for ``alpha < 1`` and transition matrices with
    spectral radius at most 1.
    """
    p_dense = np.asarray(p_dense, dtype=np.float64)
    rhs = np.asarray(rhs, dtype=np.float64)
    if not 0.0 <= alpha < 1.0:
        raise ValidationError(f"alpha={alpha} must lie in [0, 1)")
    n = p_dense.shape[0]
    if p_dense.shape != (n, n) or rhs.shape[0] != n:
        raise ValidationError("p_dense must be square and match rhs rows")
    system = np.eye(n) - alpha * p_dense
    try:
        sol = np.linalg.solve(system, rhs)
    except np.linalg.LinAlgError as exc:  # unreachable for valid transition matrices
        raise NumericalError(f"propagation solve failed: {exc}") from exc
    return (1.0 - alpha) * sol


def truncated_series(
    p_dense: np.ndarray, alpha: float, rhs: np.ndarray, t_max: int
) -> np.ndarray:
    """Partial Neumann sum ``(1 - alpha) * sum_{t=0..t_max} alpha^t P^t @ rhs``."""
    p_dense = np.asarray(p_dense, dtype=np.float64)
    rhs = np.asarray(rhs, dtype=np.float64)
    if t_max < 0:
        raise ValidationError("t_max must be non-negative")
    term = rhs.copy()
    acc = rhs.copy()
    for _ in range(t_max):
        term = alpha * (p_dense @ term)
        acc += term
    return (1.0 - alpha) * acc


def power_iteration_solve(
    matvec: Callable[[np.ndarray], np.ndarray],
    alpha: float,
    rhs: np.ndarray,
    tol: float = 1e-10,
    max_iters: int = 10_000,
) -> np.ndarray:
    """Fixed-point iteration ``z <- (1 - alpha) * rhs + alpha * P @ z``.

    ``matvec`` applies the transition matrix without materializing it (two
    sparse products per application).  Converges to the same limit as
    :func:`dense_inverse_solve`; stops when the max-abs update drops below
    ``tol``.
    """
    rhs = np.asarray(rhs, dtype=np.float64)
    if not 0.0 <= alpha < 1.0:
        raise ValidationError(f"alpha={alpha} must lie in [0, 1)")
    base = (1.0 - alpha) * rhs
    z = base.copy()
    for _ in range(max_iters):
        z_next = base + alpha * matvec(z)
        delta = np.abs(z_next - z).max() if z.size else 0.0
        z = z_next
        if delta < tol:
            return z
    raise NumericalError(
        f"propagation fixed point did not reach tol={tol} in {max_iters} iterations"
    )
