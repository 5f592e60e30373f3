"""Orthogonal subspace projections built on the singular value decomposition.

A concept matrix holds one concept embedding per column. The range projector
of that matrix is the orthogonal projector onto the span of those columns;
the complement projector maps onto everything orthogonal to that span. Rank
decisions everywhere use the same relative singular-value cutoff so that
projectors, pseudoinverses, and reported ranks never disagree with each other.

All computation runs in float64 regardless of how vectors were stored on disk.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidData, InvalidInput, NumericalFailure

# Singular values below rel_tol * sigma_max count as zero.
DEFAULT_REL_TOL = 1e-6

# Projector acceptance thresholds, relative to max(1, ||P||_F).
SYMMETRY_TOL = 1e-8
IDEMPOTENCE_TOL = 1e-6
TRACE_TOL = 1e-5

# Gram-Schmidt drops a candidate column once its residual norm falls here.
GS_RESIDUAL_TOL = 1e-10


def _as_matrix(matrix) -> np.ndarray:
    a = np.asarray(matrix, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise InvalidInput(
            f"expected a 2-D matrix with at least one row and one column, got shape {a.shape}"
        )
    if not np.all(np.isfinite(a)):
        raise InvalidInput("matrix contains NaN or Inf entries")
    return a


@dataclass(eq=False)
class SvdResult:
    """Thin SVD M = U diag(s) W^T.

    Attributes:
        left_vectors: (D, m) with orthonormal columns, m = min(D, K).
        singular_values: (m,) non-negative, sorted non-increasing.
        right_vectors: (K, m) with orthonormal columns.
    """

    left_vectors: np.ndarray
    singular_values: np.ndarray
    right_vectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.left_vectors * self.singular_values) @ self.right_vectors.T


def svd(matrix) -> SvdResult:
    """Compute a thin SVD of a matrix with at least one row and column.

    Args:
        matrix: (D, K) array-like with finite entries.

    Returns:
        SvdResult whose reconstruction matches the input to within
        1e-6 * max(1, ||M||_F).

    Raises:
        InvalidInput: on non-finite entries or a non-2-D argument.
        NumericalFailure: if the underlying decomposition does not converge.
    """
    a = _as_matrix(matrix)
    try:
        u, s, vh = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(
            f"SVD did not converge for a {a.shape[0]}x{a.shape[1]} matrix"
        ) from exc
    return SvdResult(left_vectors=u, singular_values=s, right_vectors=vh.T)


def numerical_rank(singular_values, rel_tol: float = DEFAULT_REL_TOL) -> int:
    """Count singular values strictly above rel_tol * sigma_max.

    Returns 0 when the largest singular value is exactly zero. Input must be
    non-negative and sorted non-increasing, as produced by `svd`.
    """
    s = np.asarray(singular_values, dtype=np.float64)
    if s.ndim != 1 or s.size == 0:
        raise InvalidInput(f"expected a non-empty 1-D array of singular values, got shape {s.shape}")
    if not np.isfinite(rel_tol) or rel_tol <= 0:
        raise InvalidInput(f"rel_tol must be a positive finite number, got {rel_tol}")
    if not np.all(np.isfinite(s)) or np.any(s < 0):
        raise InvalidInput("singular values must be finite and non-negative")
    if np.any(s[1:] > s[:-1]):
        raise InvalidInput("singular values must be sorted non-increasing")
    sigma_max = float(s[0])
    if sigma_max == 0.0:
        return 0
    return int(np.count_nonzero(s > rel_tol * sigma_max))


@dataclass(eq=False)
class Projector:
    """A D x D orthogonal projector together with the rank it projects onto."""

    matrix: np.ndarray
    rank: int
    tolerance_used: float

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[0])

    def apply(self, vector: np.ndarray) -> np.ndarray:
        return self.matrix @ vector

    def validate(self) -> None:
        """Raise InvalidData unless symmetry, idempotence, and trace==rank hold."""
        p = self.matrix
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise InvalidData(f"projector must be square, got shape {p.shape}")
        scale = max(1.0, float(np.linalg.norm(p)))
        sym_err = float(np.linalg.norm(p - p.T))
        if sym_err > SYMMETRY_TOL * scale:
            raise InvalidData(f"projector is not symmetric (error {sym_err:.3e})")
        idem_err = float(np.linalg.norm(p @ p - p))
        if idem_err > IDEMPOTENCE_TOL * scale:
            raise InvalidData(f"projector is not idempotent (error {idem_err:.3e})")
        trace_err = abs(float(np.trace(p)) - float(self.rank))
        if trace_err > TRACE_TOL:
            raise InvalidData(
                f"projector trace {float(np.trace(p)):.6f} does not match rank {self.rank}"
            )


def range_projector(matrix, rel_tol: float = DEFAULT_REL_TOL) -> Projector:
    """Orthogonal projector onto the span of the columns of `matrix`.

    The rank is decided by `numerical_rank` at the same tolerance, so the
    projector reproduces every input column: ||P c - c|| <= 1e-5 * max(1, ||c||).
    """
    decomp = svd(matrix)
    rank = numerical_rank(decomp.singular_values, rel_tol)
    d = decomp.left_vectors.shape[0]
    if rank == 0:
        p = np.zeros((d, d))
    else:
        basis = decomp.left_vectors[:, :rank]
        p = basis @ basis.T
        p = (p + p.T) / 2.0  # kill the last-bit asymmetry left by the matmul
    return Projector(matrix=p, rank=rank, tolerance_used=rel_tol)


def complement_projector(projector: Projector) -> Projector:
    """The projector I - P onto the orthogonal complement of Range(P)."""
    if projector.matrix.ndim != 2 or projector.matrix.shape[0] != projector.matrix.shape[1]:
        raise InvalidInput(f"expected a square projector, got shape {projector.matrix.shape}")
    comp = np.eye(projector.dim) - projector.matrix
    return Projector(
        matrix=comp,
        rank=projector.dim - projector.rank,
        tolerance_used=projector.tolerance_used,
    )


def pseudoinverse(matrix, rel_tol: float = DEFAULT_REL_TOL) -> np.ndarray:
    """Moore-Penrose pseudoinverse with the shared rank tolerance.

    Singular values at or below rel_tol * sigma_max are treated as exact zeros
    rather than inverted, so rank-deficient input stays well behaved.
    """
    decomp = svd(matrix)
    rank = numerical_rank(decomp.singular_values, rel_tol)
    rows, cols = _as_matrix(matrix).shape
    if rank == 0:
        return np.zeros((cols, rows))
    u = decomp.left_vectors[:, :rank]
    w = decomp.right_vectors[:, :rank]
    inv_s = 1.0 / decomp.singular_values[:rank]
    return (w * inv_s) @ u.T


def oracle_projector(matrix) -> Projector:
    """Range projector assembled by modified Gram-Schmidt over the columns.

    This deliberately avoids the SVD path so the two constructions can be
    checked against each other. Candidate columns whose residual norm falls
    at or below GS_RESIDUAL_TOL after orthogonalization are dropped as
    linearly dependent.
    """
    a = _as_matrix(matrix)
    d = a.shape[0]
    basis: list[np.ndarray] = []
    for k in range(a.shape[1]):
        v = a[:, k].copy()
        for q in basis:
            v -= (q @ v) * q
        norm = float(np.linalg.norm(v))
        if norm <= GS_RESIDUAL_TOL:
            continue
        basis.append(v / norm)
    p = np.zeros((d, d))
    for q in basis:
        p += np.outer(q, q)
    p = (p + p.T) / 2.0
    return Projector(matrix=p, rank=len(basis), tolerance_used=GS_RESIDUAL_TOL)
