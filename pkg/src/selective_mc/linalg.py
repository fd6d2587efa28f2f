"""Dense linear-algebra kernels: SVD, norms, singular-value thresholding, small solves."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
import scipy.linalg

from .core import DimensionError, DomainError, NumericError, as_matrix

__all__ = [
    "DEFAULT_RCOND",
    "SvdFactors",
    "svd",
    "nuclear_norm",
    "operator_norm",
    "svt",
    "is_invertible",
    "solve_square",
]

DEFAULT_RCOND = 1e-10


class SvdFactors(NamedTuple):
    """Thin SVD ``X = U @ diag(s) @ V.T`` with ``r = min(m, n)``."""

    U: np.ndarray
    singular_values: np.ndarray
    V: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.U * self.singular_values) @ self.V.T


def _svd(A: np.ndarray):
    try:
        return np.linalg.svd(A, full_matrices=False)
    except np.linalg.LinAlgError:
        pass
    # divide-and-conquer occasionally fails where plain QR iteration does not
    try:
        return scipy.linalg.svd(A, full_matrices=False, lapack_driver="gesvd")
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"SVD did not converge: {exc}", residual=float(np.linalg.norm(A))) from exc


def svd(X) -> SvdFactors:
    """Thin singular value decomposition.

    Parameters
    ----------
    X : array_like
        Finite ``m x n`` matrix.

    Returns
    -------
    SvdFactors
        ``U`` (m x r), nonincreasing singular values (r,), ``V`` (n x r).
    """
    A = as_matrix(X)
    U, s, Vt = _svd(A)
    return SvdFactors(U, s, Vt.T)


def nuclear_norm(X) -> float:
    """Sum of singular values."""
    A = as_matrix(X)
    return float(np.sum(_svd(A)[1]))


def operator_norm(X) -> float:
    """Largest singular value."""
    A = as_matrix(X)
    return float(_svd(A)[1][0])


def svt(X, theta: float) -> np.ndarray:
    r"""Singular-value soft-thresholding, the proximal map of :math:`\theta\|\cdot\|_*`.

    Returns the exact minimizer of :math:`\tfrac12\|Z - X\|_F^2 + \theta\|Z\|_*`.
    """
    if not theta >= 0:
        raise DomainError(f"threshold must be nonnegative, got {theta}")
    A = as_matrix(X)
    if theta == 0:
        return A
    U, s, Vt = _svd(A)
    s = np.maximum(s - theta, 0.0)
    r = int(np.count_nonzero(s))
    return (U[:, :r] * s[:r]) @ Vt[:r]


def is_invertible(S, rcond_tol: float = DEFAULT_RCOND) -> bool:
    """True iff ``S`` is square with reciprocal condition number above ``rcond_tol``."""
    A = np.asarray(S, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {A.shape}")
    if A.shape[0] == 0:
        raise DomainError("0x0 matrix has no invertibility status")
    if not np.all(np.isfinite(A)):
        return False
    s = np.linalg.svd(A, compute_uv=False)
    return bool(s[0] > 0 and s[-1] / s[0] > rcond_tol)


def solve_square(S, rhs, rcond_tol: float = DEFAULT_RCOND) -> np.ndarray:
    """Solve ``S @ W = rhs`` by partially pivoted LU with a residual check.

    ``rhs`` may be a vector or a ``k x q`` matrix; the result has the same shape.

    Raises
    ------
    NumericError
        If ``S`` is singular to ``rcond_tol`` or the residual check fails.
    """
    A = np.asarray(S, dtype=float)
    b = np.asarray(rhs, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or b.shape[0] != A.shape[0]:
        raise DimensionError(f"incompatible shapes {A.shape} and {b.shape}")
    if not is_invertible(A, rcond_tol):
        raise NumericError("matrix is singular to working tolerance")
    lu, piv = scipy.linalg.lu_factor(A, check_finite=False)
    W = scipy.linalg.lu_solve((lu, piv), b, check_finite=False)
    resid = float(np.max(np.abs(A @ W - b))) if b.size else 0.0
    scale = 1.0 + (float(np.max(np.abs(b))) if b.size else 0.0)
    if resid > 1e-8 * scale:
        raise NumericError("residual check failed after LU solve", residual=resid)
    return W
