"""Sparse factorizations and deflating orthonormalization.

Sparse operators are plain :mod:`scipy.sparse` matrices and dense blocks are
:class:`numpy.ndarray`. Bases are real ``(n, r)`` arrays with orthonormal
columns.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import lapack

__all__ = [
    "SingularMatrixError",
    "Factorization",
    "factor_solve",
    "empty_basis",
    "split_real",
    "orth_extend",
]

DEFLATION_TOL = 1e-10

# dense fallback used only to locate the failing pivot
_PIVOT_SEARCH_MAX_N = 5000


class SingularMatrixError(np.linalg.LinAlgError):
    """Raised when a matrix is structurally or numerically singular.

    ``pivot`` is the zero-based index of the offending pivot when known.
    """

    def __init__(self, message: str, pivot: int | None = None):
        super().__init__(message)
        self.pivot = pivot


def _locate_zero_pivot(M) -> int | None:
    n = M.shape[0]
    if n > _PIVOT_SEARCH_MAX_N:
        return None
    dense = M.toarray() if sp.issparse(M) else np.asarray(M)
    _, _, info = lapack.zgetrf(dense.astype(complex))
    return int(info) - 1 if info > 0 else None


class Factorization:
    """Sparse LU of a square matrix supporting solves with ``M`` and ``M.T``.

    The transposed solve is the unconjugated transpose, which is what the dual
    systems need.
    """

    def __init__(self, M):
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise ValueError(f"matrix must be square, got shape {M.shape}")
        self.shape = M.shape
        Mc = sp.csc_matrix(M, dtype=complex)
        if not np.all(np.isfinite(Mc.data)):
            raise ValueError("matrix has non-finite entries")
        try:
            self._lu = spla.splu(Mc)
        except RuntimeError as exc:
            raise SingularMatrixError(
                f"matrix is exactly singular: {exc}", pivot=_locate_zero_pivot(Mc)
            ) from exc
        udiag = np.abs(self._lu.U.diagonal())
        scale = udiag.max() if udiag.size else 0.0
        if udiag.size and (scale == 0.0 or udiag.min() <= udiag.size * np.finfo(float).eps * scale):
            k = int(np.argmin(udiag))
            raise SingularMatrixError(
                f"matrix is numerically singular (pivot {k}, |u_kk|={udiag[k]:.3e})",
                pivot=int(np.flatnonzero(self._lu.perm_c == k)[0]),
            )

    def solve(self, rhs, transpose: bool = False) -> np.ndarray:
        rhs = np.asarray(rhs)
        if rhs.shape[0] != self.shape[0]:
            raise ValueError(
                f"right-hand side has {rhs.shape[0]} rows, matrix order is {self.shape[0]}"
            )
        x = self._lu.solve(np.ascontiguousarray(rhs, dtype=complex), trans="T" if transpose else "N")
        if not np.all(np.isfinite(x)):
            raise SingularMatrixError("solve produced non-finite values")
        return x


def factor_solve(M, rhs, transpose: bool = False) -> np.ndarray:
    """Solve ``M X = rhs`` (or ``M.T X = rhs``) by sparse LU."""
    return Factorization(M).solve(rhs, transpose=transpose)


def empty_basis(n: int) -> np.ndarray:
    return np.zeros((n, 0))


def split_real(block) -> np.ndarray:
    """Replace every complex column by its real and imaginary parts.

    Columns with an identically zero imaginary part contribute only their real
    part.
    """
    block = np.asarray(block)
    if block.ndim == 1:
        block = block[:, None]
    if not np.iscomplexobj(block):
        return block.astype(float)
    cols = []
    for j in range(block.shape[1]):
        cols.append(block[:, j].real)
        if np.any(block[:, j].imag != 0.0):
            cols.append(block[:, j].imag)
    if not cols:
        return np.zeros((block.shape[0], 0))
    return np.column_stack(cols)


def orth_extend(V, block, tol: float = DEFLATION_TOL) -> np.ndarray:
    """Extend the orthonormal basis ``V`` by the columns of ``block``.

    Complex columns are split into real and imaginary parts first. Each
    candidate is orthogonalized twice by modified Gram-Schmidt against the
    current basis; it is dropped when the remaining norm is below
    ``tol`` times its original norm.

    Returns a new array, ``V`` is not modified.
    """
    block = split_real(block)
    V = np.asarray(V, dtype=float)
    if V.ndim != 2:
        raise ValueError("basis must be two-dimensional")
    if V.shape[1] and V.shape[0] != block.shape[0]:
        raise ValueError(
            f"block has {block.shape[0]} rows but basis vectors have length {V.shape[0]}"
        )
    n = block.shape[0]
    cols = [V[:, j] for j in range(V.shape[1])] if V.shape[1] else []
    for j in range(block.shape[1]):
        w = block[:, j].copy()
        norm0 = np.linalg.norm(w)
        if norm0 == 0.0 or not np.isfinite(norm0):
            continue
        for _ in range(2):
            for q in cols:
                w -= (q @ w) * q
        norm = np.linalg.norm(w)
        if norm <= tol * norm0:
            continue
        cols.append(w / norm)
    if not cols:
        return np.zeros((n, 0))
    return np.column_stack(cols)
