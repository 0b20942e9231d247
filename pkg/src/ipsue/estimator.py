"""Inf-sup-constant-free error estimation for the reduced transfer function.

Three one-sided Galerkin reductions share the full-order operator:

* primal, basis ``V``:        A x = B,
* dual, basis ``V_du``:       A^T x_du = C^T,
* dual-residual, basis ``V_e``: A^T e_du = r_du.

For an input column ``j`` and an output row ``i`` the estimate is

    Delta_ij = |x~_du,i^T r_pr,j| + |e~_du,i^T r_pr,j|

and ``Delta = max_ij Delta_ij``. With ``V_e`` spanning the whole space the
right-hand side is an upper bound because ``H - H^ = x_du^T r_pr`` exactly.

Products use the unconjugated transpose; ``conjugate=True`` switches to the
Hermitian one.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .linalg import SingularMatrixError, orth_extend
from .system import AffineParametricSystem, ParameterPoint, project

__all__ = [
    "ReductionState",
    "ErrorEstimate",
    "EstimateBatch",
    "primal_residual",
    "dual_residual",
    "dual_residual_correction",
    "estimate",
    "estimate_many",
    "infsup_bound",
    "UnsupportedSizeError",
]

CHUNK_SIZE = 64
INFSUP_MAX_N = 2000


class UnsupportedSizeError(ValueError):
    pass


def _stack(mats, shape):
    if not mats:
        return np.zeros((0, *shape))
    return np.stack(mats)


class ReductionState:
    """The three growing bases and their cached projections.

    Caches are rebuilt whenever a basis is extended; only the greedy loop
    mutates a state.
    """

    def __init__(self, system: AffineParametricSystem):
        self.system = system
        n = system.n
        self.V = np.zeros((n, 0))
        self.V_du = np.zeros((n, 0))
        self.V_e = np.zeros((n, 0))
        self.points: list[ParameterPoint] = []
        self.alpha_points: list[ParameterPoint] = []
        self._refresh_primal()
        self._refresh_dual()
        self._refresh_dual_residual()

    @property
    def r(self) -> int:
        return self.V.shape[1]

    @property
    def r_du(self) -> int:
        return self.V_du.shape[1]

    @property
    def ell(self) -> int:
        return self.V_e.shape[1]

    # basis updates --------------------------------------------------------
    def extend_primal(self, block) -> int:
        old = self.r
        self.V = orth_extend(self.V, block)
        self._refresh_primal()
        return self.r - old

    def extend_dual(self, block) -> int:
        old = self.r_du
        self.V_du = orth_extend(self.V_du, block)
        self._refresh_dual()
        return self.r_du - old

    def extend_dual_residual(self, block) -> int:
        old = self.ell
        self.V_e = orth_extend(self.V_e, block)
        self._refresh_dual_residual()
        return self.ell - old

    def set_bases(self, V=None, V_du=None, V_e=None):
        """Replace bases wholesale (used by tests and when loading a state)."""
        if V is not None:
            self.V = np.asarray(V, dtype=float)
            self._refresh_primal()
        if V_du is not None:
            self.V_du = np.asarray(V_du, dtype=float)
            self._refresh_dual()
        if V_e is not None:
            self.V_e = np.asarray(V_e, dtype=float)
            self._refresh_dual_residual()
        return self

    def _refresh_primal(self):
        sys, V = self.system, self.V
        self.KV = _stack([np.asarray(t.matrix @ V) for t in sys.terms], (sys.n, self.r))
        self.Kr = np.einsum("ia,tib->tab", V, self.KV)
        self.Br = np.stack([V.T @ t.matrix for t in sys.inputs])
        self.Cr = np.stack([t.matrix @ V for t in sys.outputs])

    def _refresh_dual(self):
        sys, W = self.system, self.V_du
        self.KtW = _stack([np.asarray(t.matrix.T @ W) for t in sys.terms], (sys.n, self.r_du))
        # W^T K^T W, the transposed reduced operator
        self.Kr_du_T = np.einsum("ia,tib->tab", W, self.KtW)
        self.CtW = np.stack([W.T @ t.matrix.T for t in sys.outputs])

    def _refresh_dual_residual(self):
        sys, U = self.system, self.V_e
        self.Kr_e = _stack([U.T @ np.asarray(t.matrix @ U) for t in sys.terms], (self.ell, self.ell))

    def reduced_model(self):
        return project(self.system, self.V)


@dataclass
class ErrorEstimate:
    """Estimator value at one point.

    ``delta_ij``, ``term1_ij`` and ``term2_ij`` are ``p x m`` arrays. The
    scalar ``term1`` and ``term2`` are the summands of the maximizing entry.
    """

    delta: float
    term1: float
    term2: float
    delta_ij: np.ndarray
    term1_ij: np.ndarray
    term2_ij: np.ndarray


@dataclass
class EstimateBatch:
    """Estimator data for a sequence of points, indexed along axis 0."""

    term1_ij: np.ndarray  # (N, p, m)
    term2_ij: np.ndarray
    H_hat: np.ndarray  # (N, p, m)

    @property
    def delta_ij(self) -> np.ndarray:
        return self.term1_ij + self.term2_ij

    @property
    def delta(self) -> np.ndarray:
        return self.delta_ij.reshape(len(self.delta_ij), -1).max(axis=1)

    @property
    def second(self) -> np.ndarray:
        """Largest entrywise second summand, used to pick the dual-residual point."""
        return self.term2_ij.reshape(len(self.term2_ij), -1).max(axis=1)

    def __len__(self):
        return len(self.term1_ij)

    def item(self, k: int) -> ErrorEstimate:
        d = self.delta_ij[k]
        i, j = np.unravel_index(int(np.argmax(d)), d.shape)
        return ErrorEstimate(
            delta=float(d[i, j]),
            term1=float(self.term1_ij[k, i, j]),
            term2=float(self.term2_ij[k, i, j]),
            delta_ij=d.copy(),
            term1_ij=self.term1_ij[k].copy(),
            term2_ij=self.term2_ij[k].copy(),
        )


# batched kernels ------------------------------------------------------------


def _solve(A, B, what):
    try:
        return np.linalg.solve(A, B)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(f"reduced {what} operator is singular") from exc


def _affine_sum(coefs, mats):
    # coefs (N, T), mats (T, ...) -> (N, ...)
    return np.tensordot(coefs, mats, axes=(1, 0))


def _full_input(sys, beta):
    return _affine_sum(beta, np.stack([t.matrix for t in sys.inputs]))


def _full_output_T(sys, gamma):
    return _affine_sum(gamma, np.stack([t.matrix.T for t in sys.outputs]))


def _primal(state: ReductionState, theta, beta):
    if state.r == 0:
        raise ValueError("primal basis is empty")
    A = _affine_sum(theta, state.Kr)
    xh = _solve(A, _affine_sum(beta, state.Br), "primal")
    r = _full_input(state.system, beta).astype(complex)
    for t in range(theta.shape[1]):
        r -= theta[:, t, None, None] * (state.KV[t] @ xh)
    return r, xh


def _dual(state: ReductionState, theta, gamma):
    if state.r_du == 0:
        raise ValueError("dual basis is empty")
    At = _affine_sum(theta, state.Kr_du_T)
    xh = _solve(At, _affine_sum(gamma, state.CtW), "dual")
    r = _full_output_T(state.system, gamma).astype(complex)
    for t in range(theta.shape[1]):
        r -= theta[:, t, None, None] * (state.KtW[t] @ xh)
    return r, state.V_du @ xh


def _dual_correction(state: ReductionState, theta, r_du):
    if state.ell == 0:
        raise ValueError("dual-residual basis is empty")
    Ae = _affine_sum(theta, state.Kr_e)
    eh = _solve(np.swapaxes(Ae, 1, 2), state.V_e.T @ r_du, "dual-residual")
    return state.V_e @ eh


def _bilinear(X, R, conjugate):
    # (N, n, p), (N, n, m) -> (N, p, m)
    if conjugate:
        X = X.conj()
    return np.swapaxes(X, 1, 2) @ R


def _estimate_chunk(state: ReductionState, points, conjugate: bool) -> EstimateBatch:
    sys = state.system
    theta = sys.term_coefficients(points)
    beta = sys.input_coefficients(points)
    gamma = sys.output_coefficients(points)
    r_pr, xh = _primal(state, theta, beta)
    r_du, X_du = _dual(state, theta, gamma)
    e_du = _dual_correction(state, theta, r_du)
    t1 = np.abs(_bilinear(X_du, r_pr, conjugate))
    t2 = np.abs(_bilinear(e_du, r_pr, conjugate))
    H_hat = _affine_sum(gamma, state.Cr) @ xh
    return EstimateBatch(term1_ij=t1, term2_ij=t2, H_hat=H_hat)


def estimate_many(
    state: ReductionState,
    points: Sequence[ParameterPoint],
    conjugate: bool = False,
    threads: int = 1,
) -> EstimateBatch:
    """Evaluate the estimator on every point.

    Points are processed in fixed-size chunks, so the values do not depend on
    ``threads``.
    """
    points = list(points)
    if not points:
        raise ValueError("no points to evaluate")
    chunks = [points[k : k + CHUNK_SIZE] for k in range(0, len(points), CHUNK_SIZE)]
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda c: _estimate_chunk(state, c, conjugate), chunks))
    else:
        parts = [_estimate_chunk(state, c, conjugate) for c in chunks]
    return EstimateBatch(
        term1_ij=np.concatenate([p.term1_ij for p in parts]),
        term2_ij=np.concatenate([p.term2_ij for p in parts]),
        H_hat=np.concatenate([p.H_hat for p in parts]),
    )


# single-point interface -----------------------------------------------------


def _check(state, sys):
    if sys is not None and sys is not state.system:
        raise ValueError("state was built for a different system")


def primal_residual(state: ReductionState, sys, pt: ParameterPoint):
    """Return ``(r_pr, x_hat)``: the ``n x m`` primal residual and reduced solution."""
    _check(state, sys)
    theta = state.system.term_coefficients([pt])
    r, xh = _primal(state, theta, state.system.input_coefficients([pt]))
    return r[0], xh[0]


def dual_residual(state: ReductionState, sys, pt: ParameterPoint):
    """Return ``(r_du, X_du)``: the ``n x p`` dual residual and approximate dual solution."""
    _check(state, sys)
    theta = state.system.term_coefficients([pt])
    r, X = _dual(state, theta, state.system.output_coefficients([pt]))
    return r[0], X[0]


def dual_residual_correction(state: ReductionState, sys, pt: ParameterPoint, r_du) -> np.ndarray:
    """Approximate ``e_du`` by the reduced dual-residual system, ``n x p``."""
    _check(state, sys)
    r_du = np.asarray(r_du)
    if r_du.ndim == 1:
        r_du = r_du[:, None]
    theta = state.system.term_coefficients([pt])
    return _dual_correction(state, theta, r_du[None])[0]


def estimate(state: ReductionState, sys, pt: ParameterPoint, conjugate: bool = False) -> ErrorEstimate:
    _check(state, sys)
    return _estimate_chunk(state, [pt], conjugate).item(0)


def infsup_bound(state: ReductionState, sys, pt: ParameterPoint, max_n: int = INFSUP_MAX_N) -> float:
    """Residual bound ``||r_pr|| ||r_du|| / sigma_min(A)`` (SISO), by dense SVD.

    For MIMO systems the largest entrywise bound is returned.
    """
    _check(state, sys)
    sys = state.system
    if sys.n > max_n:
        raise UnsupportedSizeError(f"dense SVD limited to n <= {max_n}, system has n = {sys.n}")
    sigma = np.linalg.svd(sys.assemble(pt).toarray(), compute_uv=False)[-1]
    if sigma == 0.0:
        raise SingularMatrixError(f"operator is singular at {pt}")
    r_pr, _ = primal_residual(state, None, pt)
    r_du, _ = dual_residual(state, None, pt)
    return float(np.linalg.norm(r_pr, axis=0).max() * np.linalg.norm(r_du, axis=0).max() / sigma)
