"""Multi-moment matching bases at a single expansion point.

The state ``x = A(p)^{-1} b`` is expanded in the affine coefficients of the
operator around ``p0``. Writing ``A(p) = A0 + sum_j (theta_j(p) - theta_j(p0)) K_j``
gives the moment recursion

    R_0 = A0^{-1} b,    R_k = { -A0^{-1} K_j R_{k-1} : j non-constant }.

Every branch is kept, so level ``k`` spans all mixed moments of total order
``k``. Levels are orthonormalized as they are produced (block Arnoldi with
deflation); this leaves the cumulative spans unchanged.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .linalg import orth_extend
from .system import AffineOperator, ParameterPoint

__all__ = ["MomentConfig", "MomentBlock", "mmm", "moment_weights"]

logger = logging.getLogger(__name__)

DEFAULT_MAX_BLOCK_COLS = 200
_LEVEL_DEFLATION_TOL = 1e-10


@dataclass(frozen=True)
class MomentConfig:
    """Settings of one moment-matching call.

    ``weights`` selects the branches of the recursion: ``"all"`` uses every
    term whose coefficient is not constant, ``"frequency"`` only the terms that
    depend on ``s``; an explicit sequence gives one weight per term and a zero
    weight removes that branch.
    """

    eta: int = 1
    expansion_point: ParameterPoint | None = None
    max_block_cols: int = DEFAULT_MAX_BLOCK_COLS
    weights: str | Sequence[float] = "all"

    def __post_init__(self):
        if self.eta < 0:
            raise ValueError(f"eta must be non-negative, got {self.eta}")
        if self.max_block_cols < 1:
            raise ValueError("max_block_cols must be positive")


@dataclass
class MomentBlock:
    """Orthonormal real basis of the matched moments."""

    vectors: np.ndarray
    truncated: bool = False
    n_levels: int = 0

    @property
    def shape(self):
        return self.vectors.shape


def moment_weights(op: AffineOperator, weights="all") -> np.ndarray:
    coefs = op.term_coefs
    if isinstance(weights, str):
        if weights == "all":
            return np.array([0.0 if c.is_constant() else 1.0 for c in coefs])
        if weights == "frequency":
            return np.array([1.0 if c.depends_on_s() else 0.0 for c in coefs])
        raise ValueError(f"unknown weight mode {weights!r}")
    w = np.asarray(weights, dtype=float)
    if w.shape != (len(coefs),):
        raise ValueError(f"expected {len(coefs)} weights, got {w.shape}")
    return w


def _orth_complex(Q: list, W: np.ndarray) -> list:
    """Append the columns of ``W`` to the complex orthonormal list ``Q``."""
    out = []
    for j in range(W.shape[1]):
        w = W[:, j].copy()
        norm0 = np.linalg.norm(w)
        if norm0 == 0.0:
            continue
        for _ in range(2):
            for q in Q:
                w -= (q.conj() @ w) * q
            for q in out:
                w -= (q.conj() @ w) * q
        norm = np.linalg.norm(w)
        if norm <= _LEVEL_DEFLATION_TOL * norm0:
            continue
        out.append(w / norm)
    return out


def mmm(op: AffineOperator, rhs, cfg: MomentConfig, transpose: bool = False) -> MomentBlock:
    """Moment-matching basis for ``op`` (or ``op.T``) with right-hand side ``rhs``.

    With ``transpose=True`` the recursion runs on the transposed operator and
    reuses the factorization held by ``op``.

    Raises
    ------
    SingularMatrixError
        If the operator is singular at the expansion point.
    """
    rhs = np.asarray(rhs)
    if rhs.ndim == 1:
        rhs = rhs[:, None]
    if rhs.shape[1] < 1:
        raise ValueError("right-hand side needs at least one column")
    w = moment_weights(op, cfg.weights)
    active = [j for j in range(len(w)) if w[j] != 0.0]

    level = _orth_complex([], op.solve(rhs, transpose=transpose))
    kept = list(level)
    n_levels = 1
    for _ in range(cfg.eta):
        if not level:
            break
        Y = np.column_stack(level)
        branches = [-w[j] * op.solve(op.apply_term(j, Y, transpose), transpose) for j in active]
        if not branches:
            break
        level = _orth_complex(kept, np.hstack(branches))
        kept.extend(level)
        n_levels += 1

    V = orth_extend(np.zeros((rhs.shape[0], 0)), np.column_stack(kept)) if kept else np.zeros((rhs.shape[0], 0))
    truncated = V.shape[1] > cfg.max_block_cols
    if truncated:
        logger.warning(
            "moment block truncated from %d to %d columns", V.shape[1], cfg.max_block_cols
        )
        V = V[:, : cfg.max_block_cols]
    return MomentBlock(vectors=V, truncated=truncated, n_levels=n_levels)
