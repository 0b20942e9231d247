"""Greedy selection of interpolation points.

:func:`greedy_fixed` searches a fixed training set. :func:`ipsue` evaluates the
estimator on a small coarse set only and grows that set with the points of a
fine set where an RBF surrogate of the estimator is largest.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import rbf
from .estimator import EstimateBatch, ReductionState, estimate_many
from .moments import MomentConfig, mmm
from .system import AffineParametricSystem, ParameterPoint

__all__ = [
    "GreedyConfig",
    "IterationRecord",
    "GreedyTrace",
    "ValidationTable",
    "greedy_fixed",
    "ipsue",
    "validate",
    "features",
    "TRACE_COLUMNS",
]

logger = logging.getLogger(__name__)

TRACE_COLUMNS = (
    "iter",
    "mu_point",
    "mu_alpha_point",
    "epsilon",
    "r",
    "ell",
    "est_evals",
    "surrogate_evals",
    "wall_ms",
)


@dataclass(frozen=True)
class GreedyConfig:
    """Settings shared by both greedy variants.

    ``initial_points`` overrides the starting pair ``(mu_1, mu_alpha_1)`` as
    indices into the (coarse) training set. ``distinct_alpha`` keeps the
    dual-residual point different from the primal one; ``skip_used`` moves
    the selection to the next-largest unused point when the maximizer was
    already an interpolation point.
    """

    tol: float = 1e-3
    eta: int = 1
    max_iters: int = 50
    n_add: int = 1
    seed: int = 0
    kernel: rbf.KernelSpec = field(default_factory=rbf.KernelSpec)
    rbf_constant: bool = False
    rbf_log_target: bool = False
    conjugate: bool = False
    moment_weights: str | Sequence[float] = "all"
    max_block_cols: int = 200
    threads: int = 1
    initial_points: tuple | None = None
    distinct_alpha: bool = True
    skip_used: bool = True

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.n_add < 1:
            raise ValueError("n_add must be at least 1")
        if self.eta < 0:
            raise ValueError("eta must be non-negative")

    def moment_config(self) -> MomentConfig:
        return MomentConfig(eta=self.eta, max_block_cols=self.max_block_cols, weights=self.moment_weights)


@dataclass
class IterationRecord:
    iter: int
    mu_point: ParameterPoint
    mu_alpha_point: ParameterPoint
    epsilon: float
    r: int
    ell: int
    est_evals: int
    surrogate_evals: int
    wall_ms: float
    max_delta: float = float("nan")
    fallthrough: bool = False
    truncated: bool = False
    n_coarse: int = 0

    def row(self) -> dict:
        return {
            "iter": self.iter,
            "mu_point": str(self.mu_point),
            "mu_alpha_point": str(self.mu_alpha_point),
            "epsilon": self.epsilon,
            "r": self.r,
            "ell": self.ell,
            "est_evals": self.est_evals,
            "surrogate_evals": self.surrogate_evals,
            "wall_ms": self.wall_ms,
        }


@dataclass
class GreedyTrace:
    """Per-iteration records plus the termination status of a run."""

    algorithm: str
    records: list = field(default_factory=list)
    converged: bool = False
    stagnated: bool = False
    exhausted: bool = False
    epsilon: float = float("inf")
    coarse_set: list | None = None
    surrogates: list | None = None
    wall_s: float = 0.0

    @property
    def iterations(self) -> int:
        return len(self.records)

    @property
    def est_evals(self) -> int:
        return sum(r.est_evals for r in self.records)

    @property
    def surrogate_evals(self) -> int:
        return sum(r.surrogate_evals for r in self.records)

    @property
    def points(self) -> list:
        return [r.mu_point for r in self.records]

    @property
    def alpha_points(self) -> list:
        return [r.mu_alpha_point for r in self.records]

    def rows(self) -> list:
        return [r.row() for r in self.records]


def features(points: Sequence[ParameterPoint]) -> np.ndarray:
    """Surrogate coordinates ``(|Im s|, mu...)`` one row per point."""
    return np.array([(abs(p.s.imag), *p.mu) for p in points], dtype=float)


def _extend(state: ReductionState, mu: ParameterPoint, mu_alpha: ParameterPoint, cfg: GreedyConfig):
    """Steps 4-6: grow V, V_du and V_e. Returns (columns added to V, truncated)."""
    sys = state.system
    mcfg = cfg.moment_config()
    op = sys.operator(mu)
    primal = mmm(op, sys.input_matrix(mu), mcfg)
    dual = mmm(op, sys.output_matrix(mu).T, mcfg, transpose=True)
    added = state.extend_primal(primal.vectors)
    state.extend_dual(dual.vectors)
    op_a = sys.operator(mu_alpha)
    dual_a = mmm(op_a, sys.output_matrix(mu_alpha).T, mcfg, transpose=True)
    state.extend_dual_residual(np.hstack([state.V_du, dual_a.vectors]))
    state.points.append(mu)
    state.alpha_points.append(mu_alpha)
    return added, primal.truncated or dual.truncated or dual_a.truncated


def _ranked(values: np.ndarray) -> np.ndarray:
    # descending, ties to the lowest index
    return np.argsort(-values, kind="stable")


def _select(
    batch: EstimateBatch,
    points: list,
    used: set,
    used_alpha: set,
    cfg: GreedyConfig,
):
    """Steps 8-9 on one evaluated set. Returns indices (k, k_alpha) and a fall-through flag."""
    flagged = False
    k = None
    for idx in _ranked(batch.delta):
        if cfg.skip_used and points[idx] in used:
            flagged = True
            continue
        k = int(idx)
        break
    if k is None:
        return None, None, flagged
    order = _ranked(batch.second)
    distinct = [int(i) for i in order if not (cfg.distinct_alpha and points[i] == points[k])]
    fresh = [i for i in distinct if not (cfg.skip_used and points[i] in used_alpha)]
    # with every candidate taken, reuse the best distinct point
    pool = fresh or distinct or [k]
    k_alpha = pool[0]
    return k, k_alpha, flagged or k_alpha != int(order[0])


def _check_points(points, name):
    if len(set(points)) != len(points):
        raise ValueError(f"{name} contains repeated points")


def greedy_fixed(
    sys: AffineParametricSystem, xi_fixed: Sequence[ParameterPoint], cfg: GreedyConfig = GreedyConfig()
):
    """Greedy construction over a fixed training set.

    Starts from the first and the last sample (or ``cfg.initial_points``).
    Every iteration extends the three bases, evaluates the estimator on the
    whole training set and moves to its maximizer; the dual-residual point
    maximizes the second summand.

    Returns
    -------
    (ReductionState, GreedyTrace)
    """
    xi = list(xi_fixed)
    if len(xi) < 2:
        raise ValueError("training set needs at least two points")
    _check_points(xi, "training set")
    i0, ia = cfg.initial_points if cfg.initial_points is not None else (0, len(xi) - 1)
    state = ReductionState(sys)
    trace = GreedyTrace(algorithm="fixed")
    t_start = time.perf_counter()
    mu, mu_alpha = xi[i0], xi[ia]
    used, used_alpha = set(), set()

    for it in range(1, cfg.max_iters + 1):
        t0 = time.perf_counter()
        added, truncated = _extend(state, mu, mu_alpha, cfg)
        used.add(mu)
        used_alpha.add(mu_alpha)
        batch = estimate_many(state, xi, conjugate=cfg.conjugate, threads=cfg.threads)
        k, k_alpha, flagged = _select(batch, xi, used, used_alpha, cfg)
        max_delta = float(batch.delta.max())
        eps = float(batch.delta[k]) if k is not None else max_delta
        trace.records.append(
            IterationRecord(
                iter=it,
                mu_point=mu,
                mu_alpha_point=mu_alpha,
                epsilon=eps,
                r=state.r,
                ell=state.ell,
                est_evals=len(xi),
                surrogate_evals=0,
                wall_ms=1e3 * (time.perf_counter() - t0),
                max_delta=max_delta,
                fallthrough=flagged,
                truncated=truncated,
                n_coarse=len(xi),
            )
        )
        logger.info("iter %d: eps=%.3e r=%d ell=%d", it, eps, state.r, state.ell)
        trace.epsilon = eps
        if eps <= cfg.tol:
            trace.converged = True
            break
        if added == 0:
            trace.stagnated = True
            logger.warning("no new basis vectors at iteration %d, stopping", it)
            break
        if k is None:
            trace.exhausted = True
            break
        mu, mu_alpha = xi[k], xi[k_alpha]
    trace.wall_s = time.perf_counter() - t_start
    return state, trace


def ipsue(
    sys: AffineParametricSystem,
    xi_coarse: Sequence[ParameterPoint],
    xi_fine: Sequence[ParameterPoint],
    cfg: GreedyConfig = GreedyConfig(),
):
    """Greedy construction with surrogate-driven enrichment of the training set.

    The starting pair is drawn from the coarse set with a seeded generator
    unless ``cfg.initial_points`` fixes it. Each iteration evaluates the
    estimator on the current coarse set, fits one surrogate per transfer
    function entry through those values and appends the ``n_add`` points of
    the fine set with the largest surrogate value.

    Returns
    -------
    (ReductionState, GreedyTrace)
    """
    xi_c = list(xi_coarse)
    xi_f = list(xi_fine)
    if len(xi_c) < 2:
        raise ValueError("coarse set needs at least two points")
    if len(xi_f) < len(xi_c):
        raise ValueError("fine set must not be smaller than the coarse set")
    _check_points(xi_c, "coarse set")
    _check_points(xi_f, "fine set")

    if cfg.initial_points is not None:
        i0, ia = cfg.initial_points
    else:
        rng = np.random.default_rng(cfg.seed)
        i0, ia = (int(v) for v in rng.choice(len(xi_c), size=2, replace=False))

    fine_index = {p: k for k, p in enumerate(xi_f)}
    in_coarse = {fine_index[p] for p in xi_c if p in fine_index}
    scaler = rbf.Scaler.fit(features(xi_f + xi_c))
    F_fine = features(xi_f)

    state = ReductionState(sys)
    trace = GreedyTrace(algorithm="ipsue")
    t_start = time.perf_counter()
    mu, mu_alpha = xi_c[i0], xi_c[ia]
    used, used_alpha = set(), set()
    surrogates = None

    for it in range(1, cfg.max_iters + 1):
        t0 = time.perf_counter()
        added, truncated = _extend(state, mu, mu_alpha, cfg)
        used.add(mu)
        used_alpha.add(mu_alpha)
        n_eval = len(xi_c)
        batch = estimate_many(state, xi_c, conjugate=cfg.conjugate, threads=cfg.threads)
        k, k_alpha, flagged = _select(batch, xi_c, used, used_alpha, cfg)
        max_delta = float(batch.delta.max())
        eps = float(batch.delta[k]) if k is not None else max_delta
        next_pair = (xi_c[k], xi_c[k_alpha]) if k is not None else None

        n_sur = 0
        if eps > cfg.tol and len(in_coarse) < len(xi_f):
            surrogates = _fit_surrogates(batch, xi_c, scaler, cfg)
            picks = rbf.top_candidates(surrogates, F_fine, exclude=sorted(in_coarse), k=cfg.n_add)
            n_sur = len(xi_f)
            for idx in picks:
                xi_c.append(xi_f[int(idx)])
                in_coarse.add(int(idx))
        trace.records.append(
            IterationRecord(
                iter=it,
                mu_point=mu,
                mu_alpha_point=mu_alpha,
                epsilon=eps,
                r=state.r,
                ell=state.ell,
                est_evals=n_eval,
                surrogate_evals=n_sur,
                wall_ms=1e3 * (time.perf_counter() - t0),
                max_delta=max_delta,
                fallthrough=flagged,
                truncated=truncated,
                n_coarse=n_eval,
            )
        )
        logger.info("iter %d: eps=%.3e r=%d |Xi_c|=%d", it, eps, state.r, n_eval)
        trace.epsilon = eps
        if eps <= cfg.tol:
            trace.converged = True
            break
        if added == 0:
            trace.stagnated = True
            logger.warning("no new basis vectors at iteration %d, stopping", it)
            break
        if next_pair is None:
            trace.exhausted = True
            break
        mu, mu_alpha = next_pair
    trace.coarse_set = xi_c
    trace.surrogates = surrogates
    trace.wall_s = time.perf_counter() - t_start
    return state, trace


def _fit_surrogates(batch: EstimateBatch, points, scaler, cfg: GreedyConfig):
    X = features(points)
    D = batch.delta_ij.reshape(len(points), -1)
    return [
        rbf.fit(X, D[:, e], cfg.kernel, scaler=scaler, constant=cfg.rbf_constant, log_target=cfg.rbf_log_target)
        for e in range(D.shape[1])
    ]


@dataclass
class ValidationTable:
    """Errors of the reduced model on a test set, one row per point."""

    points: list
    abs_H: np.ndarray
    abs_Hhat: np.ndarray
    abs_error: np.ndarray
    delta: np.ndarray
    param_names: tuple = ()

    @property
    def max_error(self) -> float:
        return float(self.abs_error.max())

    @property
    def median_error(self) -> float:
        return float(np.median(self.abs_error))

    @property
    def max_delta(self) -> float:
        return float(self.delta.max())

    def summary(self) -> dict:
        return {
            "n_points": len(self.points),
            "max_error": self.max_error,
            "median_error": self.median_error,
            "max_delta": self.max_delta,
            "median_delta": float(np.median(self.delta)),
        }

    def columns(self) -> list:
        return ["s_imag", *self.param_names, "abs_H", "abs_Hhat", "abs_error", "delta"]

    def rows(self) -> list:
        out = []
        for k, p in enumerate(self.points):
            vals = [*p.components(), self.abs_H[k], self.abs_Hhat[k], self.abs_error[k], self.delta[k]]
            out.append(dict(zip(self.columns(), vals)))
        return out


def _entry_max(a: np.ndarray) -> np.ndarray:
    return np.abs(a).reshape(len(a), -1).max(axis=1)


def validate(
    state: ReductionState,
    sys: AffineParametricSystem | None,
    xi_test,
    conjugate: bool = False,
    threads: int = 1,
) -> ValidationTable:
    """Compare the reduced and full transfer functions on ``xi_test``.

    For MIMO systems ``abs_H`` and ``abs_Hhat`` are the largest entry moduli
    and ``abs_error`` the largest entrywise error.
    """
    sys = state.system if sys is None else sys
    if sys is not state.system:
        raise ValueError("state was built for a different system")
    pts = list(xi_test)
    batch = estimate_many(state, pts, conjugate=conjugate, threads=threads)
    H = np.stack([sys.transfer_function(p) for p in pts])
    Hh = batch.H_hat
    return ValidationTable(
        points=pts,
        abs_H=_entry_max(H),
        abs_Hhat=_entry_max(Hh),
        abs_error=_entry_max(H - Hh),
        delta=batch.delta,
        param_names=tuple(sys.param_names),
    )
