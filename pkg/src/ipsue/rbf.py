"""Radial basis function surrogate of the error estimator.

The interpolant is

    g(x) = sum_i c_i phi(||x - x_i||) + sum_j lambda_j p_j(x),

with the coefficients from the saddle-point system

    [R  P] [c     ]   [f]
    [P' 0] [lambda] = [0].

By default the tail has one linear monomial per input dimension and no
constant term; ``constant=True`` adds the constant.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.spatial.distance import cdist

__all__ = [
    "KernelSpec",
    "Scaler",
    "RbfSurrogate",
    "kernel_eval",
    "kernel_values",
    "fit",
    "top_candidates",
]

logger = logging.getLogger(__name__)

KERNELS = ("tps", "imq")
DEFAULT_GAMMA = 16.0


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "tps"
    gamma: float = DEFAULT_GAMMA

    def __post_init__(self):
        kind = {"thin-plate-spline": "tps", "inverse-multiquadric": "imq"}.get(self.kind, self.kind)
        object.__setattr__(self, "kind", kind)
        if kind not in KERNELS:
            raise ValueError(f"unknown kernel {self.kind!r}, expected one of {KERNELS}")
        if kind == "imq" and not self.gamma > 0:
            raise ValueError("inverse multiquadric needs gamma > 0")


def kernel_values(k: KernelSpec, r) -> np.ndarray:
    """Kernel as a function of distance, elementwise."""
    r = np.asarray(r, dtype=float)
    if k.kind == "tps":
        out = np.zeros_like(r)
        pos = r > 0
        out[pos] = r[pos] ** 2 * np.log(r[pos])
        return out
    return 1.0 / (1.0 + (k.gamma * r) ** 2)


def kernel_eval(k: KernelSpec, a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(kernel_values(k, np.linalg.norm(a - b)))


@dataclass
class Scaler:
    """Per-dimension map onto ``[0, 1]``, through ``log10`` where flagged."""

    low: np.ndarray
    high: np.ndarray
    log: np.ndarray

    @classmethod
    def fit(cls, X, log_decades: float = 2.0) -> "Scaler":
        """Bounds from the data; a dimension is log-scaled when it is positive
        and spans at least ``log_decades`` decades."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        lo, hi = X.min(axis=0), X.max(axis=0)
        log = (lo > 0) & (hi >= lo * 10.0**log_decades)
        return cls.from_bounds(lo, hi, log)

    @classmethod
    def from_bounds(cls, low, high, log) -> "Scaler":
        low = np.asarray(low, dtype=float)
        high = np.asarray(high, dtype=float)
        log = np.asarray(log, dtype=bool)
        return cls(
            low=np.where(log, np.log10(np.where(log, low, 1.0)), low),
            high=np.where(log, np.log10(np.where(log, high, 1.0)), high),
            log=log,
        )

    @property
    def dim(self) -> int:
        return len(self.low)

    def transform(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.dim:
            raise ValueError(f"expected {self.dim} coordinates, got {X.shape[1]}")
        Y = np.where(self.log, np.log10(np.where(self.log & (X > 0), X, 1.0)), X)
        span = self.high - self.low
        safe = np.where(span > 0, span, 1.0)
        return np.where(span > 0, (Y - self.low) / safe, 0.0)

    def to_dict(self) -> dict:
        return {"low": self.low.tolist(), "high": self.high.tolist(), "log": self.log.tolist()}

    @classmethod
    def from_dict(cls, data) -> "Scaler":
        return cls(
            low=np.asarray(data["low"], dtype=float),
            high=np.asarray(data["high"], dtype=float),
            log=np.asarray(data["log"], dtype=bool),
        )


def _tail(Y: np.ndarray, constant: bool) -> np.ndarray:
    if constant:
        return np.hstack([np.ones((len(Y), 1)), Y])
    return Y


@dataclass
class RbfSurrogate:
    kernel: KernelSpec
    centers: np.ndarray  # normalized, (l, D)
    c: np.ndarray
    lam: np.ndarray
    scaler: Scaler
    constant: bool = False
    log_target: bool = False
    least_squares: bool = False
    values: np.ndarray = field(default=None, repr=False)

    @property
    def n_centers(self) -> int:
        return len(self.centers)

    def __call__(self, X) -> np.ndarray:
        return self.eval(X)

    def eval(self, X) -> np.ndarray:
        """Surrogate values at raw (unnormalized) points, one per row of ``X``.

        A 1-d ``X`` is a single point and gives a scalar.
        """
        single = np.ndim(X) == 1
        Y = self.scaler.transform(X)
        g = kernel_values(self.kernel, cdist(Y, self.centers)) @ self.c
        g = g + _tail(Y, self.constant) @ self.lam
        if self.log_target:
            g = 10.0**g
        return float(g[0]) if single else g

    def to_dict(self) -> dict:
        return {
            "kernel": self.kernel.kind,
            "gamma": self.kernel.gamma,
            "centers": self.centers.tolist(),
            "c": self.c.tolist(),
            "lambda": self.lam.tolist(),
            "scaler": self.scaler.to_dict(),
            "constant": self.constant,
            "log_target": self.log_target,
            "least_squares": self.least_squares,
            "values": None if self.values is None else np.asarray(self.values).tolist(),
        }

    @classmethod
    def from_dict(cls, data) -> "RbfSurrogate":
        return cls(
            kernel=KernelSpec(data["kernel"], data.get("gamma", DEFAULT_GAMMA)),
            centers=np.asarray(data["centers"], dtype=float).reshape(len(data["centers"]), -1),
            c=np.asarray(data["c"], dtype=float),
            lam=np.asarray(data["lambda"], dtype=float),
            scaler=Scaler.from_dict(data["scaler"]),
            constant=bool(data.get("constant", False)),
            log_target=bool(data.get("log_target", False)),
            least_squares=bool(data.get("least_squares", False)),
            values=None if data.get("values") is None else np.asarray(data["values"], dtype=float),
        )


def saddle_matrix(k: KernelSpec, Y: np.ndarray, constant: bool = False) -> np.ndarray:
    P = _tail(Y, constant)
    ell, D = P.shape
    M = np.zeros((ell + D, ell + D))
    M[:ell, :ell] = kernel_values(k, cdist(Y, Y))
    M[:ell, ell:] = P
    M[ell:, :ell] = P.T
    return M


def fit(
    centers,
    values,
    k: KernelSpec,
    scaler: Scaler | None = None,
    constant: bool = False,
    log_target: bool = False,
) -> RbfSurrogate:
    """Interpolate ``values`` at ``centers`` (raw coordinates, one per row).

    Raises
    ------
    ValueError
        On duplicate centers after normalization or too few centers for the
        polynomial tail.
    """
    X = np.atleast_2d(np.asarray(centers, dtype=float))
    f = np.asarray(values, dtype=float).ravel()
    if len(f) != len(X):
        raise ValueError(f"{len(X)} centers but {len(f)} values")
    if scaler is None:
        scaler = Scaler.fit(X)
    Y = scaler.transform(X)
    n_tail = Y.shape[1] + int(constant)
    if len(Y) < n_tail + 1:
        raise ValueError(f"need at least {n_tail + 1} centers, got {len(Y)}")
    if len(np.unique(Y, axis=0)) < len(Y):
        raise ValueError("centers are not pairwise distinct after normalization")
    target = np.log10(np.maximum(f, np.finfo(float).tiny)) if log_target else f

    M = saddle_matrix(k, Y, constant)
    rhs = np.concatenate([target, np.zeros(n_tail)])
    least_squares = False
    try:
        sol = np.linalg.solve(M, rhs)
        scale = max(np.abs(rhs).max(), np.finfo(float).tiny)
        if not np.all(np.isfinite(sol)) or np.abs(M @ sol - rhs).max() > 1e-8 * scale:
            raise np.linalg.LinAlgError("inaccurate saddle solve")
    except np.linalg.LinAlgError:
        logger.warning("saddle-point matrix is numerically singular, using least squares")
        sol = np.linalg.lstsq(M, rhs, rcond=None)[0]
        least_squares = True
    ell = len(Y)
    return RbfSurrogate(
        kernel=k,
        centers=Y,
        c=sol[:ell],
        lam=sol[ell:],
        scaler=scaler,
        constant=constant,
        log_target=log_target,
        least_squares=least_squares,
        values=f,
    )


def top_candidates(
    g: RbfSurrogate | Sequence[RbfSurrogate],
    fine_set,
    exclude: Iterable[int] = (),
    k: int = 1,
) -> np.ndarray:
    """Indices of the ``k`` rows of ``fine_set`` with the largest surrogate value.

    Rows listed in ``exclude`` are skipped. Ties go to the lowest index. A
    sequence of surrogates is combined by taking their pointwise maximum.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    X = np.atleast_2d(np.asarray(fine_set, dtype=float))
    if X.size == 0:
        raise ValueError("fine set is empty")
    surrogates = [g] if isinstance(g, RbfSurrogate) else list(g)
    vals = np.max([s.eval(X) for s in surrogates], axis=0)
    mask = np.ones(len(X), dtype=bool)
    mask[list(exclude)] = False
    idx = np.flatnonzero(mask)
    order = np.argsort(-vals[idx], kind="stable")
    return idx[order[:k]]
