"""Affine-parametric LTI systems in the frequency domain.

A system is stored through the affine decomposition of its operator,

    A(s, mu) = sum_j theta_j(s, mu) K_j,

so the descriptor form ``s E - A(mu)`` is the special case built by
:meth:`AffineParametricSystem.from_descriptor`. Input and output maps use the
same mechanism, which covers frequency dependent inputs such as ``B(s) = s Q``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .coefficients import Coefficient, Freq, as_coefficient
from .linalg import Factorization, SingularMatrixError

__all__ = [
    "ParameterPoint",
    "AffineTerm",
    "AffineParametricSystem",
    "AffineOperator",
    "ReducedModel",
    "assemble",
    "transfer_function",
    "project",
    "rom_transfer",
]


@dataclass(frozen=True)
class ParameterPoint:
    """Laplace variable ``s`` together with the physical parameters ``mu``."""

    s: complex
    mu: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "s", complex(self.s))
        object.__setattr__(self, "mu", tuple(float(v) for v in self.mu))
        if not np.isfinite(self.s) or not all(np.isfinite(self.mu)):
            raise ValueError(f"non-finite parameter point {self}")

    @classmethod
    def from_frequency(cls, f_hz: float, mu: Sequence[float] = ()) -> "ParameterPoint":
        return cls(2j * np.pi * f_hz, tuple(mu))

    @property
    def omega(self) -> float:
        return self.s.imag

    def components(self) -> tuple:
        """Real coordinates ``(Im s, mu...)`` used for sampling and surrogates."""
        return (self.s.imag, *self.mu)

    def __str__(self):
        return ";".join(repr(c) for c in self.components())


@dataclass(frozen=True)
class AffineTerm:
    coef: Coefficient
    matrix: object

    def __post_init__(self):
        object.__setattr__(self, "coef", as_coefficient(self.coef))


def _points_arrays(points: Sequence[ParameterPoint], d: int):
    s = np.array([p.s for p in points], dtype=complex)
    mu = np.array([p.mu for p in points], dtype=float).reshape(len(points), d)
    return s, mu


def _eval_coefs(terms, points, d) -> np.ndarray:
    s, mu = _points_arrays(points, d)
    out = np.empty((len(points), len(terms)), dtype=complex)
    for j, t in enumerate(terms):
        out[:, j] = t.coef.evaluate(s, mu)
    return out


class AffineParametricSystem:
    """Frequency-domain system ``H(s, mu) = C(s, mu) A(s, mu)^{-1} B(s, mu)``.

    Parameters
    ----------
    terms
        ``(coefficient, matrix)`` pairs of the operator decomposition. Matrices
        are ``n x n`` and stored in CSC format.
    inputs
        ``(coefficient, n x m array)`` pairs summing to ``B``.
    outputs
        ``(coefficient, p x n array)`` pairs summing to ``C``.
    param_names, param_ranges
        Names and ``(low, high)`` ranges of the physical parameters.
    freq_range_hz
        Frequency band of interest, used by the samplers.
    """

    def __init__(
        self,
        terms,
        inputs,
        outputs,
        param_names: Sequence[str] = (),
        param_ranges: Sequence[tuple] | None = None,
        freq_range_hz: tuple | None = None,
        name: str = "system",
    ):
        self.terms = tuple(
            AffineTerm(c, sp.csc_matrix(M)) for c, M in (_as_pair(t) for t in terms)
        )
        self.inputs = tuple(
            AffineTerm(c, _dense2d(M)) for c, M in (_as_pair(t) for t in inputs)
        )
        self.outputs = tuple(
            AffineTerm(c, _dense2d(M)) for c, M in (_as_pair(t) for t in outputs)
        )
        self.param_names = tuple(param_names)
        if param_ranges is None:
            param_ranges = [(0.0, 1.0)] * len(self.param_names)
        self.param_ranges = tuple((float(lo), float(hi)) for lo, hi in param_ranges)
        self.freq_range_hz = None if freq_range_hz is None else tuple(float(f) for f in freq_range_hz)
        self.name = name
        self._check()

    @classmethod
    def from_descriptor(cls, E, A_terms, B, C, **kwargs) -> "AffineParametricSystem":
        """Build ``s E - sum_j theta_j A_j`` from a descriptor description.

        ``A_terms`` holds ``(theta_j, A_j)`` pairs; ``B`` and ``C`` are constant.
        """
        terms = []
        if E is not None:
            terms.append((Freq(1), E))
        for coef, A in A_terms:
            terms.append((-as_coefficient(coef), A))
        return cls(terms, [(1.0, B)], [(1.0, C)], **kwargs)

    def _check(self):
        if not self.terms:
            raise ValueError("system needs at least one affine term")
        if not self.inputs or not self.outputs:
            raise ValueError("system needs input and output maps")
        n = self.terms[0].matrix.shape[0]
        for t in self.terms:
            if t.matrix.shape != (n, n):
                raise ValueError(f"operator term has shape {t.matrix.shape}, expected {(n, n)}")
        m = self.inputs[0].matrix.shape[1]
        for t in self.inputs:
            if t.matrix.shape != (n, m):
                raise ValueError(f"input term has shape {t.matrix.shape}, expected {(n, m)}")
        p = self.outputs[0].matrix.shape[0]
        for t in self.outputs:
            if t.matrix.shape != (p, n):
                raise ValueError(f"output term has shape {t.matrix.shape}, expected {(p, n)}")
        if len(self.param_ranges) != len(self.param_names):
            raise ValueError("param_ranges and param_names differ in length")

    @property
    def n(self) -> int:
        return self.terms[0].matrix.shape[0]

    @property
    def m(self) -> int:
        return self.inputs[0].matrix.shape[1]

    @property
    def p(self) -> int:
        return self.outputs[0].matrix.shape[0]

    @property
    def d(self) -> int:
        return len(self.param_names)

    def _check_point(self, pt: ParameterPoint):
        if len(pt.mu) != self.d:
            raise ValueError(f"point has {len(pt.mu)} parameters, system expects {self.d}")

    def term_coefficients(self, points: Sequence[ParameterPoint]) -> np.ndarray:
        """Operator coefficients, shape ``(len(points), n_terms)``."""
        for pt in points:
            self._check_point(pt)
        return _eval_coefs(self.terms, points, self.d)

    def input_coefficients(self, points) -> np.ndarray:
        return _eval_coefs(self.inputs, points, self.d)

    def output_coefficients(self, points) -> np.ndarray:
        return _eval_coefs(self.outputs, points, self.d)

    def assemble(self, pt: ParameterPoint) -> sp.csc_matrix:
        theta = self.term_coefficients([pt])[0]
        M = sp.csc_matrix((self.n, self.n), dtype=complex)
        for th, t in zip(theta, self.terms):
            M = M + th * t.matrix
        return sp.csc_matrix(M)

    def input_matrix(self, pt: ParameterPoint) -> np.ndarray:
        beta = self.input_coefficients([pt])[0]
        return sum(b * t.matrix for b, t in zip(beta, self.inputs))

    def output_matrix(self, pt: ParameterPoint) -> np.ndarray:
        gamma = self.output_coefficients([pt])[0]
        return sum(g * t.matrix for g, t in zip(gamma, self.outputs))

    def operator(self, pt: ParameterPoint) -> "AffineOperator":
        self._check_point(pt)
        return AffineOperator(self, pt)

    def transfer_function(self, pt: ParameterPoint) -> np.ndarray:
        op = self.operator(pt)
        X = op.solve(self.input_matrix(pt))
        return self.output_matrix(pt) @ X

    def project(self, V) -> "ReducedModel":
        return project(self, V)


def _as_pair(t):
    if isinstance(t, AffineTerm):
        return t.coef, t.matrix
    coef, M = t
    return as_coefficient(coef), M


def _dense2d(M) -> np.ndarray:
    if sp.issparse(M):
        M = M.toarray()
    M = np.asarray(M)
    if M.ndim == 1:
        M = M[:, None]
    if np.iscomplexobj(M) and not np.any(M.imag):
        M = M.real
    return M


class AffineOperator:
    """The operator of a system at one point, with its per-term matrices.

    The sparse LU is computed on first use and shared by primal and transposed
    solves.
    """

    def __init__(self, system: AffineParametricSystem, pt: ParameterPoint):
        self.system = system
        self.point = pt
        self.weights = system.term_coefficients([pt])[0]
        self.term_matrices = tuple(t.matrix for t in system.terms)
        self.term_coefs = tuple(t.coef for t in system.terms)

    @cached_property
    def matrix(self) -> sp.csc_matrix:
        return self.system.assemble(self.point)

    @cached_property
    def factorization(self) -> Factorization:
        return Factorization(self.matrix)

    def solve(self, rhs, transpose: bool = False) -> np.ndarray:
        return self.factorization.solve(rhs, transpose=transpose)

    def apply_term(self, j: int, x, transpose: bool = False) -> np.ndarray:
        K = self.term_matrices[j]
        return (K.T if transpose else K) @ x


@dataclass
class ReducedModel:
    """Galerkin projection of a system onto the columns of ``V``."""

    V: np.ndarray
    term_coefs: tuple
    term_matrices: np.ndarray  # (n_terms, r, r)
    input_coefs: tuple
    input_matrices: np.ndarray  # (n_in, r, m)
    output_coefs: tuple
    output_matrices: np.ndarray  # (n_out, p, r)
    d: int = 0

    @property
    def r(self) -> int:
        return self.V.shape[1]

    def operator_matrix(self, pt: ParameterPoint) -> np.ndarray:
        theta = _eval_coefs_plain(self.term_coefs, [pt], self.d)[0]
        return np.tensordot(theta, self.term_matrices, axes=1)

    def transfer(self, pt: ParameterPoint) -> np.ndarray:
        return rom_transfer(self, pt)


def _eval_coefs_plain(coefs, points, d):
    s, mu = _points_arrays(points, d)
    return np.stack([c.evaluate(s, mu) for c in coefs], axis=-1)


def assemble(sys: AffineParametricSystem, pt: ParameterPoint) -> sp.csc_matrix:
    """Sparse operator ``s E - A(mu)`` at ``pt``."""
    return sys.assemble(pt)


def transfer_function(sys: AffineParametricSystem, pt: ParameterPoint) -> np.ndarray:
    """``C A^{-1} B`` at ``pt`` as a ``p x m`` array."""
    return sys.transfer_function(pt)


def project(sys: AffineParametricSystem, V) -> ReducedModel:
    """One-sided Galerkin projection (test basis equal to trial basis)."""
    V = np.asarray(V)
    if V.ndim != 2 or V.shape[1] == 0:
        raise ValueError("projection basis must have at least one column")
    if V.shape[0] != sys.n:
        raise ValueError(f"basis has {V.shape[0]} rows, system order is {sys.n}")
    terms = np.stack([V.T @ (t.matrix @ V) for t in sys.terms])
    ins = np.stack([V.T @ t.matrix for t in sys.inputs])
    outs = np.stack([t.matrix @ V for t in sys.outputs])
    return ReducedModel(
        V=V,
        term_coefs=tuple(t.coef for t in sys.terms),
        term_matrices=terms,
        input_coefs=tuple(t.coef for t in sys.inputs),
        input_matrices=ins,
        output_coefs=tuple(t.coef for t in sys.outputs),
        output_matrices=outs,
        d=sys.d,
    )


def rom_transfer(rom: ReducedModel, pt: ParameterPoint) -> np.ndarray:
    """Reduced transfer function by a dense ``r x r`` solve."""
    if len(pt.mu) != rom.d:
        raise ValueError(f"point has {len(pt.mu)} parameters, model expects {rom.d}")
    A = rom.operator_matrix(pt)
    beta = _eval_coefs_plain(rom.input_coefs, [pt], rom.d)[0]
    gamma = _eval_coefs_plain(rom.output_coefs, [pt], rom.d)[0]
    B = np.tensordot(beta, rom.input_matrices, axes=1)
    C = np.tensordot(gamma, rom.output_matrices, axes=1)
    try:
        X = np.linalg.solve(A, B)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(f"reduced operator is singular at {pt}") from exc
    return C @ X
