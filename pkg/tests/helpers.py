"""Random test systems and dense reference implementations.

The references work on plain numpy arrays with explicitly written coefficient
functions, so they share no code path with the package beyond numpy itself.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ipsue.coefficients import Const, Freq, Param
from ipsue.system import AffineParametricSystem, ParameterPoint


@dataclass
class DenseSystem:
    """``A(s, mu) = sum_j f_j(s, mu) K_j``, ``B`` and ``C`` as callables too."""

    terms: list  # [(callable, ndarray)]
    B: Callable
    C: Callable

    def A(self, s, mu=()):
        return sum(f(s, mu) * K for f, K in self.terms)

    def H(self, s, mu=()):
        return self.C(s, mu) @ np.linalg.solve(self.A(s, mu), self.B(s, mu))


def _stable_part(rng, n, shift=0.5):
    G = rng.standard_normal((n, n)) / np.sqrt(n)
    S = rng.standard_normal((n, n)) / np.sqrt(n)
    # negative definite symmetric part, arbitrary skew part
    return -(G @ G.T + shift * np.eye(n)) + 0.5 * (S - S.T)


def random_siso(rng, n, m=1, p=1):
    """Stable ``s I - A`` with random ``B`` and ``C``; returns (system, dense)."""
    A = _stable_part(rng, n)
    B = rng.standard_normal((n, m))
    C = rng.standard_normal((p, n))
    E = np.eye(n)
    sys = AffineParametricSystem.from_descriptor(E, [(1.0, A)], B, C)
    dense = DenseSystem(
        terms=[(lambda s, mu: s, E), (lambda s, mu: -1.0, A)],
        B=lambda s, mu: B,
        C=lambda s, mu: C,
    )
    return sys, dense


def random_parametric(rng, n, m=1, p=1, d=1):
    """``s E + K0 + sum_i mu_i K_i`` with symmetric positive definite pieces."""
    def spd(shift):
        G = rng.standard_normal((n, n)) / np.sqrt(n)
        return G @ G.T + shift * np.eye(n)

    E = spd(1.0)
    K0 = spd(0.5) + 0.3 * (lambda S: S - S.T)(rng.standard_normal((n, n)) / np.sqrt(n))
    Ks = [np.diag(rng.uniform(0.0, 1.0, n)) for _ in range(d)]
    B = rng.standard_normal((n, m))
    C = rng.standard_normal((p, n))
    terms = [(Freq(1), E), (Const(1.0), K0)] + [(Param(i), K) for i, K in enumerate(Ks)]
    sys = AffineParametricSystem(
        terms,
        [(Const(1.0), B)],
        [(Const(1.0), C)],
        param_names=[f"p{i}" for i in range(d)],
        param_ranges=[(0.1, 10.0)] * d,
        freq_range_hz=(0.01, 1.0),
    )
    dense_terms = [(lambda s, mu: s, E), (lambda s, mu: 1.0, K0)]
    dense_terms += [((lambda i: lambda s, mu: mu[i])(i), K) for i, K in enumerate(Ks)]
    dense = DenseSystem(terms=dense_terms, B=lambda s, mu: B, C=lambda s, mu: C)
    return sys, dense


def random_orthonormal(rng, n, r):
    Q, _ = np.linalg.qr(rng.standard_normal((n, r)))
    return Q


def dense_estimate(dense: DenseSystem, V, V_du, V_e, s, mu=(), conjugate=False):
    """Entrywise estimator by dense elimination; returns (term1, term2, H_hat)."""
    A = dense.A(s, mu)
    B = dense.B(s, mu)
    C = dense.C(s, mu)
    xh = np.linalg.solve(V.T @ A @ V, V.T @ B)
    r_pr = B - A @ (V @ xh)
    X_du = V_du @ np.linalg.solve(V_du.T @ A.T @ V_du, V_du.T @ C.T)
    r_du = C.T - A.T @ X_du
    e_du = V_e @ np.linalg.solve(V_e.T @ A.T @ V_e, V_e.T @ r_du)
    tr = (lambda X: X.conj().T) if conjugate else (lambda X: X.T)
    t1 = np.abs(tr(X_du) @ r_pr)
    t2 = np.abs(tr(e_du) @ r_pr)
    H_hat = (C @ V) @ xh
    return t1, t2, H_hat


# dense greedy reference ------------------------------------------------------


def _gs_append(Q, W, tol=1e-10):
    """Append the columns of ``W`` to the orthonormal columns of ``Q`` by
    two-pass classical Gram-Schmidt, dropping a column whose residual falls
    below ``tol`` times its norm."""
    for w in W.T:
        norm0 = np.linalg.norm(w)
        if norm0 == 0:
            continue
        for _ in range(2):
            w = w - Q @ (Q.conj().T @ w)
        if np.linalg.norm(w) > tol * norm0:
            Q = np.column_stack([Q, w / np.linalg.norm(w)])
    return Q


def _orth_append(V, block, tol=1e-10):
    """Real orthonormal extension: real and imaginary parts, in column order."""
    parts = []
    for c in np.asarray(block).T:
        parts.append(np.real(c))
        if np.any(np.imag(c)):
            parts.append(np.imag(c))
    if not parts:
        return V
    return _gs_append(V, np.column_stack(parts), tol)


def dense_moments(dense: DenseSystem, rhs, s0, mu0, eta, transpose=False):
    """Block Arnoldi on the moment recursion of ``A(s0)^{-1} rhs`` over the
    non-constant terms; returns the complex orthonormal moment basis."""
    A0 = dense.A(s0, mu0)
    if transpose:
        A0 = A0.T
    active = [K.T if transpose else K for f, K in dense.terms if _varies(f, mu0)]
    Q = np.zeros((A0.shape[0], 0), dtype=complex)
    level = _gs_append(Q, np.linalg.solve(A0, rhs).astype(complex))
    Q = level
    for _ in range(eta):
        if level.shape[1] == 0:
            break
        new = np.hstack([-np.linalg.solve(A0, K @ level) for K in active])
        k0 = Q.shape[1]
        Q = _gs_append(Q, new)
        level = Q[:, k0:]
    return Q


def _varies(f, mu0):
    probe = [f(0.3 + 0.7j, np.asarray(mu0) + 0.1), f(1.1 - 0.2j, np.asarray(mu0) + 0.5)]
    return probe[0] != probe[1]


def dense_greedy(dense: DenseSystem, xi, tol, eta, max_iters=50):
    """Fixed-set greedy with dense linear algebra; returns (selected indices, r, eps)."""
    n = dense.terms[0][1].shape[0]
    V = np.zeros((n, 0))
    V_du = np.zeros((n, 0))
    V_e = np.zeros((n, 0))
    k, ka = 0, len(xi) - 1
    sel, used, used_a = [], set(), set()
    eps = np.inf
    for _ in range(max_iters):
        s, mu = xi[k]
        sa, mua = xi[ka]
        sel.append(k)
        used.add(k)
        used_a.add(ka)
        V = _orth_append(V, dense_moments(dense, dense.B(s, mu), s, mu, eta))
        V_du = _orth_append(V_du, dense_moments(dense, dense.C(s, mu).T, s, mu, eta, transpose=True))
        V_e = _orth_append(V_e, np.hstack([V_du, dense_moments(dense, dense.C(sa, mua).T, sa, mua, eta, True)]))
        delta, second = [], []
        for s_, mu_ in xi:
            a, b, _ = dense_estimate(dense, V, V_du, V_e, s_, mu_)
            delta.append((a + b).max())
            second.append(b.max())
        delta = np.array(delta)
        order = [int(i) for i in np.argsort(-delta, kind="stable") if int(i) not in used]
        eps = delta[order[0]]
        if eps <= tol:
            break
        k = order[0]
        order_a = [int(i) for i in np.argsort(-np.array(second), kind="stable") if int(i) != k and int(i) not in used_a]
        ka = order_a[0]
    return sel, V.shape[1], eps


def point(s, mu=()):
    return ParameterPoint(s, mu)


def cauchy_derivatives(f, s0, radius, kmax, n_nodes=64):
    """Derivatives ``f^(k)(s0)``, ``k = 0..kmax``, from the trapezoidal rule on
    the circle of the given radius (a high-order finite-difference stencil)."""
    theta = 2 * np.pi * np.arange(n_nodes) / n_nodes
    z = s0 + radius * np.exp(1j * theta)
    vals = np.array([f(zz) for zz in z])
    out = []
    fact = 1.0
    for k in range(kmax + 1):
        if k:
            fact *= k
        coef = np.mean(vals * np.exp(-1j * k * theta)) / radius**k
        out.append(fact * coef)
    return np.array(out)
