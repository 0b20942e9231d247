import numpy as np
import pytest

from helpers import cauchy_derivatives, random_siso
from ipsue.coefficients import Const, Freq, Param
from ipsue.linalg import SingularMatrixError, orth_extend, split_real
from ipsue.moments import MomentConfig, mmm, moment_weights
from ipsue.system import AffineParametricSystem, ParameterPoint, project, rom_transfer


def _rank(M, tol=1e-9):
    sv = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(sv > tol * sv[0]))


def _same_span(A, B):
    ra, rb = _rank(A), _rank(B)
    return ra == rb == _rank(np.hstack([A, B]))


def two_term_system(rng, n=4):
    E = np.eye(n) + 0.1 * rng.standard_normal((n, n))
    A1 = rng.standard_normal((n, n))
    K0 = 3.0 * np.eye(n) + rng.standard_normal((n, n))
    B = rng.standard_normal((n, 1))
    sys = AffineParametricSystem(
        [(Freq(1), E), (Param(0), A1), (Const(1.0), K0)],
        [(1.0, B)],
        [(1.0, B.T)],
        param_names=["a"],
    )
    return sys, E, A1, K0, B


def test_eta_zero_is_snapshot():
    rng = np.random.default_rng(0)
    sys, dense = random_siso(rng, 10)
    pt = ParameterPoint(0.7j)
    blk = mmm(sys.operator(pt), sys.input_matrix(pt), MomentConfig(eta=0))
    x = np.linalg.solve(dense.A(0.7j), dense.B(0.7j, ()))
    assert _same_span(blk.vectors, split_real(x))
    assert blk.n_levels == 1 and not blk.truncated


def test_eta_one_matches_dense_recursion():
    rng = np.random.default_rng(1)
    sys, E, A1, K0, B = two_term_system(rng)
    s0, mu0 = 0.5, 0.8  # real point keeps the moments real, so spans are not saturated
    pt = ParameterPoint(s0, (mu0,))
    blk = mmm(sys.operator(pt), B, MomentConfig(eta=1))
    A0 = s0 * E + mu0 * A1 + K0
    x0 = np.linalg.solve(A0, B)
    ref = np.hstack([x0, -np.linalg.solve(A0, A1 @ x0), -np.linalg.solve(A0, E @ x0)])
    assert blk.vectors.shape[1] == 3
    assert _same_span(blk.vectors, ref)


def test_transposed_recursion():
    rng = np.random.default_rng(2)
    sys, E, A1, K0, B = two_term_system(rng)
    pt = ParameterPoint(0.5, (0.8,))
    blk = mmm(sys.operator(pt), B, MomentConfig(eta=1), transpose=True)
    A0 = 0.5 * E + 0.8 * A1 + K0
    x0 = np.linalg.solve(A0.T, B)
    ref = np.hstack([x0, -np.linalg.solve(A0.T, A1.T @ x0), -np.linalg.solve(A0.T, E.T @ x0)])
    assert _same_span(blk.vectors, ref)


def test_frequency_weights_drop_parameter_branch():
    rng = np.random.default_rng(3)
    sys, E, A1, K0, B = two_term_system(rng, n=6)
    pt = ParameterPoint(0.5, (0.8,))
    op = sys.operator(pt)
    np.testing.assert_array_equal(moment_weights(op, "all"), [1.0, 1.0, 0.0])
    np.testing.assert_array_equal(moment_weights(op, "frequency"), [1.0, 0.0, 0.0])
    blk = mmm(op, B, MomentConfig(eta=2, weights="frequency"))
    assert blk.vectors.shape[1] == 3
    with pytest.raises(ValueError):
        moment_weights(op, [1.0])


def test_eta_three_and_truncation():
    rng = np.random.default_rng(4)
    sys, dense = random_siso(rng, 40)
    pt = ParameterPoint(1j)
    blk = mmm(sys.operator(pt), sys.input_matrix(pt), MomentConfig(eta=3))
    assert blk.vectors.shape == (40, 8) and blk.n_levels == 4
    assert np.abs(blk.vectors.T @ blk.vectors - np.eye(8)).max() <= 1e-10
    small = mmm(sys.operator(pt), sys.input_matrix(pt), MomentConfig(eta=3, max_block_cols=5))
    assert small.truncated and small.vectors.shape[1] == 5


def test_config_validation():
    with pytest.raises(ValueError):
        MomentConfig(eta=-1)
    with pytest.raises(ValueError):
        MomentConfig(max_block_cols=0)


def test_singular_expansion_point():
    sys = AffineParametricSystem.from_descriptor(np.eye(2), [(1.0, np.diag([0.0, -1.0]))], np.ones((2, 1)), np.ones((1, 2)))
    pt = ParameterPoint(0.0)
    with pytest.raises(SingularMatrixError):
        mmm(sys.operator(pt), np.ones((2, 1)), MomentConfig(eta=1))


def test_deterministic():
    rng = np.random.default_rng(5)
    sys, _ = random_siso(rng, 25)
    pt = ParameterPoint(0.3j)
    a = mmm(sys.operator(pt), sys.input_matrix(pt), MomentConfig(eta=2)).vectors
    b = mmm(sys.operator(pt), sys.input_matrix(pt), MomentConfig(eta=2)).vectors
    np.testing.assert_array_equal(a, b)


def _derivative_errors(seed, eta):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(10, 41))
    sys, dense = random_siso(rng, n)
    s0 = 1j * rng.uniform(0.2, 2.0)
    pt = ParameterPoint(s0)
    V = orth_extend(np.zeros((n, 0)), mmm(sys.operator(pt), sys.input_matrix(pt), MomentConfig(eta=eta)).vectors)
    rom = project(sys, V)
    poles = np.linalg.eigvals(dense.terms[1][1])
    rho = 0.1 * np.min(np.abs(poles - s0))
    dH = cauchy_derivatives(lambda z: dense.H(z)[0, 0], s0, rho, 3)
    dE = cauchy_derivatives(lambda z: dense.H(z)[0, 0] - rom_transfer(rom, ParameterPoint(z))[0, 0], s0, rho, 3)
    return np.abs(dE) / np.abs(dH)


@pytest.mark.parametrize("seed", range(3))
def test_moments_matched_up_to_eta(seed):
    assert np.all(_derivative_errors(seed, 2)[:3] <= 1e-5)


def test_stencil_detects_unmatched_moment():
    # with eta = 2 the third derivative is not matched
    assert _derivative_errors(0, 2)[3] > 1e-5
