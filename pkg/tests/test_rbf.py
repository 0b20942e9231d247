import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ipsue.rbf import (
    DEFAULT_GAMMA,
    KernelSpec,
    RbfSurrogate,
    Scaler,
    fit,
    kernel_eval,
    kernel_values,
    saddle_matrix,
    top_candidates,
)

TPS = KernelSpec("tps")
IMQ = KernelSpec("imq", 16.0)


def identity_scaler(d):
    return Scaler.from_bounds(np.zeros(d), np.ones(d), np.zeros(d, dtype=bool))


def separated_centers(rng, n, d, min_dist=0.1):
    """Rejection sampling in the unit cube with a minimum pairwise distance."""
    while True:
        pts = [rng.uniform(0, 1, d)]
        for _ in range(100 * n):
            x = rng.uniform(0, 1, d)
            if min(np.linalg.norm(x - p) for p in pts) >= min_dist:
                pts.append(x)
                if len(pts) == n:
                    return np.array(pts)


def oracle_coefficients(kind, Y, f, gamma=DEFAULT_GAMMA):
    """Dense saddle-point solve written out entry by entry."""
    ell, d = Y.shape
    M = np.zeros((ell + d, ell + d))
    for i in range(ell):
        for j in range(ell):
            r = math.dist(Y[i], Y[j])
            if kind == "tps":
                M[i, j] = r * r * math.log(r) if r > 0 else 0.0
            else:
                M[i, j] = 1.0 / (1.0 + (gamma * r) ** 2)
        M[i, ell:] = Y[i]
        M[ell:, i] = Y[i]
    sol = np.linalg.solve(M, np.concatenate([f, np.zeros(d)]))
    return sol[:ell], sol[ell:]


def oracle_eval(kind, Y, c, lam, x):
    out = float(np.dot(lam, x))
    for yi, ci in zip(Y, c):
        r = math.dist(x, yi)
        phi = (r * r * math.log(r) if r > 0 else 0.0) if kind == "tps" else 1.0 / (1.0 + (16.0 * r) ** 2)
        out += ci * phi
    return out


# kernels ----------------------------------------------------------------------


def test_kernel_spot_values():
    assert kernel_eval(TPS, [0.0], [1.0]) == 0.0
    assert kernel_eval(TPS, [0.0, 0.0], [0.0, 0.0]) == 0.0
    assert kernel_eval(IMQ, [0.3], [0.3]) == 1.0
    assert kernel_eval(IMQ, [0.0], [1.0 / 16.0]) == 0.5
    assert kernel_eval(TPS, [0.0], [2.0]) == pytest.approx(4 * math.log(2), rel=1e-15)
    with pytest.raises(ValueError):
        kernel_eval(TPS, [0.0], [0.0, 1.0])


def test_kernel_spec_validation():
    assert KernelSpec("thin-plate-spline").kind == "tps"
    assert KernelSpec("inverse-multiquadric").kind == "imq"
    with pytest.raises(ValueError):
        KernelSpec("gauss")
    with pytest.raises(ValueError):
        KernelSpec("imq", 0.0)


@settings(max_examples=100, deadline=None)
@given(r=st.floats(0.0, 1e3))
def test_imq_range(r):
    v = float(kernel_values(IMQ, r))
    assert 0.0 < v <= 1.0 or (r > 1e150 and v == 0.0)


def test_kernel_matrix_symmetric():
    rng = np.random.default_rng(0)
    Y = rng.uniform(0, 1, (12, 3))
    for k in (TPS, IMQ):
        M = saddle_matrix(k, Y)
        R = M[:12, :12]
        assert np.abs(R - R.T).max() == 0.0
        assert np.abs(M - M.T).max() == 0.0


# scaler -----------------------------------------------------------------------


def test_scaler_linear_and_log_axes():
    X = np.array([[1.0, 2.0], [1e4, 4.0], [100.0, 3.0]])
    sc = Scaler.fit(X)
    np.testing.assert_array_equal(sc.log, [True, False])
    np.testing.assert_allclose(sc.transform(X), [[0.0, 0.0], [1.0, 1.0], [0.5, 0.5]], atol=1e-15)
    with pytest.raises(ValueError):
        sc.transform([[1.0]])
    assert Scaler.from_dict(json.loads(json.dumps(sc.to_dict()))).transform(X).tolist() == sc.transform(X).tolist()


def test_scaler_degenerate_axis_maps_to_zero():
    sc = Scaler.fit([[1.0, 5.0], [2.0, 5.0]])
    np.testing.assert_array_equal(sc.transform([[1.5, 5.0]]), [[0.5, 0.0]])


# fit and eval -----------------------------------------------------------------


def test_fit_1d_linear_example():
    g = fit([[0.0], [0.5], [1.0]], [0.0, 0.5, 1.0], TPS)
    np.testing.assert_allclose(g.eval([[0.0], [0.5], [1.0]]), [0.0, 0.5, 1.0], rtol=0, atol=1e-10)
    c, lam = oracle_coefficients("tps", np.array([[0.0], [0.5], [1.0]]), np.array([0.0, 0.5, 1.0]))
    for x in (0.25, 0.75):
        assert g.eval([x]) == pytest.approx(oracle_eval("tps", np.array([[0.0], [0.5], [1.0]]), c, lam, [x]), abs=1e-10)


def test_fit_2d_saddle_oracle():
    rng = np.random.default_rng(1)
    X = rng.uniform(0, 1, (5, 2))
    f = X[:, 0] * X[:, 1]
    g = fit(X, f, TPS, scaler=identity_scaler(2))
    c, lam = oracle_coefficients("tps", X, f)
    np.testing.assert_allclose(g.c, c, rtol=0, atol=1e-9 * np.abs(c).max())
    np.testing.assert_allclose(g.lam, lam, rtol=0, atol=1e-9 * np.abs(lam).max())
    assert not g.least_squares


def test_tail_has_one_column_per_dimension():
    rng = np.random.default_rng(2)
    X = rng.uniform(0, 1, (6, 3))
    g = fit(X, rng.uniform(size=6), TPS)
    assert g.lam.shape == (3,)
    P = saddle_matrix(TPS, g.centers)[:6, 6:]
    assert P.shape == (6, 3)
    assert fit(X, rng.uniform(size=6), TPS, constant=True).lam.shape == (4,)


def test_constant_data():
    X = [[0.0], [0.3], [1.0]]
    for k in (TPS, IMQ):
        g = fit(X, [1.0, 1.0, 1.0], k)
        np.testing.assert_allclose(g.eval(X), 1.0, rtol=1e-10)


def test_fit_errors():
    with pytest.raises(ValueError):
        fit([[0.0], [0.0], [1.0]], [1.0, 2.0, 3.0], TPS)
    with pytest.raises(ValueError):
        fit([[0.0, 0.0], [1.0, 1.0]], [1.0, 2.0], TPS)
    with pytest.raises(ValueError):
        fit([[0.0], [1.0]], [1.0], TPS)


def test_singular_saddle_falls_back_to_least_squares():
    # second coordinate constant: its tail column vanishes after scaling
    g = fit([[0.0, 5.0], [0.5, 5.0], [1.0, 5.0]], [1.0, 2.0, 0.5], TPS)
    assert g.least_squares
    assert np.all(np.isfinite(g.eval([[0.25, 5.0]])))


def test_log_target_reproduces_values():
    X = [[0.0], [0.4], [0.7], [1.0]]
    f = [1e-8, 1e-3, 2e-5, 0.3]
    g = fit(X, f, TPS, log_target=True)
    np.testing.assert_allclose(g.eval(X), f, rtol=1e-8)


def test_serialization_round_trip():
    rng = np.random.default_rng(3)
    X = separated_centers(rng, 8, 2) * [1e4, 3.0] + [1.0, 0.0]
    g = fit(X, rng.uniform(size=8), IMQ)
    back = RbfSurrogate.from_dict(json.loads(json.dumps(g.to_dict())))
    Q = rng.uniform(0, 1, (20, 2)) * [1e4, 3.0] + [1.0, 0.0]
    np.testing.assert_array_equal(back.eval(Q), g.eval(Q))
    assert back.kernel == g.kernel


@settings(max_examples=120, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), kind=st.sampled_from(["tps", "imq"]), d=st.sampled_from([1, 2, 4]))
def test_interpolation_exact_at_centers(seed, kind, d):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(d + 2, {1: 9, 2: 16, 4: 25}[d]))
    X = separated_centers(rng, n, d)
    f = rng.uniform(0, 1, n) * 10.0 ** rng.uniform(-6, 2)
    g = fit(X, f, KernelSpec(kind))
    assert np.abs(g.eval(X) - f).max() <= 1e-8 * np.abs(f).max()


# candidate selection ----------------------------------------------------------


def _line_surrogate(values):
    X = np.linspace(0, 1, len(values))[:, None]
    return fit(X, values, TPS), X


def test_top_candidate_unique_max():
    g, X = _line_surrogate([0.1, 0.2, 0.9, 0.3, 0.1])
    assert top_candidates(g, X).tolist() == [2]


def test_top_candidates_ties_take_lowest_index():
    g, X = _line_surrogate([1.0, 1.0, 1.0])
    X5 = np.full((5, 1), 0.5)
    assert top_candidates(g, X5, k=2).tolist() == [0, 1]
    assert top_candidates(g, X5, exclude={0}, k=1).tolist() == [1]


def test_top_candidates_sort_oracle():
    rng = np.random.default_rng(4)
    g = fit(separated_centers(rng, 6, 2), rng.uniform(size=6), TPS)
    fine = rng.uniform(0, 1, (20, 2))
    vals = g.eval(fine)
    exclude = {3, 11}
    ref = sorted((i for i in range(20) if i not in exclude), key=lambda i: (-vals[i], i))[:3]
    assert top_candidates(g, fine, exclude, k=3).tolist() == ref


def test_top_candidates_exhaustion_and_errors():
    g, X = _line_surrogate([0.1, 0.5, 0.2])
    assert top_candidates(g, X, exclude=[0, 1], k=5).tolist() == [2]
    assert top_candidates(g, X, exclude=[0, 1, 2], k=1).tolist() == []
    with pytest.raises(ValueError):
        top_candidates(g, np.zeros((0, 1)))
    with pytest.raises(ValueError):
        top_candidates(g, X, k=0)


def test_top_candidates_max_over_surrogates():
    X = np.linspace(0, 1, 5)[:, None]
    g1 = fit(X, [0.0, 0.1, 0.2, 0.1, 0.0], TPS)
    g2 = fit(X, [0.0, 0.0, 0.0, 0.0, 0.5], TPS)
    assert top_candidates([g1, g2], X).tolist() == [4]


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10_000), scale=st.floats(1e-6, 1e6))
def test_selection_invariant_under_value_scaling(seed, scale):
    rng = np.random.default_rng(seed)
    X = separated_centers(rng, 7, 2)
    f = rng.uniform(size=7)
    fine = rng.uniform(0, 1, (30, 2))
    a, b = fit(X, f, TPS), fit(X, scale * f, TPS)
    np.testing.assert_allclose(b.eval(fine), scale * a.eval(fine), rtol=1e-8, atol=1e-12 * scale)
    va = a.eval(fine)
    gap = np.sort(va)[-1] - np.sort(va)[-2]
    if gap > 1e-6 * np.abs(va).max():
        assert top_candidates(a, fine).tolist() == top_candidates(b, fine).tolist()
