import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import central_difference, classical_gram_schmidt
from sparse_mfpca.exceptions import RankDeficiencyError
from sparse_mfpca.grid_basis import build_grid, eval_basis
from sparse_mfpca.orthonorm import (
    continuous_representation,
    mgs_qr,
    mgs_qr_backward,
    weighted_mgs,
)


def test_fixed_point_on_orthonormal_input():
    g = build_grid((0, 1), 101)
    b = eval_basis("fourier", 3, (0, 1), g)
    raw = b.eval_matrix.copy()
    raw[:, 1] *= np.sign(raw[np.flatnonzero(np.abs(raw[:, 1]) > 1e-8)[0], 1])
    out = weighted_mgs(raw, g)
    np.testing.assert_allclose(out.values, raw, atol=1e-12)


def test_constant_column_normalizes_to_one():
    g = build_grid((0, 1), 51)
    out = weighted_mgs(np.full((51, 1), 3.0), g)
    np.testing.assert_allclose(out.values, 1.0, atol=1e-14)


def test_two_step_hand_case():
    g = build_grid((0, 1), 3)
    raw = np.column_stack([np.ones(3), g.points])
    out = weighted_mgs(raw, g)
    expected = (g.points - 0.5) / np.sqrt(0.125)
    # sign convention: first entry above 1e-8 positive
    expected = expected * np.sign(expected[0])
    np.testing.assert_allclose(out.values[:, 1], expected, atol=1e-14)


def test_matches_classical_gram_schmidt_oracle():
    rng = np.random.default_rng(3)
    g = build_grid((0, 1), 41)
    raw = rng.standard_normal((41, 4))
    Q, R = mgs_qr(raw, g.weights)
    np.testing.assert_allclose(Q, classical_gram_schmidt(raw, g.weights), atol=1e-10)
    np.testing.assert_allclose(Q @ R, raw, atol=1e-12)
    assert np.all(np.diag(R) > 0)


@given(seed=st.integers(0, 2**32 - 1), M=st.integers(1, 5))
@settings(max_examples=40, deadline=None)
def test_orthonormality_property(seed, M):
    rng = np.random.default_rng(seed)
    g = build_grid((0, 2), 61)
    out = weighted_mgs(rng.standard_normal((61, M)), g)
    np.testing.assert_allclose(out.gram(), np.eye(M), atol=1e-8)


def test_rank_deficiency():
    g = build_grid((0, 1), 21)
    raw = np.column_stack([g.points, 2 * g.points])
    with pytest.raises(RankDeficiencyError):
        weighted_mgs(raw, g)


def test_backward_matches_finite_differences():
    rng = np.random.default_rng(7)
    g = build_grid((0, 1), 31)
    raw = rng.standard_normal((31, 3))
    Qbar = rng.standard_normal((31, 3))

    def f(x):
        Q, _ = mgs_qr(x.reshape(31, 3), g.weights)
        return float(np.sum(Q * Qbar))

    Q, R = mgs_qr(raw, g.weights)
    analytic = mgs_qr_backward(Q, R, Qbar, g.weights).ravel()
    numeric = central_difference(f, raw.ravel(), h=1e-6)
    np.testing.assert_allclose(analytic, numeric, rtol=1e-6, atol=1e-7)


def test_continuous_representation_interpolates_grid():
    rng = np.random.default_rng(1)
    g = build_grid((0, 1), 101)
    b = eval_basis("bspline", 8, (0, 1), g)
    oset = continuous_representation(weighted_mgs(b.eval_matrix @ rng.standard_normal((8, 3)), g), b)
    np.testing.assert_allclose(oset(g.points), oset.values, atol=1e-10)


def test_fourier_self_representation():
    g = build_grid((0, 1), 101)
    b = eval_basis("fourier", 5, (0, 1), g)
    oset = continuous_representation(weighted_mgs(b.eval_matrix, g), b)
    A = oset.basis_coefficients()
    np.testing.assert_allclose(np.abs(A), np.eye(5), atol=1e-8)


def test_dense_grid_agreement_off_grid():
    beta = np.random.default_rng(2).standard_normal((7, 2))
    t = np.random.default_rng(3).uniform(0, 1, 1000)
    vals = []
    for H in (101, 10001):
        g = build_grid((0, 1), H)
        b = eval_basis("bspline", 7, (0, 1), g)
        oset = continuous_representation(weighted_mgs(b.eval_matrix @ beta, g), b)
        vals.append(oset(t))
    assert np.max(np.abs(vals[0] - vals[1])) < 1e-3
