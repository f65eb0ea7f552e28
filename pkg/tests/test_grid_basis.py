import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sparse_mfpca.exceptions import DomainError, IllConditionedBasisError
from sparse_mfpca.grid_basis import build_grid, eval_basis, gram_inv_sqrt, trapezoid_weights


def test_three_point_grid():
    g = build_grid((0, 1), 3)
    np.testing.assert_array_equal(g.points, [0, 0.5, 1])
    np.testing.assert_array_equal(g.weights, [0.25, 0.5, 0.25])


def test_two_point_trapezoid_integrates_constant_exactly():
    # build_grid requires H >= 3; the two-point rule itself is still exact for constants
    w = trapezoid_weights([0.0, 1.0])
    assert w.sum() == 1.0


@pytest.mark.parametrize("H,domain", [(2, (0, 1)), (101, (1, 1)), (101, (2, 1))])
def test_build_grid_rejects_bad_input(H, domain):
    with pytest.raises(ValueError):
        build_grid(domain, H)


def test_integrates_t_squared():
    g = build_grid((0, 1), 101)
    assert abs(g.integrate(g.points**2) - 1 / 3) < 1e-4


@given(a=st.floats(-5, 5), length=st.floats(0.1, 10), H=st.integers(3, 400))
@settings(max_examples=50, deadline=None)
def test_weights_sum_to_length(a, length, H):
    g = build_grid((a, a + length), H)
    assert g.weights.sum() == pytest.approx(length, rel=1e-12)
    assert np.all(g.weights > 0)


def test_fourier_single_constant():
    g = build_grid((0, 1), 11)
    b = eval_basis("fourier", 1, (0, 1), g)
    np.testing.assert_allclose(b.eval_matrix, 1.0)


def test_fourier_grid_gram_is_identity():
    g = build_grid((0, 1), 101)
    b = eval_basis("fourier", 7, (0, 1), g)
    np.testing.assert_allclose(b.gram, np.eye(7), atol=1e-14)
    np.testing.assert_allclose(b.grid_gram, np.eye(7), atol=1e-12)


def test_bspline_partition_of_unity(grid):
    b = eval_basis("bspline", 5, (0, 1), grid)
    np.testing.assert_allclose(b.eval_matrix.sum(axis=1), 1.0, atol=1e-14)
    np.testing.assert_allclose(b.evaluate([0.0, 0.37, 1.0]).sum(axis=1), 1.0, atol=1e-14)


def test_bspline_gram_matches_fine_quadrature():
    b = eval_basis("bspline", 6, (0, 1), build_grid((0, 1), 200))
    fine = build_grid((0, 1), 20000)
    B = b.evaluate(fine.points)
    brute = (B * fine.weights[:, None]).T @ B
    np.testing.assert_allclose(b.gram, brute, atol=1e-6)


def test_gram_inv_sqrt_identity_and_diagonal():
    np.testing.assert_allclose(gram_inv_sqrt(np.eye(3)), np.eye(3))
    np.testing.assert_allclose(gram_inv_sqrt(np.diag([4.0, 9.0])), np.diag([0.5, 1 / 3]))


def test_gram_inv_sqrt_random_spd():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((5, 5))
    A = X @ X.T + 0.5 * np.eye(5)
    R = gram_inv_sqrt(A)
    np.testing.assert_allclose(R, R.T, atol=1e-14)
    np.testing.assert_allclose(R @ A @ R, np.eye(5), atol=1e-8)
    np.testing.assert_allclose(R @ R @ A, np.eye(5), atol=1e-8)


def test_gram_inv_sqrt_singular():
    with pytest.raises(IllConditionedBasisError):
        gram_inv_sqrt(np.array([[1.0, 1.0], [1.0, 1.0]]))


def test_basis_gram_root_property(bspline6):
    R = bspline6.gram_inv_sqrt
    np.testing.assert_allclose(R @ bspline6.gram @ R, np.eye(6), atol=1e-8)


def test_too_many_basis_functions():
    g = build_grid((0, 1), 5)
    with pytest.raises(IllConditionedBasisError):
        eval_basis("bspline", 8, (0, 1), g)


def test_evaluate_outside_domain(bspline6):
    with pytest.raises(DomainError):
        bspline6.evaluate([1.5])


def test_unknown_kind(grid):
    with pytest.raises(ValueError):
        eval_basis("wavelet", 5, (0, 1), grid)
