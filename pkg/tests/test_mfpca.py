import numpy as np
import pytest
from scipy.linalg import subspace_angles

from sparse_mfpca.exceptions import AlignmentError
from sparse_mfpca.estimators import MultivariateFPCA
from sparse_mfpca.grid_basis import build_grid, eval_basis
from sparse_mfpca.mfpca import (
    MultivariateModel,
    build_Z,
    combine,
    cumulative_variance_select,
    eigen_Z,
    elbow_select,
    mv_eigenfunctions,
    mv_scores,
    reconstruct_covariance,
    reconstruct_curves,
)
from sparse_mfpca.scoring import ScoreMatrix
from sparse_mfpca.simulation import generate, mean_function, scenario
from sparse_mfpca.ufpca import UnivariateParams, model_from_params


def _sm(values, var="V"):
    values = np.asarray(values, dtype=float)
    return ScoreMatrix(values, [str(i) for i in range(values.shape[0])], var)


def _toy_univariate(M, seed, U=5):
    rng = np.random.default_rng(seed)
    basis = eval_basis("fourier", U, (0, 1), build_grid((0, 1), 101))
    p = UnivariateParams(rng.standard_normal((U, M)), np.sort(rng.uniform(-1, 1, M))[::-1], -2.0)
    return model_from_params(p, basis, 0.0, 10)


# Z

def test_single_variable_z_is_sample_covariance():
    S = np.random.default_rng(0).standard_normal((30, 3))
    np.testing.assert_allclose(build_Z([_sm(S)]), np.cov(S, rowvar=False), atol=1e-14)


def test_independent_scores_have_small_cross_terms():
    rng = np.random.default_rng(1)
    Z = build_Z([_sm(rng.standard_normal((100_000, 2))), _sm(rng.standard_normal((100_000, 2)))])
    off = Z - np.diag(np.diag(Z))
    assert np.abs(off).max() < 0.03


def test_weighted_blocks():
    rng = np.random.default_rng(2)
    a, b = _sm(rng.standard_normal((20, 2))), _sm(rng.standard_normal((20, 3)))
    Z1, Z4 = build_Z([a, b]), build_Z([a, b], weights=[4, 1])
    np.testing.assert_allclose(Z4[:2, :2], 4 * Z1[:2, :2], rtol=1e-14)
    np.testing.assert_allclose(Z4[:2, 2:], 2 * Z1[:2, 2:], rtol=1e-14)
    np.testing.assert_allclose(Z4[2:, 2:], Z1[2:, 2:], rtol=1e-14)


def test_misaligned_subjects():
    a = _sm(np.zeros((3, 1)))
    b = ScoreMatrix(np.zeros((3, 1)), ["2", "1", "0"])
    with pytest.raises(AlignmentError):
        build_Z([a, b])


def test_bad_weights():
    with pytest.raises(ValueError):
        build_Z([_sm(np.zeros((3, 1)))], weights=[0.0])


def test_eigen_of_diagonal_and_2x2():
    d, V = eigen_Z(np.diag([3.0, 1.0]))
    np.testing.assert_allclose(d, [3, 1])
    np.testing.assert_allclose(np.abs(V), np.eye(2))
    d, V = eigen_Z(np.array([[2.0, 1.0], [1.0, 2.0]]))
    np.testing.assert_allclose(d, [3, 1], atol=1e-14)
    np.testing.assert_allclose(np.abs(V[:, 0]), [1 / np.sqrt(2)] * 2, atol=1e-14)
    np.testing.assert_allclose(np.abs(V[:, 1]), [1 / np.sqrt(2)] * 2, atol=1e-14)
    assert V[0, 1] * V[1, 1] < 0


def test_eigen_reconstructs_z():
    X = np.random.default_rng(3).standard_normal((6, 6))
    Z = X @ X.T
    d, V = eigen_Z(Z)
    np.testing.assert_allclose(V @ np.diag(d) @ V.T, Z, atol=1e-10)


# truncation

def test_elbow_examples():
    assert elbow_select([10, 9.5, 9, 8.5]) == 4
    assert elbow_select([10, 1, 0.9, 0.8]) == 2
    assert elbow_select([5, 5, 5]) == 3
    assert elbow_select([7.0]) == 1


def test_cumulative_variance():
    assert cumulative_variance_select([10, 9.5, 9, 8.5]) == 4
    assert cumulative_variance_select([9, 0.5, 0.5]) == 1
    assert cumulative_variance_select([8, 1, 1]) == 2
    assert cumulative_variance_select([0, 0]) == 1


def test_weight_rescaling_recomputes_selection():
    rng = np.random.default_rng(4)
    blocks = [_sm(rng.standard_normal((50, 2)) * [3, 1]), _sm(rng.standard_normal((50, 2)) * [2, 0.5])]
    unis = [_toy_univariate(2, 5), _toy_univariate(2, 6)]
    m1 = combine(unis, blocks)
    m2 = combine(unis, blocks, weights=[9, 1])
    assert m2.M == elbow_select(m2.eigenvalues)
    assert m1.M == elbow_select(m1.eigenvalues)


# eigenfunctions, scores, covariance

def _selector_model():
    unis = [_toy_univariate(2, 7), _toy_univariate(3, 8)]
    P = 5
    return MultivariateModel(unis, np.eye(P), np.arange(P, 0, -1.0), np.eye(P), P, np.ones(2), ["A", "B"],
                             [str(i) for i in range(4)])


def test_selector_eigenvector():
    model = _selector_model()
    t = [np.linspace(0, 1, 7)] * 2
    psi = mv_eigenfunctions(model, t)
    np.testing.assert_allclose(psi[0][:, 0], model.univariate[0].eigenfunctions(t[0])[:, 0], atol=1e-15)
    np.testing.assert_array_equal(psi[1][:, 0], 0.0)
    xi = [_sm(np.arange(8.0).reshape(4, 2)), _sm(np.arange(12.0).reshape(4, 3))]
    rho = mv_scores(model, xi)
    np.testing.assert_array_equal(rho[:, 0], xi[0].values[:, 0])
    np.testing.assert_array_equal(mv_scores(model, [_sm(np.zeros((4, 2))), _sm(np.zeros((4, 3)))]), 0.0)


def test_rank_one_covariance():
    model = _selector_model()
    model.M = 1
    model.eigenvalues = np.array([1.0, 0, 0, 0, 0])
    s = np.linspace(0, 1, 5)
    phi = model.univariate[0].eigenfunctions(s)[:, 0]
    np.testing.assert_allclose(reconstruct_covariance(model, 0, 0, s, s), np.outer(phi, phi), atol=1e-14)


@pytest.fixture(scope="module")
def fitted_n500():
    data, truth = generate(scenario(3, seed=11))
    means = [lambda t, k=k: mean_function(k, t) for k in (1, 2, 3)]
    est = MultivariateFPCA(n_basis=[8], n_components_univariate=[3], mean=means).fit(data)
    return est, data, truth


def _inner_H(model, a, b):
    """Weighted multivariate inner product on each variable's quadrature grid."""
    total = 0.0
    for k, u in enumerate(model.univariate):
        total += model.weights[k] * u.grid.inner(a[k], b[k])
    return total


@pytest.mark.parametrize("weights", [None, [2.0, 1.0, 0.5]])
def test_multivariate_orthonormality(fitted_n500, weights):
    est, _, _ = fitted_n500
    mv = combine(est.univariate_, est.model_.univariate_scores, weights=weights, n_components=9)
    grids = [u.grid.points for u in mv.univariate]
    psi = mv_eigenfunctions(mv, grids)
    np.testing.assert_allclose(_inner_H(mv, psi, psi), np.eye(mv.M), atol=1e-6)


def test_matches_discretized_operator_eigenproblem(fitted_n500):
    est, _, _ = fitted_n500
    mv = est.model_
    g = mv.univariate[0].grid
    tau = g.points
    P = mv.eigenvalues.size
    full = combine(mv.univariate, mv.univariate_scores, n_components=P)
    # assembled estimated covariance (all components), discretized operator W^1/2 C W^1/2
    C = full_cov = np.block([[reconstruct_covariance(full, k, k2, tau, tau) for k2 in range(3)] for k in range(3)])
    sw = np.sqrt(np.tile(g.weights, 3))
    vals, vecs = np.linalg.eigh(sw[:, None] * full_cov * sw[None, :])
    order = np.argsort(vals)[::-1][: mv.M]
    oracle = vecs[:, order] / sw[:, None]
    ours = np.vstack(mv_eigenfunctions(mv, [tau] * 3))
    angles = np.degrees(subspace_angles(sw[:, None] * ours, sw[:, None] * oracle))
    assert angles.max() < 5
    np.testing.assert_allclose(vals[order], mv.mv_eigenvalues, rtol=1e-8)
    assert C.shape == (3 * tau.size, 3 * tau.size)


def test_score_covariance_is_diagonal(fitted_n500):
    est, _, _ = fitted_n500
    mv = est.model_
    cov = np.cov(mv.scores, rowvar=False).reshape(mv.M, mv.M)
    np.testing.assert_allclose(np.diag(cov), mv.mv_eigenvalues, rtol=0.1)
    assert np.abs(cov - np.diag(np.diag(cov))).max() < 0.1 * mv.mv_eigenvalues[-1]


def test_covariance_symmetry(fitted_n500):
    est, _, _ = fitted_n500
    s, t = np.linspace(0, 1, 7), np.linspace(0, 1, 5)
    np.testing.assert_allclose(est.covariance(0, 2, s, t), est.covariance(2, 0, t, s).T, atol=1e-14)


def test_full_rank_reconstruction_equals_univariate_expansion(fitted_n500):
    est, _, _ = fitted_n500
    mv = est.model_
    P = mv.eigenvalues.size
    full = combine(mv.univariate, mv.univariate_scores, n_components=P)
    t = [np.linspace(0, 1, 30)] * 3
    curves = reconstruct_curves(full, t, centered=True)
    for k, u in enumerate(mv.univariate):
        direct = mv.univariate_scores[k].values @ u.eigenfunctions(t[k]).T
        np.testing.assert_allclose(curves[k], direct, atol=1e-8)


def test_zero_scores_reconstruct_mean(fitted_n500):
    est, _, _ = fitted_n500
    t = [np.linspace(0, 1, 11)] * 3
    curves = est.inverse_transform(np.zeros((2, est.n_components_)), t)
    for k in range(3):
        np.testing.assert_allclose(curves[k], np.tile(mean_function(k + 1, t[k]), (2, 1)), atol=1e-14)
