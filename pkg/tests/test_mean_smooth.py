import numpy as np
import pytest

from sparse_mfpca.data import SparseDataset
from sparse_mfpca.exceptions import InsufficientDataError, MissingModelError
from sparse_mfpca.grid_basis import build_grid, eval_basis
from sparse_mfpca.mean_smooth import MeanModel, center, fit_mean


@pytest.fixture
def fourier5():
    return eval_basis("fourier", 5, (0, 1), build_grid((0, 1), 101))


def test_zero_data_gives_zero_mean(fourier5):
    t = np.linspace(0, 1, 50)
    m = fit_mean(t, np.zeros(50), fourier5)
    np.testing.assert_array_equal(m.coeffs, 0.0)


def test_recovers_sine_mean(fourier5):
    t = np.random.default_rng(0).uniform(0, 1, 500)
    m = fit_mean(t, 5 * np.sin(2 * np.pi * t), fourier5)
    tau = fourier5.grid.points
    assert np.max(np.abs(m(tau) - 5 * np.sin(2 * np.pi * tau))) < 0.05


@pytest.mark.parametrize("kind", ["fourier", "bspline"])
def test_constant_recovery(kind):
    b = eval_basis(kind, 7, (0, 1), build_grid((0, 1), 101))
    t = np.random.default_rng(1).uniform(0, 1, 300)
    m = fit_mean(t, np.full(300, 2.5), b)
    np.testing.assert_allclose(m(b.grid.points), 2.5, atol=1e-6)


def test_too_few_distinct_times(fourier5):
    with pytest.raises(InsufficientDataError):
        fit_mean([0.1, 0.1, 0.2], [1.0, 2.0, 3.0], fourier5)


def _one_var_dataset(samples):
    return SparseDataset.from_samples([samples], variables=["A"], domains=[(0, 1)])


def test_center_with_zero_mean_is_identity(fourier5):
    ds = _one_var_dataset([(np.array([0.1, 0.5]), np.array([1.0, 2.0]))])
    out = center(ds, {"A": MeanModel.zero(fourier5)})
    np.testing.assert_array_equal(out.values[0][0], [1.0, 2.0])


def test_center_residuals(fourier5):
    mu = MeanModel(fourier5, np.array([1.0, 0.3, -0.2, 0.1, 0.0]), 0.0)
    t = np.array([0.2, 0.4, 0.9])
    ds = _one_var_dataset([(t, mu(t)), (t, mu(t) + 1)])
    out = center(ds, [mu])
    np.testing.assert_allclose(out.values[0][0], 0.0, atol=1e-14)
    np.testing.assert_allclose(out.values[0][1], 1.0, atol=1e-14)


def test_center_missing_variable(fourier5):
    ds = _one_var_dataset([(np.array([0.1]), np.array([1.0]))])
    with pytest.raises(MissingModelError):
        center(ds, {"B": MeanModel.zero(fourier5)})
