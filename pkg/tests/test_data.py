import numpy as np
import pytest

from sparse_mfpca.data import SparseDataset, check_sparse_sample
from sparse_mfpca.exceptions import AlignmentError, DomainError, InsufficientDataError


def test_check_sorts_and_copies():
    t, y = check_sparse_sample([([0.5, 0.1], [1.0, 2.0])])
    np.testing.assert_array_equal(t[0], [0.1, 0.5])
    np.testing.assert_array_equal(y[0], [2.0, 1.0])


@pytest.mark.parametrize("X,exc", [
    ([([0.1, 0.2], [1.0])], ValueError),
    ([([0.1], [np.nan])], ValueError),
    ([([1.5], [0.0])], DomainError),
    ([], InsufficientDataError),
    ([(0.1,)], ValueError),
])
def test_check_rejects(X, exc):
    with pytest.raises(exc):
        check_sparse_sample(X, domain=(0, 1))


def test_empty_subject_policy():
    X = [([], []), ([0.2], [1.0])]
    assert check_sparse_sample(X)[0][0].size == 0
    with pytest.raises(InsufficientDataError):
        check_sparse_sample(X, allow_empty=False)


def test_dataset_accessors_and_subset():
    ds = SparseDataset.from_samples(
        [[([0.1, 0.3], [1, 2]), ([0.2], [3])], [([0.5], [4]), ([0.6, 0.7], [5, 6])]],
        variables=["A", "B"], domains=[(0, 1), (0, 1)], subject_ids=["s1", "s2"],
    )
    assert ds.n_subjects == 2 and ds.n_variables == 2
    np.testing.assert_array_equal(ds.counts("B"), [1, 2])
    t, y = ds.pooled(0)
    np.testing.assert_array_equal(y, [1, 2, 3])
    sub = ds.subset(["s2"])
    assert sub.subject_ids == ["s2"] and sub.values[1][0].tolist() == [5, 6]
    with pytest.raises(AlignmentError):
        ds.subset(["nope"])


def test_misaligned_variables():
    with pytest.raises(AlignmentError):
        SparseDataset(["1", "2"], ["A"], [(0, 1)], [[np.array([0.1])]], [[np.array([1.0])]])
