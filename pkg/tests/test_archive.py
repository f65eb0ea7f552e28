import json

import numpy as np
import pytest

from sparse_mfpca.archive import FORMAT_VERSION, load_model, save_model, to_dict
from sparse_mfpca.estimators import MultivariateFPCA
from sparse_mfpca.exceptions import DataFormatError
from sparse_mfpca.simulation import generate, scenario


@pytest.fixture(scope="module")
def fitted():
    data, _ = generate(scenario(1, seed=8))
    return MultivariateFPCA(n_basis=[6, 7], n_components_univariate=[2, 3]).fit(data)


def test_round_trip_is_bit_exact(fitted, tmp_path):
    path = tmp_path / "m.json"
    save_model(fitted, path, {"seed": 0})
    back = load_model(path)
    assert to_dict(back, {"seed": 0}) == to_dict(fitted, {"seed": 0})
    t = [np.linspace(a, b, 37) for a, b in fitted.domains_]
    for a, b in zip(fitted.eigenfunctions(t), back.eigenfunctions(t)):
        np.testing.assert_array_equal(a, b)
    for k in range(3):
        np.testing.assert_array_equal(fitted.covariance(k, 0, t[k], t[0]), back.covariance(k, 0, t[k], t[0]))
        np.testing.assert_array_equal(fitted.univariate_estimators_[k].mean_(t[k]),
                                      back.univariate_estimators_[k].mean_(t[k]))
    np.testing.assert_array_equal(fitted.scores_, back.scores_)


def test_format_version_checked(fitted, tmp_path):
    d = to_dict(fitted)
    assert d["format_version"] == FORMAT_VERSION
    d["format_version"] = 99
    (tmp_path / "bad.json").write_text(json.dumps(d))
    with pytest.raises(DataFormatError):
        load_model(tmp_path / "bad.json")
    (tmp_path / "junk.json").write_text("not json")
    with pytest.raises(DataFormatError):
        load_model(tmp_path / "junk.json")
