import doctest

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

import gala.estimator
from gala import GalaSDF
from gala.shapes import icosphere


@pytest.fixture(scope="module")
def est():
    return GalaSDF(n_roots=32, iterations=5, batch_size=2048).fit(icosphere(0.3, 3, center=(1.0, 2.0, 0.0)))


def test_params_round_trip():
    e = GalaSDF(n_roots=8, mode="vanilla")
    params = e.get_params()
    assert params["n_roots"] == 8 and params["mode"] == "vanilla"
    c = clone(e.set_params(alpha=0.1))
    assert c.get_params() == e.get_params() and not hasattr(c, "rep_")


def test_not_fitted():
    with pytest.raises(NotFittedError):
        GalaSDF().predict([[0.0, 0.0, 0.0]])


def test_predict_in_input_frame(est):
    center = np.array([1.0, 2.0, 0.0])
    d = est.predict(center + [[0.28, 0, 0], [0.3, 0, 0], [0.32, 0, 0], [0.0, 0, 0]])
    assert d[0] < 0 < d[2] and abs(d[1]) < 0.005
    assert d[0] == pytest.approx(-0.02, abs=0.005) and d[2] == pytest.approx(0.02, abs=0.005)
    # the deep interior is outside every grid and reads the truncation value
    assert d[3] == pytest.approx(0.1 * est.scale_)
    with pytest.raises(ValueError):
        est.predict([[0.0, 0.0]])


def test_reconstruct_in_input_frame(est):
    mesh = est.reconstruct(64)
    r = np.linalg.norm(mesh.vertices - [1.0, 2.0, 0.0], axis=1)
    assert mesh.n_triangles > 0 and np.abs(r - 0.3).max() < 0.03


def test_fitted_attributes(est, tmp_path):
    assert est.n_params_ == est.rep_.parameter_count() and est.n_grids_ == est.rep_.n_grids
    est.save(tmp_path / "e.gala")
    assert (tmp_path / "e.gala").stat().st_size > 0


def test_docstring_example():
    assert doctest.testmod(gala.estimator).failed == 0
