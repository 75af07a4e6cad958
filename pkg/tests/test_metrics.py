import numpy as np
import pytest

from gala.errors import MeshError
from gala.fitting import fit_gala
from gala.mesh import TriMesh, sample_surface_iid
from gala.metrics import chamfer, chamfer_points, evaluate, hausdorff, hausdorff_points
from gala.reconstruct import reconstruct
from gala.shapes import box


def test_identical_meshes_score_zero(sphere):
    assert chamfer(sphere, sphere, 5000, seed=4) == 0.0
    assert hausdorff(sphere, sphere, 5000, seed=4) == 0.0


def test_two_points():
    assert chamfer_points([[0, 0, 0]], [[1, 0, 0]]) == 2.0
    assert hausdorff_points([[0, 0, 0]], [[1, 0, 0]]) == 1.0


def test_outlier_sets_hausdorff(rng):
    a = rng.uniform(-0.1, 0.1, (500, 3))
    far = a[np.argmax(a[:, 0])] + [0.3, 0, 0]
    assert hausdorff_points(a, a) == 0.0
    assert hausdorff_points(a, np.vstack([a, far])) == pytest.approx(0.3)


def test_sphere_against_itself_with_other_seed(sphere):
    a = sample_surface_iid(sphere, 100_000, 1).points
    b = sample_surface_iid(sphere, 100_000, 2).points
    assert 0 < chamfer_points(a, b) < 1e-5


def test_symmetry(rng):
    a = rng.normal(size=(300, 3))
    b = rng.normal(size=(200, 3)) + 0.1
    assert chamfer_points(a, b) == pytest.approx(chamfer_points(b, a), rel=1e-15)
    assert hausdorff_points(a, b) == hausdorff_points(b, a)
    m1, m2 = box((0.2, 0.2, 0.2)), box((0.25, 0.2, 0.2))
    assert chamfer(m1, m2, 20_000) == pytest.approx(chamfer(m2, m1, 20_000), rel=1e-15)


def test_non_negative(rng):
    for _ in range(20):
        a, b = rng.normal(size=(2, 50, 3))
        assert chamfer_points(a, b) >= 0 and hausdorff_points(a, b) >= 0


def test_empty_inputs(sphere):
    empty = TriMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))
    with pytest.raises(MeshError):
        chamfer(sphere, empty)
    with pytest.raises(ValueError):
        chamfer_points(np.zeros((0, 3)), np.zeros((3, 3)))


def test_fitted_sphere_hausdorff_exceeds_root_chamfer(sphere, sphere_oracle, sphere_samples):
    rep, _ = fit_gala(sphere, n_roots=64, iterations=10, batch_size=4096, normalize=False,
                      samples=sphere_samples, oracle=sphere_oracle)
    e = evaluate(sphere, reconstruct(rep, 128), 50_000)
    assert e["hausdorff"] > np.sqrt(e["chamfer"])
    assert e["chamfer"] < 1e-4
