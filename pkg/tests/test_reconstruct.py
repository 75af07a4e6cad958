import numpy as np
import pytest

from gala.fitting import fit_gala
from gala.reconstruct import (
    flip_interior_signs,
    flip_slice,
    marching_cubes,
    reconstruct,
    sample_volume,
    volume_coordinates,
)
from gala.rep import GalaRep
from oracles import flip_slice_reference, sphere_sdf_volume

M = 5


def one_grid(center=(0.1, 0.0, -0.1), scale=(0.1, 0.05, 0.08), value=-0.03):
    return GalaRep(
        n_roots=1, alpha=0.2, grid_res=M, depth=1, n_hist=10,
        root_centers=np.zeros((1, 3)), root_scales=np.ones(1), leaf_index=np.array([0]),
        centers=np.array([center], dtype=float), rotations=np.eye(3)[None],
        scales=np.array([scale], dtype=float), values=np.full((1, M, M, M), value),
    )


def empty_rep():
    rep = one_grid()
    return GalaRep(**{**{k: getattr(rep, k) for k in rep.__dataclass_fields__},
                      "leaf_index": np.zeros(0, dtype=np.int64), "centers": np.zeros((0, 3)),
                      "rotations": np.zeros((0, 3, 3)), "scales": np.zeros((0, 3)),
                      "values": np.zeros((0, M, M, M))})


def test_volume_coordinates():
    x = volume_coordinates(5)
    np.testing.assert_array_equal(x, [-0.5, -0.25, 0, 0.25, 0.5])


def test_empty_rep_volume():
    vol = sample_volume(empty_rep(), 16)
    assert vol.shape == (16, 16, 16)
    assert np.all(vol == 0.1)


def test_single_grid_footprint():
    rep = one_grid()
    vol = sample_volume(rep, 41)
    x = volume_coordinates(41)
    X, Y, Z = np.meshgrid(x, x, x, indexing="ij")
    xi = np.abs(np.stack([X, Y, Z], -1) - rep.centers[0]) / rep.scales[0]
    r = xi.max(axis=-1)
    # points on the support boundary can land on either side by rounding
    assert np.all(vol[r > 1 + 1e-9] == 0.1)
    # the volume is stored in single precision
    assert np.all(vol[r < 1 - 1e-9] == np.float32(-0.03))
    assert set(np.unique(vol)) == {np.float32(-0.03), np.float32(0.1)}
    assert np.sum(r < 1 - 1e-9) > 0


def test_volume_matches_point_queries(small_rep):
    vol = sample_volume(small_rep, 24)
    x = volume_coordinates(24)
    pts = np.stack(np.meshgrid(x, x, x, indexing="ij"), -1).reshape(-1, 3)
    np.testing.assert_array_equal(vol.ravel(), small_rep.query(pts).astype(np.float32))


def test_resolution_floor():
    with pytest.raises(ValueError):
        sample_volume(empty_rep(), 7)


def test_flip_examples():
    S = np.full((6, 6), 0.1)
    np.testing.assert_array_equal(flip_slice(S), S)
    S = np.full((5, 5), -0.05)
    S[2, 2] = S[2, 1] = 0.1
    out = flip_slice(S)
    assert out[2, 2] == -0.1 and out[2, 1] == -0.1
    S[1, 3] = 0.05  # diagonal neighbors do not count
    assert flip_slice(S)[2, 2] == -0.1
    S[3, 2] = 0.05
    assert flip_slice(S)[2, 2] == 0.1


def test_flip_tolerance():
    S = np.full((3, 3), -0.05)
    S[1, 1] = 0.1 + 5e-7
    assert flip_slice(S)[1, 1] < 0
    S[1, 1] = 0.1 + 2e-6
    assert flip_slice(S)[1, 1] > 0


def _random_slice(rng):
    p = rng.dirichlet([1.0, 1.0, 1.0])
    return rng.choice([-0.05, 0.05, 0.1], size=(32, 32), p=p)


def test_flip_matches_labeling_oracle(rng):
    flipped = 0
    for _ in range(1000):
        S = _random_slice(rng)
        out = flip_slice(S)
        np.testing.assert_array_equal(out, flip_slice_reference(S))
        flipped += np.any(out != S)
    assert flipped > 50  # the sample exercises both branches


def test_flip_idempotent(rng):
    vol = rng.choice([-0.05, 0.05, 0.1], size=(12, 12, 12), p=[0.6, 0.05, 0.35])
    for mode in ("slices", "3d"):
        once = flip_interior_signs(vol, mode=mode)
        np.testing.assert_array_equal(flip_interior_signs(once, mode=mode), once)


def test_flip_uses_y_slices():
    vol = np.full((5, 5, 5), 0.1)
    vol[1:4, :, 1:4] = -0.05
    vol[2, :, 2] = 0.1  # a tube along y: enclosed in every y slice, open in 3D
    out = flip_interior_signs(vol)
    assert np.all(out[2, :, 2] == -0.1)
    assert np.all(flip_interior_signs(vol, mode="3d")[2, :, 2] == 0.1)
    with pytest.raises(ValueError):
        flip_interior_signs(vol, mode="x")


def test_flip_3d_enclosed_cavity():
    vol = np.full((7, 7, 7), 0.1)
    vol[1:6, 1:6, 1:6] = -0.05
    vol[2:5, 2:5, 2:5] = 0.1
    out = flip_interior_signs(vol, mode="3d")
    assert np.all(out[2:5, 2:5, 2:5] == -0.1)
    assert out[0, 0, 0] == 0.1


def test_all_positive_volume_is_empty():
    mesh = marching_cubes(np.full((10, 10, 10), 0.1))
    assert mesh.n_triangles == 0 and mesh.n_vertices == 0
    with pytest.raises(ValueError):
        marching_cubes(np.full((10, 10, 10), np.nan))


def test_analytic_sphere_mesh():
    r = 0.3
    mesh = marching_cubes(sphere_sdf_volume(64, r))
    assert mesh.face_areas.sum() == pytest.approx(4 * np.pi * r**2, rel=0.03)
    assert mesh.is_watertight()
    assert mesh.signed_volume() == pytest.approx(4 / 3 * np.pi * r**3, rel=0.03)
    radii = np.linalg.norm(mesh.vertices, axis=1)
    assert np.abs(radii - r).max() < 1 / 63


def test_sphere_fit_radius(sphere, sphere_oracle, sphere_samples):
    rep, _ = fit_gala(
        sphere, n_roots=128, iterations=20, batch_size=4096, normalize=False,
        samples=sphere_samples, oracle=sphere_oracle,
    )
    mesh = reconstruct(rep, 128)
    r_true = np.linalg.norm(sphere.vertices, axis=1).mean()
    radii = np.linalg.norm(mesh.vertices, axis=1)
    assert mesh.n_triangles > 0
    assert np.abs(radii - r_true).max() < 2 / 127


def _plate_triangles(mesh, top):
    if mesh.n_triangles == 0:
        return 0
    cy = mesh.vertices[mesh.triangles][:, :, 1].mean(axis=1)
    return int(np.sum(cy > top + 0.02))


@pytest.mark.slow
def test_thin_plate_survives_where_regular_grid_loses_it(shapes, fitted, fin_top):
    oracle = shapes("fin").oracle
    # plain regular grid of ground-truth samples at 32 per axis
    x = volume_coordinates(32)
    pts = np.stack(np.meshgrid(x, x, x, indexing="ij"), -1).reshape(-1, 3)
    coarse = marching_cubes(oracle.truncated_sdf(pts).reshape(32, 32, 32))
    assert coarse.n_triangles > 0
    assert _plate_triangles(coarse, fin_top) == 0
    assert _plate_triangles(fitted("fin").recon, fin_top) > 0
