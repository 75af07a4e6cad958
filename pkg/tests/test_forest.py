import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gala.forest import (
    OCTANTS,
    PARENT_PLACEHOLDER,
    SIBLING_PLACEHOLDER,
    RootVoxel,
    assign_clusters,
    classify_nonempty,
    farthest_point_sampling,
    init_roots,
    leaf_members,
    subdivide,
)
from gala.mesh import SurfaceSamples, normalize_mesh, sample_surface
from gala.shapes import icosphere
from oracles import fps_reference


def test_fps_line():
    pts = np.array([[0.0, 0, 0], [1, 0, 0], [10, 0, 0]])
    assert list(farthest_point_sampling(pts, 2, 0)) == [0, 2]


def test_fps_full_permutation(rng):
    pts = rng.normal(size=(30, 3))
    idx = farthest_point_sampling(pts, 30, 4)
    assert sorted(idx) == list(range(30))
    assert idx[0] == 4


@pytest.mark.parametrize("first", [0, 17, 99])
def test_fps_matches_reference(rng, first):
    pts = rng.uniform(-1, 1, size=(100, 3))
    assert list(farthest_point_sampling(pts, 5, first)) == fps_reference(pts, 5, first)


def test_fps_ties_go_to_first_index():
    # the four corners of a square are equidistant from the center
    pts = np.array([[0.0, 0, 0], [1, 1, 0], [-1, 1, 0], [1, -1, 0], [-1, -1, 0]])
    assert list(farthest_point_sampling(pts, 2, 0)) == [0, 1]


def test_fps_errors():
    pts = np.zeros((3, 3))
    with pytest.raises(ValueError):
        farthest_point_sampling(pts, 4)
    with pytest.raises(ValueError):
        farthest_point_sampling(pts, 2, initial_index=3)


def test_assign_clusters_nearest(rng):
    pts = rng.normal(size=(200, 3))
    centers = pts[:7]
    lab = assign_clusters(pts, centers)
    brute = np.argmin(((pts[:, None] - centers[None]) ** 2).sum(-1), axis=1)
    np.testing.assert_array_equal(lab, brute)


def test_root_scale_pair():
    pts = np.array([[0.4, 0, 0], [-0.4, 0, 0]])
    (root,) = init_roots(pts, 1, 0)
    np.testing.assert_array_equal(root.p, [0.4, 0, 0])
    assert root.s == pytest.approx(0.8)


def test_coincident_samples_zero_scale():
    (root,) = init_roots(np.ones((5, 3)), 1)
    assert root.s == 0.0


def test_icosphere_root_coverage():
    mesh = normalize_mesh(icosphere(0.3, 3))
    s = sample_surface(mesh, 10_000, seed=2)
    roots = init_roots(s, 256)
    centers = np.array([r.p for r in roots])
    scales = np.array([r.s for r in roots])
    lab = assign_clusters(s.points, centers)
    assert np.all(np.abs(s.points - centers[lab]).max(axis=1) <= scales[lab])


def test_subdivide_alpha_zero():
    forest = subdivide([RootVoxel(np.zeros(3), 1.0)], alpha=0.0, depth=1)
    leaves = forest.leaves
    assert len(leaves) == 8
    np.testing.assert_allclose(np.abs(leaves.centers), 0.5)
    np.testing.assert_allclose(leaves.half, 0.5)
    # octant bits: bit 0 -> x, bit 1 -> y, bit 2 -> z, clear bit = negative
    np.testing.assert_array_equal(leaves.centers[0], [-0.5, -0.5, -0.5])
    np.testing.assert_array_equal(leaves.centers[1], [0.5, -0.5, -0.5])
    np.testing.assert_array_equal(leaves.centers[6], [-0.5, 0.5, 0.5])
    np.testing.assert_array_equal(leaves.parent, np.zeros(8))
    np.testing.assert_array_equal(leaves.sibling, np.arange(8))


def test_subdivide_overlap():
    forest = subdivide([RootVoxel(np.zeros(3), 1.0)], alpha=0.2, depth=1)
    leaves = forest.leaves
    np.testing.assert_allclose(leaves.half, 0.6)
    np.testing.assert_allclose(np.abs(leaves.centers), 0.5)
    # siblings 0 and 1 differ in x: [-1.1, 0.1] and [-0.1, 1.1]
    overlap = (leaves.centers[0, 0] + leaves.half[0]) - (leaves.centers[1, 0] - leaves.half[1])
    assert overlap == pytest.approx(0.2)


def test_level_zero_placeholders():
    forest = subdivide([RootVoxel(np.zeros(3), 1.0)] * 3, alpha=0.2, depth=2)
    root_level = forest.levels[0]
    assert np.all(root_level.parent == PARENT_PLACEHOLDER) and root_level.parent.dtype == np.uint32
    assert np.all(root_level.sibling == SIBLING_PLACEHOLDER) and root_level.sibling.dtype == np.uint8


def test_depth_two_leaf_count():
    roots = [RootVoxel(np.zeros(3), 0.1)] * 256
    forest = subdivide(roots, 0.2, 2)
    assert [len(level) for level in forest.levels] == [256, 2048, 16384]
    leaves = forest.leaves
    # dense, level-ordered indices: leaf i has parent i // 8 and sibling i % 8
    np.testing.assert_array_equal(leaves.parent, np.arange(16384) // 8)
    np.testing.assert_array_equal(leaves.sibling, np.arange(16384) % 8)


@settings(max_examples=40, deadline=None)
@given(
    st.floats(0.0, 0.5),
    st.integers(1, 3),
    st.floats(0.01, 2.0),
)
def test_child_geometry_rule(alpha, depth, s):
    forest = subdivide([RootVoxel(np.array([0.1, -0.2, 0.3]), s)], alpha, depth)
    for parent_level, child_level in zip(forest.levels[:-1], forest.levels[1:]):
        p = child_level.parent.astype(int)
        np.testing.assert_allclose(child_level.half, parent_level.half[p] * (1 + alpha) / 2)
        expect = parent_level.centers[p] + 0.5 * parent_level.half[p, None] * OCTANTS[child_level.sibling]
        np.testing.assert_allclose(child_level.centers, expect)


def test_alpha_zero_tiles_root(rng):
    forest = subdivide([RootVoxel(np.zeros(3), 1.0)], alpha=0.0, depth=2)
    leaves = forest.leaves
    pts = rng.uniform(-1, 1, size=(5000, 3))
    inside = np.abs(pts[:, None, :] - leaves.centers[None]).max(axis=2) <= leaves.half[None]
    # away from boundaries (measure zero) each point is in exactly one leaf
    assert np.all(inside.sum(axis=1) == 1)


def test_subdivide_errors():
    with pytest.raises(ValueError):
        subdivide([RootVoxel(np.zeros(3), 1.0)], -0.1, 1)
    with pytest.raises(ValueError):
        subdivide([RootVoxel(np.zeros(3), 1.0)], 0.2, 0)


def _samples(points):
    points = np.asarray(points, dtype=float)
    normals = np.tile([0.0, 0, 1], (len(points), 1))
    return SurfaceSamples(points, normals, np.zeros(len(points), dtype=np.int64))


def test_nonempty_boundary_is_closed():
    forest = subdivide([RootVoxel(np.zeros(3), 1.0)], alpha=0.0, depth=1)
    # (0.0, -0.5, -0.5) lies exactly on the shared face of leaves 0 and 1
    out = classify_nonempty(forest, _samples([[0.0, -0.5, -0.5]]))
    assert out.nonempty[0] and out.nonempty[1]
    assert out.nonempty.sum() == 2


def test_nonempty_far_leaf():
    forest = subdivide([RootVoxel(np.zeros(3), 1.0)], alpha=0.0, depth=1)
    out = classify_nonempty(forest, _samples([[0.5, 0.5, 0.5]]))
    assert out.nonempty.tolist() == [False] * 7 + [True]
    assert forest.nonempty is None  # input is untouched


def test_depth_one_is_always_full():
    # for alpha > 0 every child ball strictly contains its parent's center,
    # and a root center is itself a sample
    mesh = normalize_mesh(icosphere(0.3, 3))
    s = sample_surface(mesh, None, 0)
    roots = init_roots(s, 256)
    for alpha in (0.05, 0.2):
        forest = classify_nonempty(subdivide(roots, alpha, 1), s)
        assert forest.occupancy() == 1.0


def test_icosphere_partial_occupancy_at_depth_two():
    mesh = normalize_mesh(icosphere(0.3, 3))
    s = sample_surface(mesh, None, 0)
    roots = init_roots(s, 256)
    forest = classify_nonempty(subdivide(roots, 0.2, 2), s)
    assert 0.0 < forest.occupancy() < 1.0


def test_leaf_members_match_brute_force(rng):
    pts = rng.uniform(-0.5, 0.5, size=(800, 3))
    roots = [RootVoxel(c, 0.1) for c in rng.uniform(-0.4, 0.4, size=(10, 3))]
    forest = subdivide(roots, 0.2, 1)
    got = leaf_members(forest, pts)
    leaves = forest.leaves
    for i, members in enumerate(got):
        brute = np.flatnonzero(np.abs(pts - leaves.centers[i]).max(axis=1) <= leaves.half[i])
        np.testing.assert_array_equal(members, brute)


def test_forest_determinism():
    mesh = normalize_mesh(icosphere(0.3, 2))
    s = sample_surface(mesh, None, 3)
    a = subdivide(init_roots(s, 64, 5), 0.2, 1)
    b = subdivide(init_roots(s, 64, 5), 0.2, 1)
    assert a.leaves.centers.tobytes() == b.leaves.centers.tobytes()
