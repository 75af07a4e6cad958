"""Octree forest over the surface: root voxels from FPS clusters, overlapping subdivision."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial import cKDTree

MIN_ROOT_SCALE = 1e-4
PARENT_PLACEHOLDER = 0xFFFFFFFF
SIBLING_PLACEHOLDER = 0xFF

# octant offsets: bit 0 -> x, bit 1 -> y, bit 2 -> z; a clear bit is the negative side
OCTANTS = np.array([[1 if (b >> k) & 1 else -1 for k in range(3)] for b in range(8)], dtype=np.float64)


@dataclass(frozen=True, eq=False)
class RootVoxel:
    p: np.ndarray
    s: float


@dataclass(frozen=True, eq=False)
class NodeLevel:
    """All nodes of one tree level, dense and ordered by (parent, sibling)."""

    centers: np.ndarray  # (n, 3)
    half: np.ndarray  # (n,)
    parent: np.ndarray  # (n,) uint32, placeholder at level 0
    sibling: np.ndarray  # (n,) uint8, placeholder at level 0

    def __len__(self) -> int:
        return len(self.half)


@dataclass(eq=False)
class Forest:
    root_centers: np.ndarray
    root_scales: np.ndarray
    alpha: float
    depth: int
    levels: list[NodeLevel]
    nonempty: np.ndarray | None = None

    @property
    def n_roots(self) -> int:
        return len(self.root_scales)

    @property
    def leaves(self) -> NodeLevel:
        return self.levels[-1]

    @property
    def n_leaves(self) -> int:
        return len(self.leaves)

    @property
    def roots(self) -> list[RootVoxel]:
        return [RootVoxel(p, float(s)) for p, s in zip(self.root_centers, self.root_scales)]

    def occupancy(self) -> float:
        if self.nonempty is None or self.n_leaves == 0:
            return 0.0
        return float(self.nonempty.mean())


def farthest_point_sampling(points: np.ndarray, n: int, initial_index: int = 0) -> np.ndarray:
    """Greedy max-min selection of ``n`` indices starting at ``initial_index``.

    Ties go to the smallest index. Raises ``ValueError`` if ``n`` exceeds the
    number of points.
    """
    points = np.asarray(getattr(points, "points", points), dtype=np.float64)
    total = len(points)
    if n > total:
        raise ValueError(f"cannot select {n} points out of {total}")
    if not 0 <= initial_index < total:
        raise ValueError(f"initial index {initial_index} out of range")
    chosen = np.empty(n, dtype=np.int64)
    if n == 0:
        return chosen
    chosen[0] = initial_index
    dist = np.sum((points - points[initial_index]) ** 2, axis=1)
    for k in range(1, n):
        nxt = int(np.argmax(dist))
        chosen[k] = nxt
        np.minimum(dist, np.sum((points - points[nxt]) ** 2, axis=1), out=dist)
    return chosen


def assign_clusters(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Index of the nearest center (Euclidean) for every point."""
    _, idx = cKDTree(centers).query(points, k=1)
    return np.asarray(idx, dtype=np.int64)


def init_roots(samples, n_roots: int, initial_index: int = 0) -> list[RootVoxel]:
    """Root voxels centered on FPS picks, scaled to the infinity radius of their clusters.

    Scales are raw cluster radii; a single-point cluster has ``s = 0`` and it
    is up to the caller to apply :data:`MIN_ROOT_SCALE`.
    """
    if n_roots < 1:
        raise ValueError("n_roots must be >= 1")
    points = np.asarray(getattr(samples, "points", samples), dtype=np.float64)
    idx = farthest_point_sampling(points, n_roots, initial_index)
    centers = points[idx]
    label = assign_clusters(points, centers)
    radius = np.abs(points - centers[label]).max(axis=1)
    scales = np.zeros(n_roots)
    np.maximum.at(scales, label, radius)
    return [RootVoxel(c.copy(), float(s)) for c, s in zip(centers, scales)]


def subdivide(roots, alpha: float, depth: int) -> Forest:
    """Expand every root into ``depth`` levels of 8 overlapping children.

    A child sits at ``parent_center +- parent_half / 2`` per axis and has half
    extent ``parent_half * (1 + alpha) / 2``.
    """
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if isinstance(roots, tuple):
        centers, scales = roots
    else:
        centers = np.array([r.p for r in roots], dtype=np.float64).reshape(-1, 3)
        scales = np.array([r.s for r in roots], dtype=np.float64)
    n = len(scales)
    levels = [
        NodeLevel(
            centers=np.asarray(centers, dtype=np.float64),
            half=np.asarray(scales, dtype=np.float64),
            parent=np.full(n, PARENT_PLACEHOLDER, dtype=np.uint32),
            sibling=np.full(n, SIBLING_PLACEHOLDER, dtype=np.uint8),
        )
    ]
    for _ in range(depth):
        prev = levels[-1]
        c = prev.centers[:, None, :] + 0.5 * prev.half[:, None, None] * OCTANTS[None]
        levels.append(
            NodeLevel(
                centers=c.reshape(-1, 3),
                half=np.repeat(prev.half * (1.0 + alpha) / 2.0, 8),
                parent=np.repeat(np.arange(len(prev), dtype=np.uint32), 8),
                sibling=np.tile(np.arange(8, dtype=np.uint8), len(prev)),
            )
        )
    return Forest(
        root_centers=levels[0].centers, root_scales=levels[0].half, alpha=float(alpha), depth=depth, levels=levels
    )


def leaf_members(forest: Forest, points: np.ndarray) -> list[np.ndarray]:
    """Indices of the points inside each leaf's closed infinity ball."""
    points = np.asarray(getattr(points, "points", points), dtype=np.float64)
    leaves = forest.leaves
    tree = cKDTree(points)
    # the kd-tree radius test is closed but carries rounding; confirm exactly
    hits = tree.query_ball_point(leaves.centers, leaves.half * (1 + 1e-12) + 1e-15, p=np.inf)
    out = []
    for c, h, idx in zip(leaves.centers, leaves.half, hits):
        idx = np.asarray(idx, dtype=np.int64)
        if len(idx):
            idx = np.sort(idx[np.abs(points[idx] - c).max(axis=1) <= h])
        out.append(idx)
    return out


def classify_nonempty(forest: Forest, samples) -> Forest:
    """Flag leaves whose (expanded) infinity ball contains at least one sample."""
    members = leaf_members(forest, samples)
    return replace(forest, nonempty=np.array([len(m) > 0 for m in members], dtype=bool))
