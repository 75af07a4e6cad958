"""Chamfer and Hausdorff distances between sampled surfaces."""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from .errors import MeshError
from .mesh import TriMesh, sample_surface_iid

DEFAULT_SAMPLES = 100_000


def _nn_dist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d, _ = cKDTree(b).query(a, k=1)
    return d


def chamfer_points(a, b) -> float:
    """Mean squared nearest-neighbour distance, summed over both directions."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 3)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 3)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("empty point cloud")
    return float(np.mean(_nn_dist(a, b) ** 2) + np.mean(_nn_dist(b, a) ** 2))


def hausdorff_points(a, b) -> float:
    a = np.asarray(a, dtype=np.float64).reshape(-1, 3)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 3)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("empty point cloud")
    return float(max(_nn_dist(a, b).max(), _nn_dist(b, a).max()))


def _samples(mesh: TriMesh, n: int, seed: int) -> np.ndarray:
    if mesh.n_triangles == 0:
        raise MeshError("cannot sample an empty mesh")
    return sample_surface_iid(mesh, n, seed).points


def chamfer(mesh_a: TriMesh, mesh_b: TriMesh, n_samples: int = DEFAULT_SAMPLES, seed: int = 0) -> float:
    """Squared-distance Chamfer distance between ``n_samples`` points on each mesh.

    Both meshes are sampled with the same seed, so identical meshes score 0.
    """
    return chamfer_points(_samples(mesh_a, n_samples, seed), _samples(mesh_b, n_samples, seed))


def hausdorff(mesh_a: TriMesh, mesh_b: TriMesh, n_samples: int = DEFAULT_SAMPLES, seed: int = 0) -> float:
    return hausdorff_points(_samples(mesh_a, n_samples, seed), _samples(mesh_b, n_samples, seed))


def evaluate(mesh_a: TriMesh, mesh_b: TriMesh, n_samples: int = DEFAULT_SAMPLES, seed: int = 0) -> dict[str, float]:
    """Both metrics from one shared pair of samplings."""
    a = _samples(mesh_a, n_samples, seed)
    b = _samples(mesh_b, n_samples, seed)
    return {"chamfer": chamfer_points(a, b), "hausdorff": hausdorff_points(a, b)}
