"""Per-leaf oriented, anisotropically scaled SDF lattices."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import quantize as qz
from .forest import Forest, leaf_members

MAX_SCALE = 0.1
MIN_SCALE = 1e-4
JACOBI_MAX_ITER = 50
JACOBI_TOL = 1e-10

MODES = ("full", "normals-hist", "normals", "vanilla", "no-adaptive")


def jacobi_eigh(A, max_iter: int = JACOBI_MAX_ITER, tol: float = JACOBI_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a symmetric 3x3 matrix by classical Jacobi rotations.

    Each step annihilates the largest off-diagonal entry. Returns eigenvalues in
    descending order and the matching eigenvectors as columns.
    """
    A = np.array(A, dtype=np.float64)
    n = A.shape[0]
    V = np.eye(n)
    iu = np.triu_indices(n, 1)
    for _ in range(max_iter):
        off = np.abs(A[iu])
        k = int(np.argmax(off))
        if off[k] < tol:
            break
        p, q = iu[0][k], iu[1][k]
        tau = (A[q, q] - A[p, p]) / (2.0 * A[p, q])
        t = (1.0 if tau >= 0 else -1.0) / (abs(tau) + np.sqrt(1.0 + tau * tau))
        c = 1.0 / np.sqrt(1.0 + t * t)
        s = t * c
        J = np.eye(n)
        J[p, p] = J[q, q] = c
        J[p, q] = s
        J[q, p] = -s
        A = J.T @ A @ J
        V = V @ J
    w = np.diag(A).copy()
    order = np.argsort(-w, kind="stable")
    return w[order], V[:, order]


def pca_orientation(normals) -> np.ndarray:
    """Right-handed frame whose columns are the principal directions of the normals.

    Uses the uncentered second-moment matrix so a patch with identical normals
    still gets that normal as its first axis.
    """
    n = np.asarray(normals, dtype=np.float64).reshape(-1, 3)
    if len(n) == 0:
        raise ValueError("need at least one normal")
    _, O = jacobi_eigh(n.T @ n / len(n))
    if np.linalg.det(O) < 0:
        O[:, 2] = -O[:, 2]
    return O


def initial_box(points, O, min_scale=MIN_SCALE, max_scale: float = MAX_SCALE) -> tuple[np.ndarray, np.ndarray]:
    """Center and half-extents of the points' bounding box in the frame ``O``."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    local = pts @ O
    lo, hi = local.min(axis=0), local.max(axis=0)
    center = O @ ((lo + hi) / 2.0)
    scale = np.clip((hi - lo) / 2.0, min_scale, max_scale)
    return center, scale


def histogram_peak(values, n_bins: int) -> float:
    """Center of the fullest bin of ``values`` over [0, 1]; ties go to the innermost bin."""
    counts, _ = np.histogram(np.clip(values, 0.0, 1.0), bins=n_bins, range=(0.0, 1.0))
    return (int(np.argmax(counts)) + 0.5) / n_bins


def peak_lattice_index(c: float, m: int) -> int:
    """Largest integer ``I >= 0`` with ``2 I / m < c``."""
    i = int(np.ceil(c * m / 2.0)) - 1
    while i > 0 and 2.0 * i / m >= c:
        i -= 1
    while 2.0 * (i + 1) / m < c:
        i += 1
    return max(i, 0)


def histogram_rescale(
    axis, scale: float, center, points, m: int, n_bins: int | None = None,
    min_scale: float = MIN_SCALE, max_scale: float = MAX_SCALE,
) -> float:
    """Grow one half-axis so a lattice fraction lands on the densest projected-distance bin."""
    n_bins = 2 * m if n_bins is None else n_bins
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if len(pts) == 0:
        return scale
    dist = np.abs((pts - center) @ np.asarray(axis, dtype=np.float64)) / scale
    c = histogram_peak(dist, n_bins)
    i_g = peak_lattice_index(c, m)
    if i_g > 0:
        scale = scale * (m * c) / (2.0 * i_g)
    return float(np.clip(scale, min_scale, max_scale))


def lattice_unit(m: int) -> np.ndarray:
    if m < 2:
        raise ValueError("grid resolution must be >= 2 for trilinear interpolation")
    return -1.0 + 2.0 * np.arange(m) / (m - 1)


def lattice_positions(center, rotation, scale, m: int) -> np.ndarray:
    """World positions of the ``m**3`` lattice nodes, shape ``(..., m, m, m, 3)``."""
    u = lattice_unit(m)
    uk = np.stack(np.meshgrid(u, u, u, indexing="ij"), axis=-1)  # (m, m, m, 3)
    center = np.asarray(center, dtype=np.float64)
    rotation = np.asarray(rotation, dtype=np.float64)
    scale = np.asarray(scale, dtype=np.float64)
    local = uk * scale[..., None, None, None, :]
    return center[..., None, None, None, :] + np.einsum("...ij,...abcj->...abci", rotation, local)


def init_grid_values(center, rotation, scale, m: int, oracle) -> np.ndarray:
    pos = lattice_positions(center, rotation, scale, m)
    return oracle.truncated_sdf(pos.reshape(-1, 3)).reshape(pos.shape[:-1])


@dataclass(eq=False)
class GridGeometry:
    """Placement of every extracted grid plus its quantization codes (if any)."""

    leaf_index: np.ndarray  # (G,)
    centers: np.ndarray  # (G, 3)
    rotations: np.ndarray  # (G, 3, 3)
    scales: np.ndarray  # (G, 3)
    euler_codes: np.ndarray | None = None
    center_codes: np.ndarray | None = None
    scale_codes: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.leaf_index)


def quantize_geometry(geom: GridGeometry) -> GridGeometry:
    """Snap rotations, centers and scales to their 8-bit / pi/60 codes."""
    e = qz.quantize_rotation(geom.rotations).reshape(-1, 3)
    c = qz.quantize(geom.centers, *qz.CENTER_RANGE).reshape(-1, 3)
    s = qz.quantize(geom.scales, *qz.SCALE_RANGE).reshape(-1, 3)
    # a zero scale code would collapse the grid
    s = np.maximum(s, 1)
    return GridGeometry(
        leaf_index=geom.leaf_index,
        centers=qz.dequantize(c, *qz.CENTER_RANGE).reshape(-1, 3),
        rotations=qz.dequantize_rotation(e).reshape(-1, 3, 3),
        scales=qz.dequantize(s, *qz.SCALE_RANGE).reshape(-1, 3),
        euler_codes=e.astype(np.uint8),
        center_codes=c.astype(np.uint8),
        scale_codes=s.astype(np.uint8),
    )


def extract_geometry(
    forest: Forest,
    samples,
    m: int,
    mode: str = "full",
    n_bins: int | None = None,
    min_scale_ratio: float = 0.0,
) -> GridGeometry:
    """Place one grid in every non-empty leaf.

    ``mode`` selects the ablation level: ``no-adaptive`` fills the leaf voxel
    with an axis-aligned lattice, ``vanilla`` uses the axis-aligned bounding
    box of the leaf's samples, ``normals`` orients that box by PCA of the
    sample normals and ``full``/``normals-hist`` additionally rescales each
    axis from the projected-distance histogram. Scales are floored at
    ``max(MIN_SCALE, min_scale_ratio * leaf_half_extent)``.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    lattice_unit(m)
    members = leaf_members(forest, samples.points)
    leaves = forest.leaves
    idx, centers, rotations, scales = [], [], [], []
    for leaf, mem in enumerate(members):
        if len(mem) == 0:
            continue
        half = leaves.half[leaf]
        floor = max(MIN_SCALE, min_scale_ratio * half)
        if mode == "no-adaptive":
            O = np.eye(3)
            p_g = leaves.centers[leaf].copy()
            s_g = np.clip(np.full(3, half), floor, MAX_SCALE)
        else:
            pts = samples.points[mem]
            O = np.eye(3) if mode == "vanilla" else pca_orientation(samples.normals[mem])
            p_g, s_g = initial_box(pts, O, floor)
            if mode in ("full", "normals-hist"):
                s_g = np.array(
                    [histogram_rescale(O[:, i], s_g[i], p_g, pts, m, n_bins, floor) for i in range(3)]
                )
        idx.append(leaf)
        centers.append(p_g)
        rotations.append(O)
        scales.append(s_g)
    return GridGeometry(
        leaf_index=np.asarray(idx, dtype=np.int64),
        centers=np.asarray(centers, dtype=np.float64).reshape(-1, 3),
        rotations=np.asarray(rotations, dtype=np.float64).reshape(-1, 3, 3),
        scales=np.asarray(scales, dtype=np.float64).reshape(-1, 3),
    )
