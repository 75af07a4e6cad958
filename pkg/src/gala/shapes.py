"""Procedural watertight test meshes."""

from __future__ import annotations

import numpy as np

from .mesh import TriMesh


def subdivide_midpoint(mesh: TriMesh, levels: int = 1) -> TriMesh:
    """Split every triangle into four, sharing edge midpoints (stays watertight)."""
    verts = mesh.vertices
    tris = mesh.triangles
    for _ in range(levels):
        edges = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
        key = np.sort(edges, axis=1)
        uniq, inverse = np.unique(key, axis=0, return_inverse=True)
        mid = len(verts) + inverse.reshape(3, -1).T
        verts = np.concatenate([verts, 0.5 * (verts[uniq[:, 0]] + verts[uniq[:, 1]])])
        a, b, c = tris.T
        ab, bc, ca = mid.T
        tris = np.concatenate(
            [np.stack(t, axis=1) for t in ((a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca))]
        )
    return TriMesh(verts, tris)


def icosphere(radius: float = 1.0, subdivisions: int = 2, center=(0.0, 0.0, 0.0)) -> TriMesh:
    t = (1.0 + 5.0**0.5) / 2.0
    verts = np.array(
        [
            [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
            [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
            [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
        ],
        dtype=np.float64,
    )
    faces = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ]
    )
    mesh = TriMesh(verts, faces)
    for _ in range(subdivisions):
        mesh = subdivide_midpoint(mesh)
        v = mesh.vertices / np.linalg.norm(mesh.vertices, axis=1, keepdims=True)
        mesh = TriMesh(v, mesh.triangles)
    v = mesh.vertices / np.linalg.norm(mesh.vertices, axis=1, keepdims=True)
    return TriMesh(v * radius + np.asarray(center), mesh.triangles)


def torus(major: float = 0.25, minor: float = 0.08, n_major: int = 96, n_minor: int = 48) -> TriMesh:
    """Torus around the z axis."""
    u = np.arange(n_major) * (2 * np.pi / n_major)
    v = np.arange(n_minor) * (2 * np.pi / n_minor)
    uu, vv = np.meshgrid(u, v, indexing="ij")
    ring = major + minor * np.cos(vv)
    verts = np.stack([ring * np.cos(uu), ring * np.sin(uu), minor * np.sin(vv)], axis=-1).reshape(-1, 3)
    i, j = np.meshgrid(np.arange(n_major), np.arange(n_minor), indexing="ij")
    i1 = (i + 1) % n_major
    j1 = (j + 1) % n_minor
    a = (i * n_minor + j).ravel()
    b = (i1 * n_minor + j).ravel()
    c = (i1 * n_minor + j1).ravel()
    d = (i * n_minor + j1).ravel()
    faces = np.concatenate([np.stack([a, b, c], 1), np.stack([a, c, d], 1)])
    return TriMesh(verts, faces)


def box(half_extents=(0.5, 0.5, 0.5), center=(0.0, 0.0, 0.0), subdivisions: int = 0) -> TriMesh:
    h = np.asarray(half_extents, dtype=np.float64)
    corners = np.array([[x, y, z] for x in (-1, 1) for y in (-1, 1) for z in (-1, 1)], dtype=np.float64)
    faces = np.array(
        [
            [0, 1, 3], [0, 3, 2], [4, 6, 7], [4, 7, 5],
            [0, 4, 5], [0, 5, 1], [2, 3, 7], [2, 7, 6],
            [0, 2, 6], [0, 6, 4], [1, 5, 7], [1, 7, 3],
        ]
    )
    mesh = TriMesh(corners * h + np.asarray(center), faces)
    return subdivide_midpoint(mesh, subdivisions) if subdivisions else mesh


def box_with_fin(
    box_size=(0.5, 0.3, 0.5),
    fin_height: float = 0.25,
    fin_thickness: float = 0.004,
    fin_x: float = 0.0,
    subdivisions: int = 4,
) -> TriMesh:
    """Box with a thin plate standing on its top face.

    The box spans ``[-bx/2, bx/2] x [-by, 0] x [-bz/2, bz/2]`` and the fin is the
    slab ``|x - fin_x| <= t/2``, ``0 <= y <= fin_height`` spanning the full z
    depth, built as one extruded polygon so the surface is a single closed
    manifold.
    """
    bx, by, bz = box_size
    a, t = bx / 2.0, fin_thickness / 2.0
    # cross-section polygon in the xy plane, counter-clockwise
    poly = np.array(
        [
            [-a, -by], [a, -by], [a, 0.0], [fin_x + t, 0.0],
            [fin_x + t, fin_height], [fin_x - t, fin_height], [fin_x - t, 0.0], [-a, 0.0],
        ]
    )
    n = len(poly)
    z0, z1 = -bz / 2.0, bz / 2.0
    verts = np.concatenate([np.c_[poly, np.full(n, z0)], np.c_[poly, np.full(n, z1)]])
    faces = []
    for i in range(n):
        j = (i + 1) % n
        faces += [[i, j, n + j], [i, n + j, n + i]]
    cap = [[0, 1, 2], [0, 2, 3], [0, 3, 6], [0, 6, 7], [3, 4, 5], [3, 5, 6]]
    faces += [[a_, c_, b_] for a_, b_, c_ in cap]  # z0 cap faces -z
    faces += [[n + a_, n + b_, n + c_] for a_, b_, c_ in cap]
    mesh = TriMesh(verts, np.asarray(faces))
    return subdivide_midpoint(mesh, subdivisions) if subdivisions else mesh


def random_shape(rng: np.random.Generator) -> TriMesh:
    """Randomly posed ellipsoid, torus or box, for property tests."""
    kind = rng.integers(3)
    if kind == 0:
        mesh = icosphere(1.0, 3)
        verts = mesh.vertices * rng.uniform(0.1, 0.5, size=3)
    elif kind == 1:
        major = rng.uniform(0.15, 0.35)
        mesh = torus(major, rng.uniform(0.02, 0.6 * major), 48, 24)
        verts = mesh.vertices
    else:
        mesh = box(rng.uniform(0.05, 0.4, size=3), subdivisions=3)
        verts = mesh.vertices
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return TriMesh(verts @ q.T + rng.uniform(-0.1, 0.1, size=3), mesh.triangles)
