"""Triangle meshes: loading, saving, normalization and area-weighted sampling."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

from .errors import MeshError

PathLike = Union[str, Path]

DEGENERATE_AREA = 1e-12
SAMPLES_PER_TRIANGLE = 10


def _frozen(a: np.ndarray, dtype) -> np.ndarray:
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TriMesh:
    """Indexed triangle soup.

    ``vertices`` is ``(n, 3)`` float64 and ``triangles`` is ``(t, 3)`` int64.
    Both arrays are read-only; derive new meshes instead of editing in place.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    _normals: np.ndarray = field(init=False, repr=False)
    _areas: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        v = _frozen(np.reshape(self.vertices, (-1, 3)), np.float64)
        t = _frozen(np.reshape(self.triangles, (-1, 3)), np.int64)
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            raise MeshError("triangle index out of range")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)
        e1 = v[t[:, 1]] - v[t[:, 0]]
        e2 = v[t[:, 2]] - v[t[:, 0]]
        cross = np.cross(e1, e2)
        norm = np.linalg.norm(cross, axis=1)
        normals = cross / np.where(norm > 0, norm, 1.0)[:, None]
        object.__setattr__(self, "_normals", _frozen(normals, np.float64))
        object.__setattr__(self, "_areas", _frozen(0.5 * norm, np.float64))

    @property
    def face_normals(self) -> np.ndarray:
        return self._normals

    @property
    def face_areas(self) -> np.ndarray:
        return self._areas

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def signed_volume(self) -> float:
        v = self.vertices
        t = self.triangles
        return float(np.einsum("ij,ij->i", v[t[:, 0]], np.cross(v[t[:, 1]], v[t[:, 2]])).sum() / 6.0)

    def edge_counts(self) -> dict[tuple[int, int], int]:
        """Number of incident triangles for every undirected edge."""
        t = self.triangles
        edges = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        edges.sort(axis=1)
        uniq, counts = np.unique(edges, axis=0, return_counts=True)
        return {(int(a), int(b)): int(c) for (a, b), c in zip(uniq, counts)}

    def is_watertight(self) -> bool:
        return self.n_triangles > 0 and all(c == 2 for c in self.edge_counts().values())


@dataclass(frozen=True, eq=False)
class SurfaceSamples:
    """Points on a mesh with the normal and index of their source triangle."""

    points: np.ndarray
    normals: np.ndarray
    source_face: np.ndarray

    def __len__(self) -> int:
        return len(self.points)


def remove_degenerate(mesh: TriMesh, min_area: float = DEGENERATE_AREA) -> TriMesh:
    keep = mesh.face_areas > min_area
    if keep.all():
        return mesh
    return TriMesh(mesh.vertices, mesh.triangles[keep])


# ---------------------------------------------------------------------------
# file formats
# ---------------------------------------------------------------------------


def _parse_obj(text: str) -> tuple[np.ndarray, np.ndarray]:
    verts: list[list[float]] = []
    faces: list[list[int]] = []
    for lineno, line in enumerate(text.splitlines(), 1):
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "v":
            try:
                verts.append([float(x) for x in parts[1:4]])
            except ValueError as exc:
                raise MeshError(f"line {lineno}: bad vertex") from exc
            if len(verts[-1]) != 3:
                raise MeshError(f"line {lineno}: vertex needs 3 coordinates")
        elif parts[0] == "f":
            if len(parts) != 4:
                raise MeshError(f"line {lineno}: non-triangular face")
            idx = []
            for tok in parts[1:]:
                try:
                    i = int(tok.split("/")[0])
                except ValueError as exc:
                    raise MeshError(f"line {lineno}: bad face index") from exc
                idx.append(i - 1 if i > 0 else len(verts) + i)
            faces.append(idx)
    return np.asarray(verts, dtype=np.float64).reshape(-1, 3), np.asarray(faces, dtype=np.int64).reshape(-1, 3)


def _weld(tri_verts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Merge bitwise-identical vertices of an STL triangle soup."""
    flat = tri_verts.reshape(-1, 3)
    uniq, inverse = np.unique(flat, axis=0, return_inverse=True)
    return uniq, inverse.reshape(-1, 3)


def _parse_stl(data: bytes) -> tuple[np.ndarray, np.ndarray]:
    if len(data) >= 84:
        (n,) = struct.unpack_from("<I", data, 80)
        if len(data) == 84 + 50 * n:
            rec = np.dtype([("n", "<f4", 3), ("v", "<f4", (3, 3)), ("attr", "<u2")])
            arr = np.frombuffer(data, dtype=rec, count=n, offset=84)
            return _weld(arr["v"].astype(np.float64))
    text = data.decode("ascii", errors="strict") if data[:5].lower() == b"solid" else None
    if text is None:
        raise MeshError("unrecognised STL file")
    tris: list[list[float]] = []
    cur: list[list[float]] = []
    for line in text.splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "vertex":
            cur.append([float(x) for x in parts[1:4]])
        elif parts[0] == "endloop":
            if len(cur) != 3:
                raise MeshError("non-triangular face")
            tris.append(cur)
            cur = []
    return _weld(np.asarray(tris, dtype=np.float64).reshape(-1, 3, 3))


def load_mesh(path: PathLike) -> TriMesh:
    """Read an OBJ or STL (ASCII or binary) triangle mesh.

    Degenerate triangles (area <= 1e-12) are dropped. Raises ``MeshError`` for
    polygons with more than three corners or if nothing is left after
    filtering, and ``OSError`` if the file cannot be read.
    """
    path = Path(path)
    data = path.read_bytes()
    suffix = path.suffix.lower()
    try:
        if suffix == ".obj":
            verts, faces = _parse_obj(data.decode("utf-8", errors="replace"))
        elif suffix == ".stl":
            verts, faces = _parse_stl(data)
        else:
            raise MeshError(f"unsupported mesh format {suffix!r}")
    except (UnicodeDecodeError, struct.error) as exc:
        raise MeshError(f"unreadable mesh file {path}") from exc
    mesh = remove_degenerate(TriMesh(verts, faces))
    if mesh.n_triangles == 0:
        raise MeshError("empty mesh after filtering degenerate triangles")
    return mesh


def save_mesh(mesh: TriMesh, path: PathLike) -> None:
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".obj":
        with path.open("w") as fh:
            fh.write("".join(f"v {x:.9g} {y:.9g} {z:.9g}\n" for x, y, z in mesh.vertices))
            fh.write("".join(f"f {a + 1} {b + 1} {c + 1}\n" for a, b, c in mesh.triangles))
    elif suffix == ".stl":
        rec = np.dtype([("n", "<f4", 3), ("v", "<f4", (3, 3)), ("attr", "<u2")])
        arr = np.zeros(mesh.n_triangles, dtype=rec)
        arr["n"] = mesh.face_normals
        arr["v"] = mesh.vertices[mesh.triangles]
        with path.open("wb") as fh:
            fh.write(b"gala binary stl".ljust(80, b" "))
            fh.write(struct.pack("<I", mesh.n_triangles))
            fh.write(arr.tobytes())
    else:
        raise MeshError(f"unsupported mesh format {suffix!r}")


# ---------------------------------------------------------------------------
# normalization and sampling
# ---------------------------------------------------------------------------


def normalization_transform(mesh: TriMesh) -> tuple[np.ndarray, float]:
    """Bounding-box center and diagonal used by :func:`normalize_mesh`."""
    if mesh.n_vertices == 0:
        raise MeshError("cannot normalize an empty mesh")
    lo, hi = mesh.bounds
    diag = float(np.linalg.norm(hi - lo))
    if not diag > 0:
        raise MeshError("zero-extent mesh cannot be normalized")
    return (hi + lo) / 2.0, diag


def normalize_mesh(mesh: TriMesh) -> TriMesh:
    """Center the bounding box at the origin and scale its diagonal to 1."""
    center, diag = normalization_transform(mesh)
    return TriMesh((mesh.vertices - center) / diag, mesh.triangles)


def apportion(weights: np.ndarray, count: int) -> np.ndarray:
    """Largest-remainder split of ``count`` items proportionally to ``weights``."""
    weights = np.asarray(weights, dtype=np.float64)
    total = weights.sum()
    if not total > 0:
        raise MeshError("mesh has zero surface area")
    quota = weights * (count / total)
    base = np.floor(quota).astype(np.int64)
    short = count - int(base.sum())
    if short > 0:
        order = np.argsort(-(quota - base), kind="stable")
        base[order[:short]] += 1
    return base


def sample_surface(mesh: TriMesh, count: int | None = None, seed: int = 0) -> SurfaceSamples:
    """Area-proportional uniform samples on the surface.

    ``count`` defaults to ten points per triangle. Each triangle gets its
    largest-remainder share of ``count``; positions use the square-root
    barycentric map so they are uniform within the triangle.
    """
    if count is None:
        count = SAMPLES_PER_TRIANGLE * mesh.n_triangles
    if count < 1:
        raise ValueError("count must be positive")
    per_face = apportion(mesh.face_areas, count)
    face = np.repeat(np.arange(mesh.n_triangles), per_face)
    rng = np.random.default_rng(seed)
    return _barycentric_points(mesh, face, rng.random((count, 2)))


def _barycentric_points(mesh: TriMesh, face: np.ndarray, r: np.ndarray) -> SurfaceSamples:
    sq = np.sqrt(r[:, 0])
    bary = np.stack([1.0 - sq, sq * (1.0 - r[:, 1]), sq * r[:, 1]], axis=1)
    corners = mesh.vertices[mesh.triangles[face]]
    points = np.einsum("ij,ijk->ik", bary, corners)
    return SurfaceSamples(
        points=_frozen(points, np.float64),
        normals=_frozen(mesh.face_normals[face], np.float64),
        source_face=_frozen(face, np.int64),
    )


def sample_surface_iid(mesh: TriMesh, count: int, seed: int = 0) -> SurfaceSamples:
    """Independent area-weighted samples: each point picks its triangle with probability ``area / total``.

    Unlike :func:`sample_surface` this stays unbiased when ``count`` is smaller
    than the number of triangles, so it is the right sampler for metrics.
    """
    if count < 1:
        raise ValueError("count must be positive")
    areas = mesh.face_areas
    total = areas.sum()
    if not total > 0:
        raise MeshError("mesh has zero surface area")
    rng = np.random.default_rng(seed)
    face = rng.choice(mesh.n_triangles, size=count, p=areas / total)
    return _barycentric_points(mesh, face, rng.random((count, 2)))
