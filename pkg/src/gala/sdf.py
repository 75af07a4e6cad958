"""Ground-truth signed distance to a watertight mesh.

Closest-point queries run over a bounding volume hierarchy; the sign comes
from the angle-weighted pseudonormal of the closest feature (face, edge or
vertex), so one query yields both distance and inside/outside.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np

from .errors import MeshError
from .mesh import TriMesh

TRUNCATION = 0.1
LEAF_SIZE = 4

# closest-feature codes
_FACE, _VA, _VB, _VC, _EAB, _EBC, _ECA = range(7)


@dataclass(frozen=True, eq=False)
class Bvh:
    lo: np.ndarray  # (K, 3) node box minimum
    hi: np.ndarray  # (K, 3) node box maximum
    left: np.ndarray  # (K,) child index, -1 for leaves
    right: np.ndarray
    start: np.ndarray  # (K,) offset into ``order`` for leaves
    count: np.ndarray
    order: np.ndarray  # triangle indices, leaf-contiguous

    @property
    def n_nodes(self) -> int:
        return len(self.left)

    @property
    def n_leaves(self) -> int:
        return int((self.left < 0).sum())


def build_bvh(mesh: TriMesh, leaf_size: int = LEAF_SIZE) -> Bvh:
    """Top-down median split along the widest centroid axis."""
    corners = mesh.vertices[mesh.triangles]
    tri_lo = corners.min(axis=1)
    tri_hi = corners.max(axis=1)
    centroid = corners.mean(axis=1)
    order = np.arange(mesh.n_triangles)
    lo, hi, left, right, start, count = [], [], [], [], [], []

    def new_node(s: int, e: int) -> int:
        idx = order[s:e]
        lo.append(tri_lo[idx].min(axis=0))
        hi.append(tri_hi[idx].max(axis=0))
        left.append(-1)
        right.append(-1)
        start.append(s)
        count.append(e - s)
        return len(left) - 1

    stack = [(new_node(0, len(order)), 0, len(order))]
    while stack:
        node, s, e = stack.pop()
        if e - s <= leaf_size:
            continue
        c = centroid[order[s:e]]
        axis = int(np.argmax(c.max(axis=0) - c.min(axis=0)))
        mid = (e - s) // 2
        part = np.argpartition(c[:, axis], mid, kind="introselect")
        order[s:e] = order[s:e][part]
        m = s + mid
        left[node] = new_node(s, m)
        right[node] = new_node(m, e)
        count[node] = 0
        stack.append((left[node], s, m))
        stack.append((right[node], m, e))

    return Bvh(
        lo=np.asarray(lo, dtype=np.float64).reshape(-1, 3),
        hi=np.asarray(hi, dtype=np.float64).reshape(-1, 3),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        start=np.asarray(start, dtype=np.int64),
        count=np.asarray(count, dtype=np.int64),
        order=order,
    )


def _pseudonormals(mesh: TriMesh) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    v, t = mesh.vertices, mesh.triangles
    fn = mesh.face_normals
    # vertex normals weighted by incident angle
    vn = np.zeros_like(v)
    for k in range(3):
        a = v[t[:, k]]
        e1 = v[t[:, (k + 1) % 3]] - a
        e2 = v[t[:, (k + 2) % 3]] - a
        cosang = np.einsum("ij,ij->i", e1, e2) / (np.linalg.norm(e1, axis=1) * np.linalg.norm(e2, axis=1))
        ang = np.arccos(np.clip(cosang, -1.0, 1.0))
        np.add.at(vn, t[:, k], ang[:, None] * fn)
    vn /= np.maximum(np.linalg.norm(vn, axis=1, keepdims=True), 1e-300)
    # edge normals: both incident faces weighted by pi
    edges = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    edges.sort(axis=1)
    _, inverse = np.unique(edges, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    en = np.zeros((inverse.max() + 1, 3))
    np.add.at(en, inverse, np.tile(fn, (3, 1)))
    en /= np.maximum(np.linalg.norm(en, axis=1, keepdims=True), 1e-300)
    tri_edges = inverse.reshape(3, -1).T.copy()
    return vn, en, tri_edges


@nb.njit(cache=True, inline="always")
def _closest_on_triangle(p, a, b, c):
    ab0, ab1, ab2 = b[0] - a[0], b[1] - a[1], b[2] - a[2]
    ac0, ac1, ac2 = c[0] - a[0], c[1] - a[1], c[2] - a[2]
    ap0, ap1, ap2 = p[0] - a[0], p[1] - a[1], p[2] - a[2]
    d1 = ab0 * ap0 + ab1 * ap1 + ab2 * ap2
    d2 = ac0 * ap0 + ac1 * ap1 + ac2 * ap2
    if d1 <= 0.0 and d2 <= 0.0:
        return a[0], a[1], a[2], _VA
    bp0, bp1, bp2 = p[0] - b[0], p[1] - b[1], p[2] - b[2]
    d3 = ab0 * bp0 + ab1 * bp1 + ab2 * bp2
    d4 = ac0 * bp0 + ac1 * bp1 + ac2 * bp2
    if d3 >= 0.0 and d4 <= d3:
        return b[0], b[1], b[2], _VB
    vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        v = d1 / (d1 - d3)
        return a[0] + v * ab0, a[1] + v * ab1, a[2] + v * ab2, _EAB
    cp0, cp1, cp2 = p[0] - c[0], p[1] - c[1], p[2] - c[2]
    d5 = ab0 * cp0 + ab1 * cp1 + ab2 * cp2
    d6 = ac0 * cp0 + ac1 * cp1 + ac2 * cp2
    if d6 >= 0.0 and d5 <= d6:
        return c[0], c[1], c[2], _VC
    vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        w = d2 / (d2 - d6)
        return a[0] + w * ac0, a[1] + w * ac1, a[2] + w * ac2, _ECA
    va = d3 * d6 - d5 * d4
    if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        return b[0] + w * (c[0] - b[0]), b[1] + w * (c[1] - b[1]), b[2] + w * (c[2] - b[2]), _EBC
    denom = 1.0 / (va + vb + vc)
    v = vb * denom
    w = vc * denom
    return (
        a[0] + ab0 * v + ac0 * w,
        a[1] + ab1 * v + ac1 * w,
        a[2] + ab2 * v + ac2 * w,
        _FACE,
    )


@nb.njit(cache=True, inline="always")
def _feature_normal(t, region, tris, fn, vn, en, tri_edges):
    if region == _FACE:
        return fn[t]
    if region == _VA:
        return vn[tris[t, 0]]
    if region == _VB:
        return vn[tris[t, 1]]
    if region == _VC:
        return vn[tris[t, 2]]
    if region == _EAB:
        return en[tri_edges[t, 0]]
    if region == _EBC:
        return en[tri_edges[t, 1]]
    return en[tri_edges[t, 2]]


@nb.njit(cache=True, inline="always")
def _signed(p, t, region, q0, q1, q2, d2, tris, fn, vn, en, tri_edges):
    n = _feature_normal(t, region, tris, fn, vn, en, tri_edges)
    s = (p[0] - q0) * n[0] + (p[1] - q1) * n[1] + (p[2] - q2) * n[2]
    d = np.sqrt(d2)
    return -d if s < 0.0 else d


@nb.njit(cache=True)
def _box_dist2(p, lo, hi):
    d = 0.0
    for k in range(3):
        if p[k] < lo[k]:
            d += (lo[k] - p[k]) ** 2
        elif p[k] > hi[k]:
            d += (p[k] - hi[k]) ** 2
    return d


@nb.njit(cache=True)
def _query_bvh(p, verts, tris, fn, vn, en, tri_edges, lo, hi, left, right, start, count, order):
    best = np.inf
    best_t = -1
    best_r = 0
    b0 = b1 = b2 = 0.0
    stack = np.empty(128, dtype=np.int64)
    stack[0] = 0
    sp = 1
    while sp > 0:
        sp -= 1
        node = stack[sp]
        if _box_dist2(p, lo[node], hi[node]) > best:
            continue
        if left[node] < 0:
            for k in range(start[node], start[node] + count[node]):
                t = order[k]
                q0, q1, q2, r = _closest_on_triangle(p, verts[tris[t, 0]], verts[tris[t, 1]], verts[tris[t, 2]])
                d2 = (p[0] - q0) ** 2 + (p[1] - q1) ** 2 + (p[2] - q2) ** 2
                if d2 < best or (d2 == best and t < best_t):
                    best, best_t, best_r = d2, t, r
                    b0, b1, b2 = q0, q1, q2
        else:
            l, rr = left[node], right[node]
            dl = _box_dist2(p, lo[l], hi[l])
            dr = _box_dist2(p, lo[rr], hi[rr])
            # nearer child is popped first
            if dl <= dr:
                stack[sp] = rr
                stack[sp + 1] = l
            else:
                stack[sp] = l
                stack[sp + 1] = rr
            sp += 2
    return _signed(p, best_t, best_r, b0, b1, b2, best, tris, fn, vn, en, tri_edges)


@nb.njit(cache=True, parallel=True)
def _query_many(points, verts, tris, fn, vn, en, tri_edges, lo, hi, left, right, start, count, order):
    out = np.empty(len(points))
    for i in nb.prange(len(points)):
        out[i] = _query_bvh(points[i], verts, tris, fn, vn, en, tri_edges, lo, hi, left, right, start, count, order)
    return out


@nb.njit(cache=True, parallel=True)
def _brute_many(points, verts, tris, fn, vn, en, tri_edges):
    out = np.empty(len(points))
    for i in nb.prange(len(points)):
        p = points[i]
        best = np.inf
        best_t = 0
        best_r = 0
        b0 = b1 = b2 = 0.0
        for t in range(len(tris)):
            q0, q1, q2, r = _closest_on_triangle(p, verts[tris[t, 0]], verts[tris[t, 1]], verts[tris[t, 2]])
            d2 = (p[0] - q0) ** 2 + (p[1] - q1) ** 2 + (p[2] - q2) ** 2
            if d2 < best:
                best, best_t, best_r = d2, t, r
                b0, b1, b2 = q0, q1, q2
        out[i] = _signed(p, best_t, best_r, b0, b1, b2, best, tris, fn, vn, en, tri_edges)
    return out


def _as_points(x) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    return np.ascontiguousarray(arr.reshape(-1, 3)), single


class SdfOracle:
    """Signed distance queries against a normalized watertight mesh.

    Negative values are inside. The object is immutable once built and may be
    shared between threads.
    """

    truncation = TRUNCATION

    def __init__(self, mesh: TriMesh, leaf_size: int = LEAF_SIZE):
        if mesh.n_triangles == 0:
            raise MeshError("cannot build an oracle on an empty mesh")
        if mesh.signed_volume() < 0:
            raise MeshError("inconsistent winding: mesh has negative signed volume")
        self.mesh = mesh
        self.bvh = build_bvh(mesh, leaf_size)
        self.vertex_normals, self.edge_normals, self.tri_edges = _pseudonormals(mesh)

    def _mesh_args(self):
        m = self.mesh
        return (m.vertices, m.triangles, m.face_normals, self.vertex_normals, self.edge_normals, self.tri_edges)

    def signed_distance(self, x):
        """Exact (untruncated) signed distance for one point or an ``(n, 3)`` array."""
        pts, single = _as_points(x)
        b = self.bvh
        out = _query_many(pts, *self._mesh_args(), b.lo, b.hi, b.left, b.right, b.start, b.count, b.order)
        return float(out[0]) if single else out

    def truncated_sdf(self, x):
        d = self.signed_distance(x)
        return np.clip(d, -self.truncation, self.truncation) if not np.isscalar(d) else float(
            min(max(d, -self.truncation), self.truncation)
        )

    def brute_force_signed_distance(self, x):
        """Same arithmetic as :meth:`signed_distance` but scanning every triangle."""
        pts, single = _as_points(x)
        out = _brute_many(pts, *self._mesh_args())
        return float(out[0]) if single else out


def build_oracle(mesh: TriMesh) -> SdfOracle:
    return SdfOracle(mesh)
