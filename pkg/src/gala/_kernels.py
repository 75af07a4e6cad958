"""Compiled kernels for blending local grids.

Every grid ``g`` maps a world point ``x`` to local coordinates
``xi = R_g^T (x - p_g) / s_g``; its weight is ``max(0, 1 - |xi|_inf)`` and its
value is the trilinear interpolant of the lattice at ``xi``. The blended value
is the weight-normalized sum, or ``OUTSIDE`` when no grid has positive weight.
"""

import numba as nb
import numpy as np

OUTSIDE = 0.1


@nb.njit(cache=True)
def build_cell_lists(box_lo, box_hi, origin, cell, dims):
    """CSR lists of the grids whose bounding box touches each cell."""
    n = len(box_lo)
    ncell = dims[0] * dims[1] * dims[2]
    counts = np.zeros(ncell + 1, dtype=np.int64)
    lo_idx = np.empty((n, 3), dtype=np.int64)
    hi_idx = np.empty((n, 3), dtype=np.int64)
    for g in range(n):
        for k in range(3):
            a = int(np.floor((box_lo[g, k] - origin[k]) / cell))
            b = int(np.floor((box_hi[g, k] - origin[k]) / cell))
            lo_idx[g, k] = min(max(a, 0), dims[k] - 1)
            hi_idx[g, k] = min(max(b, 0), dims[k] - 1)
        for i in range(lo_idx[g, 0], hi_idx[g, 0] + 1):
            for j in range(lo_idx[g, 1], hi_idx[g, 1] + 1):
                for k in range(lo_idx[g, 2], hi_idx[g, 2] + 1):
                    counts[(i * dims[1] + j) * dims[2] + k + 1] += 1
    start = np.cumsum(counts)
    items = np.empty(start[-1], dtype=np.int64)
    fill = start[:-1].copy()
    for g in range(n):
        for i in range(lo_idx[g, 0], hi_idx[g, 0] + 1):
            for j in range(lo_idx[g, 1], hi_idx[g, 1] + 1):
                for k in range(lo_idx[g, 2], hi_idx[g, 2] + 1):
                    c = (i * dims[1] + j) * dims[2] + k
                    items[fill[c]] = g
                    fill[c] += 1
    return start, items


@nb.njit(cache=True, inline="always")
def _cell_of(x, origin, cell, dims):
    i = int(np.floor((x[0] - origin[0]) / cell))
    j = int(np.floor((x[1] - origin[1]) / cell))
    k = int(np.floor((x[2] - origin[2]) / cell))
    if i < 0 or j < 0 or k < 0 or i >= dims[0] or j >= dims[1] or k >= dims[2]:
        return -1
    return (i * dims[1] + j) * dims[2] + k


@nb.njit(cache=True, inline="always")
def _local(x, g, centers, rot, inv_scale):
    d0 = x[0] - centers[g, 0]
    d1 = x[1] - centers[g, 1]
    d2 = x[2] - centers[g, 2]
    u0 = (d0 * rot[g, 0, 0] + d1 * rot[g, 1, 0] + d2 * rot[g, 2, 0]) * inv_scale[g, 0]
    u1 = (d0 * rot[g, 0, 1] + d1 * rot[g, 1, 1] + d2 * rot[g, 2, 1]) * inv_scale[g, 1]
    u2 = (d0 * rot[g, 0, 2] + d1 * rot[g, 1, 2] + d2 * rot[g, 2, 2]) * inv_scale[g, 2]
    return u0, u1, u2


@nb.njit(cache=True, inline="always")
def _corner(u, m):
    t = (u + 1.0) * 0.5 * (m - 1)
    i = int(np.floor(t))
    if i < 0:
        i = 0
    elif i > m - 2:
        i = m - 2
    return i, t - i


@nb.njit(cache=True, inline="always")
def _trilinear(values, g, u0, u1, u2, m):
    i, fx = _corner(u0, m)
    j, fy = _corner(u1, m)
    k, fz = _corner(u2, m)
    c00 = values[g, i, j, k] * (1 - fx) + values[g, i + 1, j, k] * fx
    c01 = values[g, i, j, k + 1] * (1 - fx) + values[g, i + 1, j, k + 1] * fx
    c10 = values[g, i, j + 1, k] * (1 - fx) + values[g, i + 1, j + 1, k] * fx
    c11 = values[g, i, j + 1, k + 1] * (1 - fx) + values[g, i + 1, j + 1, k + 1] * fx
    c0 = c00 * (1 - fy) + c10 * fy
    c1 = c01 * (1 - fy) + c11 * fy
    return c0 * (1 - fz) + c1 * fz


@nb.njit(cache=True, inline="always")
def _blend_one(x, centers, rot, inv_scale, values, start, items, origin, cell, dims):
    c = _cell_of(x, origin, cell, dims)
    if c < 0:
        return OUTSIDE, 0.0
    m = values.shape[1]
    num = 0.0
    den = 0.0
    for a in range(start[c], start[c + 1]):
        g = items[a]
        u0, u1, u2 = _local(x, g, centers, rot, inv_scale)
        w = 1.0 - max(abs(u0), abs(u1), abs(u2))
        if w > 0.0:
            num += w * _trilinear(values, g, u0, u1, u2, m)
            den += w
    if den > 0.0:
        return num / den, den
    return OUTSIDE, 0.0


@nb.njit(cache=True, parallel=True)
def blend(points, centers, rot, inv_scale, values, start, items, origin, cell, dims):
    out = np.empty(len(points))
    wsum = np.empty(len(points))
    for i in nb.prange(len(points)):
        out[i], wsum[i] = _blend_one(points[i], centers, rot, inv_scale, values, start, items, origin, cell, dims)
    return out, wsum


@nb.njit(cache=True)
def blend_coefficients(x, centers, rot, inv_scale, start, items, origin, cell, dims, m):
    """Grids with positive weight at ``x`` and their normalized weights."""
    c = _cell_of(x, origin, cell, dims)
    gs = []
    ws = []
    if c >= 0:
        for a in range(start[c], start[c + 1]):
            g = items[a]
            u0, u1, u2 = _local(x, g, centers, rot, inv_scale)
            w = 1.0 - max(abs(u0), abs(u1), abs(u2))
            if w > 0.0:
                gs.append(g)
                ws.append(w)
    return gs, ws


@nb.njit(cache=True)
def loss_and_grad(points, targets, centers, rot, inv_scale, values, start, items, origin, cell, dims):
    """Mean squared error and its gradient with respect to every lattice value.

    Also returns the squared-error sum and count over covered points only.
    Accumulation runs serially in point order so results are reproducible.
    """
    n = len(points)
    m = values.shape[1]
    grad = np.zeros_like(values)
    loss = 0.0
    covered_loss = 0.0
    covered = 0
    for p in range(n):
        x = points[p]
        v, den = _blend_one(x, centers, rot, inv_scale, values, start, items, origin, cell, dims)
        r = v - targets[p]
        loss += r * r
        if den <= 0.0:
            continue
        covered_loss += r * r
        covered += 1
        scale = 2.0 * r / (n * den)
        c = _cell_of(x, origin, cell, dims)
        for a in range(start[c], start[c + 1]):
            g = items[a]
            u0, u1, u2 = _local(x, g, centers, rot, inv_scale)
            w = 1.0 - max(abs(u0), abs(u1), abs(u2))
            if w <= 0.0:
                continue
            coef = scale * w
            i, fx = _corner(u0, m)
            j, fy = _corner(u1, m)
            k, fz = _corner(u2, m)
            for di in range(2):
                bx = fx if di else 1.0 - fx
                for dj in range(2):
                    by = fy if dj else 1.0 - fy
                    for dk in range(2):
                        bz = fz if dk else 1.0 - fz
                        grad[g, i + di, j + dj, k + dk] += coef * bx * by * bz
    return loss / n, grad, covered_loss, covered


@nb.njit(cache=True, inline="always")
def _row_span(g, x0, x1, centers, rot, inv_scale, step, res):
    """Lattice indices ``k`` where grid ``g`` may have positive weight on the row (x0, x1, z_k).

    Local coordinates are affine in z along a row, so the support is an
    interval; it is widened by one sample to absorb rounding.
    """
    d0 = x0 - centers[g, 0]
    d1 = x1 - centers[g, 1]
    zlo = -1.0
    zhi = 1.0
    for d in range(3):
        a = (d0 * rot[g, 0, d] + d1 * rot[g, 1, d] - centers[g, 2] * rot[g, 2, d]) * inv_scale[g, d]
        b = rot[g, 2, d] * inv_scale[g, d]
        if abs(b) < 1e-12:
            if abs(a) >= 1.0 + 1e-9:
                return 1, 0
            continue
        lo = (-1.0 - a) / b
        hi = (1.0 - a) / b
        if lo > hi:
            lo, hi = hi, lo
        zlo = max(zlo, lo)
        zhi = min(zhi, hi)
    if zlo > zhi:
        return 1, 0
    klo = int(np.floor((zlo + 0.5) / step)) - 1
    khi = int(np.ceil((zhi + 0.5) / step)) + 1
    return max(klo, 0), min(khi, res - 1)


@nb.njit(cache=True, parallel=True)
def sample_lattice(res, centers, rot, inv_scale, values, start, items, origin, cell, dims):
    """Blend on the ``res**3`` lattice spanning [-0.5, 0.5]^3 (float32 output).

    Same grids, order and arithmetic as :func:`blend`, so each voxel equals
    the point query rounded to float32. Per row, grids are first reduced to
    the span of ``k`` they can touch, which spares most weight evaluations.
    """
    out = np.empty((res, res, res), dtype=np.float32)
    step = 1.0 / (res - 1)
    m = values.shape[1]
    widest = 0
    for r in range(dims[0] * dims[1]):
        widest = max(widest, start[(r + 1) * dims[2]] - start[r * dims[2]])
    for i in nb.prange(res):
        x = np.empty(3)
        klo = np.empty(widest, dtype=np.int64)
        khi = np.empty(widest, dtype=np.int64)
        x[0] = -0.5 + i * step
        for j in range(res):
            x[1] = -0.5 + j * step
            x[2] = origin[2]
            c0 = _cell_of(x, origin, cell, dims)
            if c0 < 0:
                out[i, j, :] = OUTSIDE
                continue
            base = start[c0]
            for a in range(base, start[c0 + dims[2]]):
                klo[a - base], khi[a - base] = _row_span(items[a], x[0], x[1], centers, rot, inv_scale, step, res)
            for k in range(res):
                x[2] = -0.5 + k * step
                c = _cell_of(x, origin, cell, dims)
                if c < 0:
                    out[i, j, k] = OUTSIDE
                    continue
                num = 0.0
                den = 0.0
                for a in range(start[c], start[c + 1]):
                    if k < klo[a - base] or k > khi[a - base]:
                        continue
                    g = items[a]
                    u0, u1, u2 = _local(x, g, centers, rot, inv_scale)
                    w = 1.0 - max(abs(u0), abs(u1), abs(u2))
                    if w > 0.0:
                        num += w * _trilinear(values, g, u0, u1, u2, m)
                        den += w
                out[i, j, k] = num / den if den > 0.0 else OUTSIDE
    return out
