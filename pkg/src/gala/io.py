"""The ``.gala`` binary format and the flattened generation-data export.

``.gala`` layout (all fields little-endian)::

    offset  size          field
    0       4             magic b"GALA"
    4       4   u32       format version (1)
    8       2   u16 x 4   N_o, d, m, n_h
    16      4   f32       alpha
    20      4   u32       number of leaf grids G
    24      32  f32 x 8   (min, max) for p, s, p_g, s_g
    56      16 * N_o      roots: p (3 x f32), s (f32)
    ...     (10+m^3) * G  leaves: parent u32, sibling u8, Euler u8 x 3,
                          s_g u8 x 3, p_g u8 x 3, V u8 x m^3

Leaves are stored in increasing ``parent * 8 + sibling`` order. The codes are
the canonical data; every float in a loaded :class:`GalaRep` is derived from
them, so ``save(load(f))`` reproduces ``f`` byte for byte.
"""

from __future__ import annotations

import json
import os
import struct
from pathlib import Path

import numpy as np

from . import quantize as qz
from .errors import GalaFormatError
from .rep import STAT_DOMAINS, GalaRep

MAGIC = b"GALA"
VERSION = 1
_HEAD = struct.Struct("<4sI4HfI8f")
ROOT_BYTES = 16

GEN_MAGIC = b"GGEN"
GEN_VERSION = 1
_GEN_HEAD = struct.Struct("<4sI4HI12d")
GEN_DOMAINS = STAT_DOMAINS + ("q", "V")
FIXED_RANGES = {"q": (-1.0, 1.0), "V": qz.VALUE_RANGE}

PathLike = str | os.PathLike


def _leaf_dtype(m: int) -> np.dtype:
    return np.dtype(
        [
            ("parent", "<u4"),
            ("sibling", "u1"),
            ("euler", "u1", (3,)),
            ("scale", "u1", (3,)),
            ("center", "u1", (3,)),
            ("values", "u1", (m**3,)),
        ]
    )


def file_size(n_roots: int, n_grids: int, m: int) -> int:
    return _HEAD.size + ROOT_BYTES * n_roots + _leaf_dtype(m).itemsize * n_grids


def encode(rep: GalaRep) -> bytes:
    """Serialize a quantized representation."""
    if not rep.quantized or rep.value_codes is None or rep.euler_codes is None:
        raise ValueError("only quantized representations can be saved")
    m = rep.grid_res
    for name, val in (("n_roots", rep.n_roots), ("depth", rep.depth), ("grid_res", m), ("n_hist", rep.n_hist)):
        if not 0 <= val <= 0xFFFF:
            raise ValueError(f"{name}={val} does not fit in 16 bits")
    order = np.argsort(rep.leaf_index, kind="stable")
    leaf = np.asarray(rep.leaf_index)[order]
    if np.any(np.diff(leaf) <= 0):
        raise ValueError("duplicate leaf indices")
    stats = rep.stats if rep.stats is not None else rep.compute_stats()
    flat_stats = [float(np.float32(v)) for d in STAT_DOMAINS for v in stats[d]]
    head = _HEAD.pack(
        MAGIC, VERSION, rep.n_roots, rep.depth, m, rep.n_hist, float(np.float32(rep.alpha)), rep.n_grids, *flat_stats
    )
    roots = np.empty((rep.n_roots, 4), dtype="<f4")
    roots[:, :3] = rep.root_centers
    roots[:, 3] = rep.root_scales
    rec = np.zeros(rep.n_grids, dtype=_leaf_dtype(m))
    rec["parent"] = leaf // 8
    rec["sibling"] = leaf % 8
    rec["euler"] = np.asarray(rep.euler_codes).reshape(-1, 3)[order]
    rec["scale"] = np.asarray(rep.scale_codes).reshape(-1, 3)[order]
    rec["center"] = np.asarray(rep.center_codes).reshape(-1, 3)[order]
    rec["values"] = np.asarray(rep.value_codes).reshape(-1, m**3)[order]
    return head + roots.tobytes() + rec.tobytes()


def decode(data: bytes) -> GalaRep:
    """Parse ``.gala`` bytes, validating every field before use."""
    data = bytes(data)
    if len(data) < 8:
        raise GalaFormatError("file too short for a header")
    if data[:4] != MAGIC:
        raise GalaFormatError(f"bad magic {data[:4]!r}")
    (version,) = struct.unpack_from("<I", data, 4)
    if version != VERSION:
        raise GalaFormatError(f"unsupported format version {version} (this reader handles {VERSION})")
    if len(data) < _HEAD.size:
        raise GalaFormatError("truncated header")
    _, _, n_roots, depth, m, n_hist, alpha, n_grids, *flat = _HEAD.unpack_from(data)
    if m < 2:
        raise GalaFormatError(f"grid resolution {m} < 2")
    if depth < 1:
        raise GalaFormatError("depth must be >= 1")
    if not np.isfinite(alpha) or alpha < 0:
        raise GalaFormatError(f"invalid alpha {alpha}")
    expected = file_size(n_roots, n_grids, m)
    if len(data) != expected:
        kind = "truncated" if len(data) < expected else "trailing bytes in"
        raise GalaFormatError(f"{kind} file: {len(data)} bytes, expected {expected}")
    roots = np.frombuffer(data, dtype="<f4", count=4 * n_roots, offset=_HEAD.size).reshape(-1, 4)
    if not np.all(np.isfinite(roots)) or np.any(roots[:, 3] < 0):
        raise GalaFormatError("invalid root record")
    rec = np.frombuffer(data, dtype=_leaf_dtype(m), count=n_grids, offset=_HEAD.size + ROOT_BYTES * n_roots)
    parent = rec["parent"].astype(np.int64)
    if np.any(rec["sibling"] > 7):
        raise GalaFormatError("sibling index out of range")
    if np.any(parent >= n_roots * 8 ** (depth - 1)):
        raise GalaFormatError("parent index out of range")
    if np.any(rec["euler"] >= qz.EULER_CODES):
        raise GalaFormatError("Euler code out of range")
    leaf = parent * 8 + rec["sibling"]
    if np.any(np.diff(leaf) <= 0):
        raise GalaFormatError("leaf records are not in strictly increasing order")
    stats = {d: (np.float32(flat[2 * i]), np.float32(flat[2 * i + 1])) for i, d in enumerate(STAT_DOMAINS)}

    euler = rec["euler"].astype(np.uint8)
    scale_codes = rec["scale"].astype(np.uint8)
    center_codes = rec["center"].astype(np.uint8)
    value_codes = rec["values"].astype(np.uint8)
    rep = GalaRep(
        n_roots=n_roots,
        alpha=float(alpha),
        grid_res=m,
        depth=depth,
        n_hist=n_hist,
        root_centers=roots[:, :3].astype(np.float64),
        root_scales=roots[:, 3].astype(np.float64),
        leaf_index=leaf,
        centers=qz.dequantize(center_codes, *qz.CENTER_RANGE).reshape(-1, 3),
        rotations=qz.dequantize_rotation(euler).reshape(-1, 3, 3),
        scales=qz.dequantize(scale_codes, *qz.SCALE_RANGE).reshape(-1, 3),
        values=qz.dequantize(value_codes, *qz.VALUE_RANGE).reshape(-1, m, m, m),
        quantized=True,
        euler_codes=euler,
        center_codes=center_codes,
        scale_codes=scale_codes,
        value_codes=value_codes.reshape(-1, m, m, m),
        stats=stats,
    )
    return rep


def save(rep: GalaRep, path: PathLike) -> None:
    Path(path).write_bytes(encode(rep))


def load(path: PathLike) -> GalaRep:
    return decode(Path(path).read_bytes())


# ---------------------------------------------------------------------------
# generation export
# ---------------------------------------------------------------------------


def export_stats(rep: GalaRep) -> dict[str, tuple[float, float]]:
    """Normalization ranges: per-file min/max for p, s, p_g, s_g and fixed ranges for q and V."""
    stats = rep.stats if rep.stats is not None else rep.compute_stats()
    out = {d: (float(stats[d][0]), float(stats[d][1])) for d in STAT_DOMAINS}
    out.update(FIXED_RANGES)
    return out


def dataset_stats(reps) -> dict[str, tuple[float, float]]:
    """Ranges covering every representation in ``reps``."""
    per = [export_stats(r) for r in reps]
    if not per:
        raise ValueError("no representations given")
    return {d: (min(s[d][0] for s in per), max(s[d][1] for s in per)) for d in GEN_DOMAINS}


def save_stats(stats: dict, path: PathLike) -> None:
    Path(path).write_text(json.dumps({d: list(stats[d]) for d in GEN_DOMAINS}, indent=2) + "\n")


def load_stats(path: PathLike) -> dict[str, tuple[float, float]]:
    raw = json.loads(Path(path).read_text())
    try:
        return {d: (float(raw[d][0]), float(raw[d][1])) for d in GEN_DOMAINS}
    except (KeyError, IndexError, TypeError) as exc:
        raise GalaFormatError(f"statistics sidecar is missing a domain: {exc}") from exc


def normalize(x, lo: float, hi: float) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if hi <= lo:
        return np.zeros_like(x)
    return np.clip((x - lo) / (hi - lo), 0.0, 1.0)


def denormalize(x, lo: float, hi: float) -> np.ndarray:
    return lo + np.asarray(x, dtype=np.float64) * (hi - lo)


def generation_arrays(rep: GalaRep, stats: dict | None = None) -> dict[str, np.ndarray]:
    """The flattened tensors ``X_o``, ``X_Vbar``, ``X_V`` and the padding mask.

    Leaf slots are ordered root by root with the 8 siblings of each parent
    consecutive; slots without a grid are zero rows with mask 0.
    """
    if not rep.quantized:
        raise ValueError("generation export needs a quantized representation")
    stats = export_stats(rep) if stats is None else stats
    m3 = rep.grid_res**3
    slots = rep.n_leaf_slots
    x_o = np.concatenate(
        [normalize(rep.root_centers, *stats["p"]), normalize(rep.root_scales, *stats["s"])[:, None]], axis=1
    )
    x_bar = np.zeros((slots, 10))
    x_v = np.zeros((slots, m3))
    mask = np.zeros(slots, dtype=np.uint8)
    leaf = np.asarray(rep.leaf_index)
    x_bar[leaf, :4] = normalize(rep.quaternions(), *stats["q"])
    x_bar[leaf, 4:7] = normalize(rep.scales, *stats["s_g"])
    x_bar[leaf, 7:10] = normalize(rep.centers, *stats["p_g"])
    x_v[leaf] = normalize(rep.values.reshape(-1, m3), *stats["V"])
    mask[leaf] = 1
    return {"X_o": x_o, "X_Vbar": x_bar, "X_V": x_v, "mask": mask}


def export_generation_data(rep: GalaRep, path: PathLike, stats: dict | None = None) -> dict[str, np.ndarray]:
    """Write the generation tensors as one flat little-endian file.

    Layout: magic b"GGEN", u32 version, u16 N_o, d, m, 0, u32 slot count,
    12 f64 (min, max) pairs for p, s, p_g, s_g, q, V, then ``X_o``
    (N_o x 4 f64), ``X_Vbar`` (slots x 10 f64), ``X_V`` (slots x m^3 f64)
    and the mask (slots x u8). Returns the arrays that were written.
    """
    stats = export_stats(rep) if stats is None else stats
    arrays = generation_arrays(rep, stats)
    head = _GEN_HEAD.pack(
        GEN_MAGIC, GEN_VERSION, rep.n_roots, rep.depth, rep.grid_res, 0, rep.n_leaf_slots,
        *[float(v) for d in GEN_DOMAINS for v in stats[d]],
    )
    with open(path, "wb") as fh:
        fh.write(head)
        for key in ("X_o", "X_Vbar", "X_V"):
            fh.write(arrays[key].astype("<f8").tobytes())
        fh.write(arrays["mask"].tobytes())
    return arrays


def read_generation_data(path: PathLike) -> tuple[dict[str, np.ndarray], dict[str, tuple[float, float]]]:
    data = Path(path).read_bytes()
    if len(data) < _GEN_HEAD.size or data[:4] != GEN_MAGIC:
        raise GalaFormatError("not a generation export")
    _, version, n_roots, depth, m, _, slots, *flat = _GEN_HEAD.unpack_from(data)
    if version != GEN_VERSION:
        raise GalaFormatError(f"unsupported export version {version}")
    m3 = m**3
    sizes = {"X_o": (n_roots, 4), "X_Vbar": (slots, 10), "X_V": (slots, m3)}
    need = _GEN_HEAD.size + 8 * sum(a * b for a, b in sizes.values()) + slots
    if len(data) != need:
        raise GalaFormatError(f"export has {len(data)} bytes, expected {need}")
    out, off = {}, _GEN_HEAD.size
    for key, shape in sizes.items():
        n = shape[0] * shape[1]
        out[key] = np.frombuffer(data, dtype="<f8", count=n, offset=off).reshape(shape).copy()
        off += 8 * n
    out["mask"] = np.frombuffer(data, dtype=np.uint8, count=slots, offset=off).copy()
    stats = {d: (flat[2 * i], flat[2 * i + 1]) for i, d in enumerate(GEN_DOMAINS)}
    return out, stats
