"""The fitted representation: root voxels plus one local grid per non-empty leaf."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import _kernels as K
from . import quantize as qz
from .forest import Forest, subdivide

STAT_DOMAINS = ("p", "s", "p_g", "s_g")


class GridIndex:
    """Uniform cell lists over the bounding boxes of a fixed set of grids."""

    MAX_CELLS_PER_AXIS = 128

    def __init__(self, centers, rotations, scales):
        self.centers = np.ascontiguousarray(centers, dtype=np.float64).reshape(-1, 3)
        self.rotations = np.ascontiguousarray(rotations, dtype=np.float64).reshape(-1, 3, 3)
        scales = np.asarray(scales, dtype=np.float64).reshape(-1, 3)
        self.inv_scale = np.ascontiguousarray(1.0 / scales)
        reach = np.einsum("gij,gj->gi", np.abs(self.rotations), scales)
        lo = self.centers - reach
        hi = self.centers + reach
        if len(lo):
            self.origin = lo.min(axis=0) - 1e-9
            extent = float((hi.max(axis=0) - self.origin).max()) + 1e-9
            cell = max(float(np.median(2 * reach.max(axis=1))), extent / self.MAX_CELLS_PER_AXIS)
            dims = np.ceil((hi.max(axis=0) - self.origin) / cell).astype(np.int64) + 1
        else:
            self.origin = np.zeros(3)
            cell = 1.0
            dims = np.ones(3, dtype=np.int64)
        self.cell = float(cell)
        self.dims = dims
        self.start, self.items = K.build_cell_lists(lo, hi, self.origin, self.cell, self.dims)

    def args(self, values):
        return (
            self.centers, self.rotations, self.inv_scale, np.ascontiguousarray(values, dtype=np.float64),
            self.start, self.items, self.origin, self.cell, self.dims,
        )


@dataclass(eq=False)
class GalaRep:
    n_roots: int
    alpha: float
    grid_res: int
    depth: int
    n_hist: int
    root_centers: np.ndarray
    root_scales: np.ndarray
    leaf_index: np.ndarray
    centers: np.ndarray
    rotations: np.ndarray
    scales: np.ndarray
    values: np.ndarray
    quantized: bool = False
    euler_codes: np.ndarray | None = None
    center_codes: np.ndarray | None = None
    scale_codes: np.ndarray | None = None
    value_codes: np.ndarray | None = None
    stats: dict | None = None
    mode: str = "full"
    extras: dict = field(default_factory=dict)

    @property
    def n_grids(self) -> int:
        return len(self.leaf_index)

    @property
    def n_leaf_slots(self) -> int:
        return self.n_roots * 8**self.depth

    @property
    def parent_index(self) -> np.ndarray:
        return (self.leaf_index // 8).astype(np.uint32)

    @property
    def sibling_index(self) -> np.ndarray:
        return (self.leaf_index % 8).astype(np.uint8)

    def parameter_count(self, mode: str | None = None) -> int:
        mode = self.mode if mode is None else mode
        per_grid = self.grid_res**3 + (3 if mode == "no-adaptive" else 10)
        return 4 * self.n_roots + per_grid * self.n_grids

    @cached_property
    def index(self) -> GridIndex:
        return GridIndex(self.centers, self.rotations, self.scales)

    def forest(self) -> Forest:
        f = subdivide((self.root_centers, self.root_scales), self.alpha, self.depth)
        nonempty = np.zeros(f.n_leaves, dtype=bool)
        nonempty[self.leaf_index] = True
        f.nonempty = nonempty
        return f

    def occupancy(self) -> float:
        return self.n_grids / self.n_leaf_slots if self.n_leaf_slots else 0.0

    def quaternions(self) -> np.ndarray:
        return qz.matrix_to_quaternion(self.rotations).reshape(-1, 4)

    def compute_stats(self) -> dict:
        def span(a):
            a = np.asarray(a, dtype=np.float64)
            if a.size == 0:
                return (np.float32(0.0), np.float32(0.0))
            return (np.float32(a.min()), np.float32(a.max()))

        return {
            "p": span(self.root_centers),
            "s": span(self.root_scales),
            "p_g": span(self.centers),
            "s_g": span(self.scales),
        }

    def set_values(self, values: np.ndarray) -> None:
        """Replace the lattice values, re-deriving codes when quantized."""
        values = np.clip(np.asarray(values, dtype=np.float64), *qz.VALUE_RANGE)
        if self.quantized:
            self.value_codes = qz.quantize(values, *qz.VALUE_RANGE).astype(np.uint8)
            values = qz.dequantize(self.value_codes, *qz.VALUE_RANGE)
        self.values = values.reshape(-1, self.grid_res, self.grid_res, self.grid_res)

    def with_values(self, values: np.ndarray) -> "GalaRep":
        """Copy sharing geometry (and its index) but holding ``values`` verbatim."""
        clone = GalaRep(**{k: getattr(self, k) for k in self.__dataclass_fields__})
        clone.values = np.asarray(values, dtype=np.float64).reshape(self.values.shape)
        if "index" in self.__dict__:
            clone.__dict__["index"] = self.index
        return clone

    def query(self, points) -> np.ndarray:
        pts = np.ascontiguousarray(np.asarray(points, dtype=np.float64).reshape(-1, 3))
        out, _ = K.blend(pts, *self.index.args(self.values))
        return out
