"""Blended SDF queries, the MSE objective and value refinement with fitting-aware quantization."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from . import quantize as qz
from .errors import MeshError, NumericalError
from .forest import MIN_ROOT_SCALE, init_roots, subdivide
from .local_grid import MODES, extract_geometry, init_grid_values, lattice_unit, quantize_geometry
from .mesh import SAMPLES_PER_TRIANGLE, TriMesh, normalize_mesh, sample_surface
from .rep import GalaRep
from .sdf import SdfOracle

log = logging.getLogger(__name__)

OUTSIDE_VALUE = K.OUTSIDE
NEAR_SURFACE_BAND = 0.05
SURFACE_RATIO = 0.9
DEFAULT_LR = 1e-3
DEFAULT_MIN_SCALE_RATIO = 0.5
# below roughly this many samples on a unit-diagonal shape, neighbouring
# sample-bounded grids stop overlapping and the surface shell gets holes
MIN_FIT_SAMPLES = 100_000


@dataclass(frozen=True, eq=False)
class QueryBatch:
    points: np.ndarray
    targets: np.ndarray

    def __len__(self) -> int:
        return len(self.points)


def query_sdf(rep: GalaRep, x):
    """Blended SDF at one point or an ``(n, 3)`` array; 0.1 where no grid covers."""
    arr = np.asarray(x, dtype=np.float64)
    out = rep.query(arr)
    return float(out[0]) if arr.ndim == 1 else out


def mse_loss(rep: GalaRep, batch: QueryBatch) -> float:
    if len(batch) == 0:
        raise ValueError("empty batch")
    r = rep.query(batch.points) - batch.targets
    return float(np.mean(r * r))


def grad_values(rep: GalaRep, batch: QueryBatch) -> np.ndarray:
    """d(MSE)/dV for every lattice value, shape ``(G, m, m, m)``."""
    if len(batch) == 0:
        raise ValueError("empty batch")
    _, grad, _, _ = K.loss_and_grad(
        np.ascontiguousarray(batch.points, dtype=np.float64),
        np.ascontiguousarray(batch.targets, dtype=np.float64),
        *rep.index.args(rep.values),
    )
    return grad


def _uniform_ball(rng: np.random.Generator, n: int, radius: float) -> np.ndarray:
    d = rng.normal(size=(n, 3))
    d /= np.maximum(np.linalg.norm(d, axis=1, keepdims=True), 1e-300)
    return d * (radius * rng.random(n) ** (1 / 3))[:, None]


def sample_training_batch(
    oracle: SdfOracle,
    samples,
    n: int = 8192,
    seed=0,
    surface_ratio: float = SURFACE_RATIO,
    band: float = NEAR_SURFACE_BAND,
) -> QueryBatch:
    """Mostly near-surface query points with truncated ground-truth targets.

    A ``surface_ratio`` share are surface samples pushed along their normal by
    a uniform offset in ``[-band, band]``; the rest are uniform in the ball
    of radius 0.5 that bounds the normalized shape.
    """
    if n < 1:
        raise ValueError("batch size must be positive")
    rng = np.random.default_rng(seed)
    n_surf = int(round(n * surface_ratio))
    pick = rng.integers(0, len(samples.points), size=n_surf)
    offset = rng.uniform(-band, band, size=n_surf)
    near = samples.points[pick] + offset[:, None] * samples.normals[pick]
    far = _uniform_ball(rng, n - n_surf, 0.5)
    pts = np.concatenate([near, far])
    return QueryBatch(points=pts, targets=oracle.truncated_sdf(pts))


@dataclass
class Adam:
    lr: float = DEFAULT_LR
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: np.ndarray | None = None
    v: np.ndarray | None = None

    def step(self, params: np.ndarray, grad: np.ndarray, lr: float | None = None) -> None:
        if self.m is None:
            self.m = np.zeros_like(params)
            self.v = np.zeros_like(params)
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        mhat = self.m / (1 - self.beta1**self.t)
        vhat = self.v / (1 - self.beta2**self.t)
        params -= (self.lr if lr is None else lr) * mhat / (np.sqrt(vhat) + self.eps)


@dataclass
class RefineResult:
    losses: list[float] = field(default_factory=list)
    covered_losses: list[float] = field(default_factory=list)
    seconds: float = 0.0


def refine(
    rep: GalaRep,
    oracle: SdfOracle,
    samples,
    iterations: int = 400,
    batch_size: int = 8192,
    lr: float = DEFAULT_LR,
    milestones=(200, 300),
    gamma: float = 0.5,
    seed: int = 0,
    master: np.ndarray | None = None,
    surface_ratio: float = SURFACE_RATIO,
) -> RefineResult:
    """Gradient descent on the lattice values only.

    With quantization on, each forward pass sees the 8-bit values while Adam
    updates full-precision ``master`` values (straight-through). ``rep`` is
    updated in place; the stored values end up quantized.
    """
    result = RefineResult()
    if iterations <= 0 or rep.n_grids == 0:
        return result
    t0 = time.perf_counter()
    master = np.array(rep.values if master is None else master, dtype=np.float64)
    opt = Adam(lr=lr)
    index = rep.index
    for it in range(iterations):
        step_lr = lr * gamma ** sum(it >= m for m in milestones)
        batch = sample_training_batch(oracle, samples, batch_size, seed=(seed, it), surface_ratio=surface_ratio)
        fwd = qz.fake_quantize(master, *qz.VALUE_RANGE) if rep.quantized else master
        loss, grad, cov_sum, cov_n = K.loss_and_grad(batch.points, batch.targets, *index.args(fwd))
        if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
            raise NumericalError(f"non-finite loss at iteration {it}: {loss}")
        result.losses.append(float(loss))
        result.covered_losses.append(cov_sum / cov_n if cov_n else 0.0)
        opt.step(master, grad, step_lr)
        np.clip(master, *qz.VALUE_RANGE, out=master)
    rep.set_values(master)
    result.seconds = time.perf_counter() - t0
    return result


@dataclass
class FitReport:
    extraction_seconds: float = 0.0
    refinement_seconds: float = 0.0
    losses: list[float] = field(default_factory=list)
    covered_losses: list[float] = field(default_factory=list)
    n_samples: int = 0
    normalization: tuple | None = None

    @property
    def final_loss(self) -> float:
        return self.losses[-1] if self.losses else float("nan")


def fit_sample_count(mesh: TriMesh) -> int:
    """Ten samples per triangle, but never fewer than ``MIN_FIT_SAMPLES``."""
    return max(SAMPLES_PER_TRIANGLE * mesh.n_triangles, MIN_FIT_SAMPLES)


def _float32_roots(centers: np.ndarray, scales: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Round roots to float32 while keeping every covered point covered."""
    c32 = centers.astype(np.float32).astype(np.float64)
    need = np.maximum(scales, MIN_ROOT_SCALE) + np.abs(c32 - centers).max(axis=1)
    s32 = (need * (1 + 1e-6) + 1e-7).astype(np.float32).astype(np.float64)
    return c32, s32


def fit_gala(
    mesh: TriMesh,
    n_roots: int = 256,
    alpha: float = 0.2,
    grid_res: int = 5,
    depth: int = 1,
    n_hist: int | None = None,
    mode: str = "full",
    quantize: bool = True,
    iterations: int = 400,
    batch_size: int = 8192,
    lr: float = DEFAULT_LR,
    seed: int = 0,
    fps_init: int = 0,
    normalize: bool = True,
    n_samples: int | None = None,
    min_scale_ratio: float = DEFAULT_MIN_SCALE_RATIO,
    samples=None,
    oracle: SdfOracle | None = None,
) -> tuple[GalaRep, FitReport]:
    """Build and refine a representation of ``mesh``.

    ``samples`` and ``oracle`` can be passed in to reuse work across fits of
    the same (already normalized) mesh.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    lattice_unit(grid_res)
    if n_roots < 1 or n_roots > 0xFFFF or depth < 1:
        raise ValueError("n_roots must be in [1, 65535] and depth >= 1")
    report = FitReport()
    t0 = time.perf_counter()
    if normalize:
        from .mesh import normalization_transform

        report.normalization = normalization_transform(mesh)
        mesh = normalize_mesh(mesh)
    if oracle is None:
        oracle = SdfOracle(mesh)
    if samples is None:
        samples = sample_surface(mesh, fit_sample_count(mesh) if n_samples is None else n_samples, seed)
    report.n_samples = len(samples)
    if n_roots > len(samples):
        raise MeshError(f"{n_roots} roots requested but only {len(samples)} surface samples")

    roots = init_roots(samples, n_roots, fps_init)
    centers, scales = _float32_roots(np.array([r.p for r in roots]), np.array([r.s for r in roots]))
    alpha32 = float(np.float32(alpha))
    forest = subdivide((centers, scales), alpha32, depth)
    geom = extract_geometry(forest, samples, grid_res, mode, n_hist, min_scale_ratio)
    if quantize:
        geom = quantize_geometry(geom)
    values = init_grid_values(geom.centers, geom.rotations, geom.scales, grid_res, oracle)
    rep = GalaRep(
        n_roots=n_roots,
        alpha=alpha32,
        grid_res=grid_res,
        depth=depth,
        n_hist=2 * grid_res if n_hist is None else n_hist,
        root_centers=centers,
        root_scales=scales,
        leaf_index=geom.leaf_index,
        centers=geom.centers,
        rotations=geom.rotations,
        scales=geom.scales,
        values=values.reshape(-1, grid_res, grid_res, grid_res),
        quantized=quantize,
        euler_codes=geom.euler_codes,
        center_codes=geom.center_codes,
        scale_codes=geom.scale_codes,
        mode=mode,
    )
    master = rep.values.copy()
    rep.set_values(master)
    report.extraction_seconds = time.perf_counter() - t0
    log.info("extracted %d grids in %.2fs", rep.n_grids, report.extraction_seconds)

    res = refine(rep, oracle, samples, iterations, batch_size, lr, seed=seed, master=master)
    report.losses = res.losses
    report.covered_losses = res.covered_losses
    report.refinement_seconds = res.seconds
    rep.stats = rep.compute_stats()
    return rep, report
