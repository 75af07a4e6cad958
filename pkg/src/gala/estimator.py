"""scikit-learn style wrapper around fitting and reconstruction."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from . import io
from .fitting import DEFAULT_LR, DEFAULT_MIN_SCALE_RATIO, fit_gala
from .mesh import TriMesh, load_mesh
from .reconstruct import DEFAULT_RESOLUTION, reconstruct


class GalaSDF(BaseEstimator):
    """Fit a GALA representation to a watertight mesh and query it.

    ``fit`` takes a :class:`TriMesh` or a path to an OBJ/STL file. The fit
    happens in the normalized frame (bounding box centered, diagonal 1);
    ``predict`` and ``reconstruct`` work in the input mesh's coordinates, so
    predicted distances are scaled back by the diagonal.

    Examples
    --------
    >>> from gala import GalaSDF, icosphere
    >>> est = GalaSDF(n_roots=16, iterations=0).fit(icosphere(0.3, 3))
    >>> d = est.predict([[0.28, 0.0, 0.0], [0.32, 0.0, 0.0]])
    >>> bool(d[0] < 0 < d[1])
    True
    """

    def __init__(
        self,
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
        min_scale_ratio: float = DEFAULT_MIN_SCALE_RATIO,
    ):
        self.n_roots = n_roots
        self.alpha = alpha
        self.grid_res = grid_res
        self.depth = depth
        self.n_hist = n_hist
        self.mode = mode
        self.quantize = quantize
        self.iterations = iterations
        self.batch_size = batch_size
        self.lr = lr
        self.seed = seed
        self.fps_init = fps_init
        self.min_scale_ratio = min_scale_ratio

    def fit(self, X, y=None):
        mesh = X if isinstance(X, TriMesh) else load_mesh(X)
        rep, report = fit_gala(
            mesh,
            n_roots=self.n_roots,
            alpha=self.alpha,
            grid_res=self.grid_res,
            depth=self.depth,
            n_hist=self.n_hist,
            mode=self.mode,
            quantize=self.quantize,
            iterations=self.iterations,
            batch_size=self.batch_size,
            lr=self.lr,
            seed=self.seed,
            fps_init=self.fps_init,
            min_scale_ratio=self.min_scale_ratio,
        )
        self.rep_ = rep
        self.report_ = report
        self.center_, self.scale_ = report.normalization
        self.n_grids_ = rep.n_grids
        self.n_params_ = rep.parameter_count()
        return self

    def predict(self, X) -> np.ndarray:
        """Blended signed distance at each row of ``X`` (shape ``(n, 3)``).

        Only a band around the surface is covered by grids. Points outside
        every grid, including deep interior points, read the positive
        truncation value; :meth:`reconstruct` restores the interior sign.
        """
        check_is_fitted(self, "rep_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != 3:
            raise ValueError(f"expected points with 3 columns, got {X.shape[1]}")
        return self.rep_.query((X - self.center_) / self.scale_) * self.scale_

    def reconstruct(self, resolution: int = DEFAULT_RESOLUTION, flip: bool = True) -> TriMesh:
        check_is_fitted(self, "rep_")
        mesh = reconstruct(self.rep_, resolution, flip=flip)
        return TriMesh(mesh.vertices * self.scale_ + self.center_, mesh.triangles)

    def save(self, path) -> None:
        check_is_fitted(self, "rep_")
        io.save(self.rep_, path)
