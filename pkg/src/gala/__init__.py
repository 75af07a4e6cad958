"""Geometry-aware local adaptive grids for compact signed distance fields."""

from . import runtime  # noqa: F401  (installs the numba warning filter first)
from .errors import GalaError, GalaFormatError, MeshError, NumericalError
from .estimator import GalaSDF
from .fitting import fit_gala, query_sdf, refine
from .io import export_generation_data, load, save
from .mesh import TriMesh, load_mesh, normalize_mesh, sample_surface, save_mesh
from .metrics import chamfer, evaluate, hausdorff
from .reconstruct import flip_interior_signs, marching_cubes, reconstruct, sample_volume
from .rep import GalaRep
from .sdf import SdfOracle
from .shapes import box, box_with_fin, icosphere, torus

__version__ = "0.1.0"

__all__ = [
    "GalaError",
    "GalaFormatError",
    "GalaRep",
    "GalaSDF",
    "MeshError",
    "NumericalError",
    "SdfOracle",
    "TriMesh",
    "box",
    "box_with_fin",
    "chamfer",
    "evaluate",
    "export_generation_data",
    "fit_gala",
    "flip_interior_signs",
    "hausdorff",
    "icosphere",
    "load",
    "load_mesh",
    "marching_cubes",
    "normalize_mesh",
    "query_sdf",
    "reconstruct",
    "refine",
    "sample_surface",
    "sample_volume",
    "save",
    "save_mesh",
    "torus",
]
