"""Command-line driver: ``gala fit | reconstruct | eval | export-gen | info``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import io
from .errors import GalaFormatError, MeshError, NumericalError
from .fitting import DEFAULT_LR, fit_gala
from .local_grid import MODES
from .mesh import load_mesh, normalize_mesh, save_mesh
from .metrics import DEFAULT_SAMPLES, evaluate
from .reconstruct import DEFAULT_RESOLUTION, flip_interior_signs, marching_cubes, sample_volume
from .runtime import set_threads

EXIT_OK = 0
EXIT_BAD_INPUT = 2
EXIT_NUMERIC = 3
EXIT_IO = 4

log = logging.getLogger("gala")


class Report:
    """Ordered key/value pairs printed as ``key=value`` lines or one JSON object."""

    def __init__(self, fmt: str = "kv"):
        self.fmt = fmt
        self.items: dict[str, object] = {}

    def __setitem__(self, key: str, value) -> None:
        if isinstance(value, (np.floating, np.integer)):
            value = value.item()
        self.items[key] = value

    def emit(self, stream=None) -> None:
        stream = sys.stdout if stream is None else stream
        if self.fmt == "json":
            stream.write(json.dumps(self.items, indent=2) + "\n")
            return
        for k, v in self.items.items():
            if isinstance(v, float):
                v = f"{v:.6g}"
            stream.write(f"{k}={v}\n")


def _cmd_fit(args, report: Report) -> None:
    if not args.quantize and args.output is not None:
        raise ValueError("unquantized fits cannot be stored as .gala files; drop --output or --no-quantize")
    mesh = load_mesh(args.input)
    t0 = time.perf_counter()
    rep, fit = fit_gala(
        mesh,
        n_roots=args.roots,
        alpha=args.alpha,
        grid_res=args.grid_res,
        depth=args.depth,
        mode=args.mode,
        quantize=args.quantize,
        iterations=args.iters,
        batch_size=args.batch,
        lr=args.lr,
        seed=args.seed,
        fps_init=args.fps_init,
    )
    total = time.perf_counter() - t0
    report["grids"] = rep.n_grids
    report["occupancy"] = rep.occupancy()
    report["parameters"] = rep.parameter_count()
    report["final_mse"] = fit.final_loss
    report["final_covered_mse"] = fit.covered_losses[-1] if fit.covered_losses else float("nan")
    report["extraction_seconds"] = fit.extraction_seconds
    report["refinement_seconds"] = fit.refinement_seconds
    report["total_seconds"] = total
    if args.output is not None:
        io.save(rep, args.output)
        report["output"] = str(args.output)
        report["bytes"] = Path(args.output).stat().st_size
    if args.mesh_output is not None:
        t1 = time.perf_counter()
        save_mesh(_extract(rep, args.res, True, "slices", report), args.mesh_output)
        report["reconstruct_seconds"] = time.perf_counter() - t1


def _extract(rep, res: int, flip: bool, flip_mode: str, report: Report):
    t0 = time.perf_counter()
    vol = sample_volume(rep, res)
    t1 = time.perf_counter()
    if flip:
        vol = flip_interior_signs(vol, mode=flip_mode)
    t2 = time.perf_counter()
    mesh = marching_cubes(vol)
    t3 = time.perf_counter()
    report["sample_seconds"] = t1 - t0
    report["flip_seconds"] = t2 - t1
    report["marching_cubes_seconds"] = t3 - t2
    report["triangles"] = mesh.n_triangles
    return mesh


def _cmd_reconstruct(args, report: Report) -> None:
    rep = io.load(args.input)
    mesh = _extract(rep, args.res, not args.no_flip, args.flip_mode, report)
    save_mesh(mesh, args.output)
    report["output"] = str(args.output)


def _cmd_eval(args, report: Report) -> None:
    a = load_mesh(args.a)
    b = load_mesh(args.b)
    if args.normalize_a:
        a = normalize_mesh(a)
    res = evaluate(a, b, args.samples, args.seed)
    report["chamfer"] = res["chamfer"]
    report["hausdorff"] = res["hausdorff"]
    report["samples"] = args.samples


def _cmd_export_gen(args, report: Report) -> None:
    rep = io.load(args.input)
    stats = io.load_stats(args.stats) if args.stats is not None and Path(args.stats).exists() else None
    if stats is None:
        stats = io.export_stats(rep)
        if args.stats is not None:
            io.save_stats(stats, args.stats)
            report["stats_written"] = str(args.stats)
    arrays = io.export_generation_data(rep, args.output, stats)
    report["slots"] = len(arrays["mask"])
    report["real_leaves"] = int(arrays["mask"].sum())
    report["output"] = str(args.output)


def _cmd_info(args, report: Report) -> None:
    rep = io.load(args.input)
    report["n_roots"] = rep.n_roots
    report["depth"] = rep.depth
    report["grid_res"] = rep.grid_res
    report["n_hist"] = rep.n_hist
    report["alpha"] = rep.alpha
    report["grids"] = rep.n_grids
    report["leaf_slots"] = rep.n_leaf_slots
    report["occupancy"] = rep.occupancy()
    report["parameters"] = rep.parameter_count()
    report["bytes"] = Path(args.input).stat().st_size
    for domain, (lo, hi) in rep.stats.items():
        report[f"{domain}_min"] = float(lo)
        report[f"{domain}_max"] = float(hi)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=None, help="worker threads (default: $GALA_THREADS or all cores)")
    common.add_argument("--format", choices=("kv", "json"), default="kv", help="report format")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="gala", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", parents=[common], help="fit a mesh and write a .gala file")
    f.add_argument("--input", required=True, type=Path)
    f.add_argument("--output", type=Path)
    f.add_argument("--roots", type=int, default=256)
    f.add_argument("--alpha", type=float, default=0.2)
    f.add_argument("--grid-res", type=int, default=5)
    f.add_argument("--depth", type=int, default=1)
    f.add_argument("--iters", type=int, default=400)
    f.add_argument("--batch", type=int, default=8192)
    f.add_argument("--lr", type=float, default=DEFAULT_LR)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--fps-init", type=int, default=0)
    f.add_argument("--no-quantize", dest="quantize", action="store_false")
    f.add_argument("--mode", choices=MODES, default="full")
    f.add_argument("--mesh-output", type=Path, help="also reconstruct and write a mesh")
    f.add_argument("--res", type=int, default=DEFAULT_RESOLUTION)
    f.set_defaults(func=_cmd_fit)

    r = sub.add_parser("reconstruct", parents=[common], help="extract a mesh from a .gala file")
    r.add_argument("--input", required=True, type=Path)
    r.add_argument("--output", required=True, type=Path)
    r.add_argument("--res", type=int, default=DEFAULT_RESOLUTION)
    r.add_argument("--no-flip", action="store_true")
    r.add_argument("--flip-mode", choices=("slices", "3d"), default="slices")
    r.set_defaults(func=_cmd_reconstruct)

    e = sub.add_parser("eval", parents=[common], help="Chamfer and Hausdorff distance between two meshes")
    e.add_argument("--a", required=True, type=Path)
    e.add_argument("--b", required=True, type=Path)
    e.add_argument("--samples", type=int, default=DEFAULT_SAMPLES)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--normalize-a", action="store_true", help="normalize mesh A first (compare a raw input to a reconstruction)")
    e.set_defaults(func=_cmd_eval)

    x = sub.add_parser("export-gen", parents=[common], help="write flattened generation tensors")
    x.add_argument("--input", required=True, type=Path)
    x.add_argument("--output", required=True, type=Path)
    x.add_argument("--stats", type=Path, help="statistics sidecar: read if it exists, else written")
    x.set_defaults(func=_cmd_export_gen)

    i = sub.add_parser("info", parents=[common], help="header, parameter count and occupancy")
    i.add_argument("--input", required=True, type=Path)
    i.set_defaults(func=_cmd_info)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    report = Report(args.format)
    try:
        report["threads"] = set_threads(args.threads)
        args.func(args, report)
    except NumericalError as exc:
        print(f"gala: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (MeshError, GalaFormatError, ValueError) as exc:
        print(f"gala: bad input: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except OSError as exc:
        print(f"gala: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    report.emit()
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
