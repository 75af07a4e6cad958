import time
from dataclasses import dataclass

import numpy as np
import pytest

import _verdicts
from gala.fitting import fit_gala, fit_sample_count
from gala.mesh import normalization_transform, normalize_mesh, sample_surface
from gala.metrics import evaluate
from gala.reconstruct import reconstruct
from gala.sdf import SdfOracle
from gala.shapes import box_with_fin, icosphere, torus

SHAPES = {
    "sphere": lambda: icosphere(0.3, 3),
    "torus": lambda: torus(0.25, 0.08),
    "fin": box_with_fin,
}


def pytest_terminal_summary(terminalreporter):
    if not _verdicts.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in _verdicts.summary_lines():
        terminalreporter.write_line(line)


@dataclass
class Shape:
    raw: object
    mesh: object
    oracle: SdfOracle
    samples: object
    seconds: float


@dataclass
class Fit:
    rep: object
    report: object
    recon: object
    metrics: dict
    seconds: float


@pytest.fixture(scope="session")
def shapes():
    cache = {}

    def get(name):
        if name not in cache:
            t0 = time.perf_counter()
            raw = SHAPES[name]()
            mesh = normalize_mesh(raw)
            oracle = SdfOracle(mesh)
            samples = sample_surface(mesh, fit_sample_count(mesh), 0)
            cache[name] = Shape(raw, mesh, oracle, samples, time.perf_counter() - t0)
        return cache[name]

    return get


@pytest.fixture(scope="session")
def fitted(shapes):
    """Default-parameter fits reconstructed at 256, cached per (shape, overrides)."""
    cache = {}

    def get(name, **overrides):
        key = (name, tuple(sorted(overrides.items())))
        if key not in cache:
            s = shapes(name)
            t0 = time.perf_counter()
            rep, report = fit_gala(s.mesh, normalize=False, samples=s.samples, oracle=s.oracle, **overrides)
            recon = reconstruct(rep, 256)
            seconds = time.perf_counter() - t0
            cache[key] = Fit(rep, report, recon, evaluate(s.mesh, recon), seconds)
        return cache[key]

    return get


@pytest.fixture(scope="session")
def fin_top(shapes):
    """Normalized height of the box top; only the fin rises above it."""
    raw = shapes("fin").raw
    center, diag = normalization_transform(raw)
    return (0.0 - center[1]) / diag


@pytest.fixture(scope="session")
def sphere(shapes):
    return shapes("sphere").mesh


@pytest.fixture(scope="session")
def sphere_oracle(shapes):
    return shapes("sphere").oracle


@pytest.fixture(scope="session")
def sphere_samples(shapes):
    return shapes("sphere").samples


@pytest.fixture(scope="session")
def small_rep(sphere, sphere_oracle, sphere_samples):
    """A quick quantized fit: 32 roots, a few refinement steps."""
    rep, _ = fit_gala(
        sphere, n_roots=32, iterations=5, batch_size=2048, normalize=False,
        samples=sphere_samples, oracle=sphere_oracle,
    )
    return rep


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
