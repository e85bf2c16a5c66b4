"""
Turns a run config into the objects a handler works on: measures, models,
grids and cone settings.
"""
import logging
import math

import numpy as np

from analysis.errors import ConfigError
from analysis.opmeasure import OpMeasure, ScalarMeasure, SimpleOpMeasure
from analysis.scattering import ScatteringModel, build_example_e1, build_remark_model, corollary_reference_measure, \
    sample_on_cells, trace_measure
from analysis.schatten import schatten_norm
from analysis.transforms import ConeSettings, Grid
from storage.fixtures import load_measure, load_model
from storage.models import ExperimentConfig
from utils.generators import near_singular_model, random_hermitian, random_model, random_simple_measure, smooth_coupling


def cone_settings(config: ExperimentConfig) -> ConeSettings:
    tol = config.tolerances
    return ConeSettings(
        ratio=float(tol.get("cone_ratio", 1.05)),
        x_samples=int(tol.get("cone_x_samples", 64)),
        refine_passes=int(tol.get("cone_refine", 1)),
    )


def measures_for(config: ExperimentConfig, data: dict) -> list[tuple[str, OpMeasure]]:
    """The fixture measure, or `ensemble` generated ones, each with a label."""
    if config.fixture:
        return [("fixture", load_measure(config.fixture))]
    spec = config.generator
    if spec.kind != "measure":
        raise ConfigError(f"Command '{config.command}' needs a measure generator, got kind '{spec.kind}'.")
    streams = data["streams"](config.ensemble)
    return [
        (f"m{i:03d}", OpMeasure(random_simple_measure(rng, spec.atoms, spec.rows, spec.cols, spec.support)))
        for i, rng in enumerate(streams)
    ]


def simple_part(label: str, mu: OpMeasure) -> SimpleOpMeasure:
    if mu.density.cell_count and np.any(mu.density.densities):
        raise ConfigError(f"Measure '{label}' has a density part; only simple measures are supported here.")
    return mu.atoms


def offset_grid(grid: Grid, mu: OpMeasure) -> tuple[Grid, bool]:
    """Shifts the grid by half a step when a node sits exactly on an atom."""
    nodes = grid.nodes()
    if np.any(np.isin(mu.atoms.positions, nodes)):
        logging.warning("Grid node coincides with an atom; shifting the grid by half a step.")
        return Grid(grid.start + grid.step / 2, grid.step, grid.count), True
    return grid, False


class ModelInput:
    """A scattering model together with the reference measure nu0 its hypotheses are checked against."""
    def __init__(self, model: ScatteringModel, nu0: ScalarMeasure, kind: str, diagonal: bool = False):
        self.model = model
        self.nu0 = nu0
        self.kind = kind
        self.diagonal = diagonal


def model_for(config: ExperimentConfig, data: dict) -> ModelInput:
    if config.fixture:
        model = load_model(config.fixture)
        return ModelInput(model, trace_measure(model), "fixture")
    spec = config.generator
    rng = data["streams"](1)[0]
    if spec.kind == "random_model":
        model = random_model(rng, spec.dimension, spec.channels, spec.coupling)
        return ModelInput(model, trace_measure(model), spec.kind)
    if spec.kind == "example_e1":
        samples, width = sample_on_cells(smooth_coupling(spec.channels, spec.rows), spec.grid_n)
        samples = spec.coupling * samples
        model = build_example_e1(spec.grid_n, spec.channels, samples, np.eye(spec.rows))
        nu0 = corollary_reference_measure(samples, width, config.p)
        return ModelInput(model, nu0, spec.kind, diagonal=True)
    if spec.kind == "near_singular":
        model = near_singular_model(rng, spec.dimension, config.ladder.lam)
        return ModelInput(model, trace_measure(model), spec.kind)
    if spec.kind == "remark":
        v = spec.coupling * random_hermitian(rng, spec.dimension)
        model = build_remark_model(v)
        return ModelInput(model, ScalarMeasure.point_mass(0.0, schatten_norm(v, config.p)), spec.kind)
    raise ConfigError(f"Unknown model generator kind '{spec.kind}'.")


def symmetric_grid(config: ExperimentConfig) -> Grid:
    return Grid.symmetric(config.grid.half_width, config.grid.count)


def det_order(config: ExperimentConfig) -> int:
    if config.q is not None:
        return int(config.q)
    return 2 if math.isinf(config.p) else max(1, math.ceil(config.p))
