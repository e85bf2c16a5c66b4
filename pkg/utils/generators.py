"""
Seeded random ensembles: simple measures, Hermitian matrices and
scattering models. Every function takes a numpy Generator so callers can
hand out independent streams spawned from one master seed.
"""
import math

import numpy as np

from analysis.opmeasure import SimpleOpMeasure
from analysis.scattering import ScatteringModel, build_example_e1, build_near_singular_model, sample_on_cells


def spawn_generators(seed: int, count: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(count)]


def random_matrix(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    return (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))) / math.sqrt(2)


def random_hermitian(rng: np.random.Generator, n: int) -> np.ndarray:
    a = random_matrix(rng, n, n)
    return (a + a.conj().T) / 2


def random_signature(rng: np.random.Generator, k: int) -> np.ndarray:
    return np.diag(rng.choice([-1.0, 1.0], size=k)).astype(np.complex128)


def random_simple_measure(
    rng: np.random.Generator,
    atoms: int,
    rows: int = 2,
    cols: int = 2,
    support: float = 10.0,
) -> SimpleOpMeasure:
    """Atoms uniform on (-support/2, support/2] with Gaussian matrix values."""
    positions = rng.uniform(-support / 2, support / 2, size=atoms)
    values = np.stack([random_matrix(rng, rows, cols) for _ in range(atoms)])
    return SimpleOpMeasure(positions, values)


def random_model(rng: np.random.Generator, dimension: int, channels: int, coupling: float = 1.0) -> ScatteringModel:
    """Gaussian Hermitian H0, Gaussian G and a random signature J."""
    return ScatteringModel.build(
        random_hermitian(rng, dimension),
        coupling * random_matrix(rng, channels, dimension),
        random_signature(rng, channels),
    )


def smooth_coupling(channels: int, k: int):
    """A fixed smooth G(x) of shape (k, channels) used by the refinement studies."""
    def g(x: float) -> np.ndarray:
        rows = np.arange(k)[:, None]
        cols = np.arange(channels)[None, :]
        return np.cos(math.pi * (rows + 1) * x + cols) * math.sin(math.pi * x)
    return g


def example_e1_model(grid_n: int, channels: int, k: int, coupling: float = 1.0, j=None) -> ScatteringModel:
    samples, _ = sample_on_cells(smooth_coupling(channels, k), grid_n)
    j = np.eye(k) if j is None else j
    return build_example_e1(grid_n, channels, coupling * samples, j)


def wavepacket(model: ScatteringModel, center: float = 0.5, width: float = 0.1) -> np.ndarray:
    """Normalized Gaussian bump over the eigenbasis ordering of a diagonal H0."""
    energies = np.real(np.diag(model.h0))
    psi = np.exp(-((energies - center) ** 2) / (2 * width ** 2)).astype(np.complex128)
    return psi / np.linalg.norm(psi)


def near_singular_model(rng: np.random.Generator, dimension: int, lam: float) -> ScatteringModel:
    """Gaussian H0 and a single Gaussian channel tuned so that lam is an eigenvalue of H1."""
    return build_near_singular_model(random_hermitian(rng, dimension), random_matrix(rng, 1, dimension), lam)
