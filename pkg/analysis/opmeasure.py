"""
Operator-valued measures on the real line.

Three concrete classes cover everything the laboratory needs:

- SimpleOpMeasure: finitely many matrix-valued atoms;
- DensityOpMeasure: a matrix-valued step density on consecutive cells
  (b_i, b_{i+1}], zero outside;
- OpMeasure: an atomic part plus a (possibly signed) density part.

ScalarMeasure is the nonnegative scalar analogue (atoms plus step density)
and is what `variation_measure` returns. The norm inside a total variation
is always an explicit Schatten index, math.inf meaning the operator norm.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Union

import numpy as np

from analysis import dyadic
from analysis.dyadic import Interval
from analysis.errors import ShapeMismatchError
from analysis.schatten import OPERATOR_NORM, as_matrix, schatten_norms

REAL_LINE = Interval.real_line()


def _as_stack(values, shape: tuple[int, int] | None) -> np.ndarray:
    stack = np.asarray(values, dtype=np.complex128)
    if stack.size == 0:
        if shape is None:
            raise ShapeMismatchError("An empty measure needs an explicit value shape.")
        return np.zeros((0, *shape), dtype=np.complex128)
    if stack.ndim == 2:
        # A stack of scalars or of vectors given without the trailing axis.
        stack = stack[:, :, None]
    elif stack.ndim == 1:
        stack = stack[:, None, None]
    if stack.ndim != 3:
        raise ShapeMismatchError(f"Atom values must form a (N, rows, cols) stack, got {stack.shape}.")
    if shape is not None and stack.shape[1:] != tuple(shape):
        raise ShapeMismatchError(f"Atom values have shape {stack.shape[1:]}, expected {tuple(shape)}.")
    if not np.all(np.isfinite(stack)):
        raise ShapeMismatchError("Measure values must be finite.")
    return stack


@dataclass(frozen=True, eq=False)
class SimpleOpMeasure:
    """
    sum_i delta_{x_i} e_i with strictly increasing positions.

    Atoms at bitwise-equal positions are merged by summing their values;
    nearby but distinct positions are kept apart.
    """
    positions: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        positions = np.asarray(self.positions, dtype=float).reshape(-1)
        shape = None
        values = np.asarray(self.values, dtype=np.complex128)
        if values.size == 0 and values.ndim == 3:
            shape = values.shape[1:]
        values = _as_stack(values, shape)
        if positions.shape[0] != values.shape[0]:
            raise ShapeMismatchError(f"{positions.shape[0]} positions but {values.shape[0]} atom values.")
        if not np.all(np.isfinite(positions)):
            raise ShapeMismatchError("Atom positions must be finite.")
        unique, inverse = np.unique(positions, return_inverse=True)
        if unique.shape[0] != positions.shape[0]:
            merged = np.zeros((unique.shape[0], *values.shape[1:]), dtype=np.complex128)
            np.add.at(merged, inverse, values)
            values = merged
        else:
            values = values[np.argsort(positions, kind="stable")]
        object.__setattr__(self, "positions", unique)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_atoms(cls, atoms: Iterable[tuple[float, object]], shape: tuple[int, int] | None = None) -> "SimpleOpMeasure":
        atoms = list(atoms)
        if not atoms:
            return cls.zero(shape)
        positions = [float(x) for x, _ in atoms]
        values = np.stack([as_matrix(v) for _, v in atoms])
        if shape is not None and values.shape[1:] != tuple(shape):
            raise ShapeMismatchError(f"Atom values have shape {values.shape[1:]}, expected {tuple(shape)}.")
        return cls(np.array(positions), values)

    @classmethod
    def zero(cls, shape: tuple[int, int] | None) -> "SimpleOpMeasure":
        if shape is None:
            raise ShapeMismatchError("The zero measure needs an explicit value shape.")
        return cls(np.zeros(0), np.zeros((0, *shape), dtype=np.complex128))

    @property
    def shape(self) -> tuple[int, int]:
        return tuple(self.values.shape[1:])

    @property
    def size(self) -> int:
        return int(self.positions.shape[0])

    def is_zero(self) -> bool:
        return self.size == 0 or not np.any(self.values)

    def support(self) -> Interval | None:
        """Smallest closed hull of the atoms, as (min - 0, max]; None when empty."""
        if self.size == 0:
            return None
        return Interval(float(np.nextafter(self.positions[0], -np.inf)), float(self.positions[-1]))

    def atom_norms(self, norm: float = OPERATOR_NORM) -> np.ndarray:
        return schatten_norms(self.values, norm) if self.size else np.zeros(0)

    def index_range(self, interval: Interval) -> tuple[int, int]:
        """Slice bounds of the atoms lying in (left, right]."""
        lo = int(np.searchsorted(self.positions, interval.left, side="right"))
        hi = int(np.searchsorted(self.positions, interval.right, side="right"))
        return lo, max(lo, hi)

    def restrict(self, interval: Interval) -> "SimpleOpMeasure":
        lo, hi = self.index_range(interval)
        return SimpleOpMeasure(self.positions[lo:hi], self.values[lo:hi].reshape(hi - lo, *self.shape))

    def mass(self, interval: Interval = REAL_LINE) -> np.ndarray:
        lo, hi = self.index_range(interval)
        return self.values[lo:hi].sum(axis=0) if hi > lo else np.zeros(self.shape, dtype=np.complex128)

    def scaled(self, factor: complex) -> "SimpleOpMeasure":
        return SimpleOpMeasure(self.positions, self.values * factor)

    def __add__(self, other: "SimpleOpMeasure") -> "SimpleOpMeasure":
        if self.shape != other.shape:
            raise ShapeMismatchError(f"Cannot add measures with shapes {self.shape} and {other.shape}.")
        return SimpleOpMeasure(
            np.concatenate([self.positions, other.positions]),
            np.concatenate([self.values, other.values]),
        )


@dataclass(frozen=True, eq=False)
class DensityOpMeasure:
    """
    Step density: `densities[i]` on (breakpoints[i], breakpoints[i+1]].
    """
    breakpoints: np.ndarray
    densities: np.ndarray

    def __post_init__(self):
        bps = np.asarray(self.breakpoints, dtype=float).reshape(-1)
        dens = np.asarray(self.densities, dtype=np.complex128)
        if bps.size == 0:
            bps = np.zeros(0)
        if dens.ndim != 3:
            raise ShapeMismatchError(f"Densities must form a (cells, rows, cols) stack, got {dens.shape}.")
        cells = max(bps.size - 1, 0)
        if dens.shape[0] != cells:
            raise ShapeMismatchError(f"{bps.size} breakpoints need {cells} densities, got {dens.shape[0]}.")
        if bps.size and (not np.all(np.isfinite(bps)) or np.any(np.diff(bps) <= 0)):
            raise ShapeMismatchError("Breakpoints must be finite and strictly increasing.")
        if not np.all(np.isfinite(dens)):
            raise ShapeMismatchError("Densities must be finite.")
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "densities", dens)

    @classmethod
    def zero(cls, shape: tuple[int, int]) -> "DensityOpMeasure":
        return cls(np.zeros(0), np.zeros((0, *shape), dtype=np.complex128))

    @classmethod
    def from_cells(cls, cells: Iterable[tuple[Interval, object]], shape: tuple[int, int]) -> "DensityOpMeasure":
        """
        Builds a step density from disjoint bounded cells; gaps between them
        get zero density.
        """
        cells = sorted(((c, as_matrix(d)) for c, d in cells), key=lambda item: item[0].left)
        cells = [(c, d) for c, d in cells if not c.is_empty]
        if not cells:
            return cls.zero(shape)
        breakpoints = [cells[0][0].left]
        densities = []
        for cell, density in cells:
            if density.shape != tuple(shape):
                raise ShapeMismatchError(f"Cell density has shape {density.shape}, expected {tuple(shape)}.")
            if cell.left < breakpoints[-1]:
                raise ShapeMismatchError(f"Cell ({cell.left}, {cell.right}] overlaps its predecessor.")
            if cell.left > breakpoints[-1]:
                densities.append(np.zeros(shape, dtype=np.complex128))
                breakpoints.append(cell.left)
            densities.append(density)
            breakpoints.append(cell.right)
        return cls(np.array(breakpoints), np.stack(densities))

    @property
    def shape(self) -> tuple[int, int]:
        return tuple(self.densities.shape[1:])

    @property
    def cell_count(self) -> int:
        return int(self.densities.shape[0])

    def cell_lengths(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    def support(self) -> Interval | None:
        if self.cell_count == 0:
            return None
        return Interval(float(self.breakpoints[0]), float(self.breakpoints[-1]))

    def overlaps(self, interval: Interval) -> np.ndarray:
        """Length of each cell inside `interval`."""
        if self.cell_count == 0:
            return np.zeros(0)
        left = np.maximum(self.breakpoints[:-1], interval.left)
        right = np.minimum(self.breakpoints[1:], interval.right)
        return np.clip(right - left, 0.0, None)

    def value_at(self, x: float) -> np.ndarray:
        if self.cell_count == 0:
            return np.zeros(self.shape, dtype=np.complex128)
        i = int(np.searchsorted(self.breakpoints, x, side="left")) - 1
        if 0 <= i < self.cell_count:
            return self.densities[i]
        return np.zeros(self.shape, dtype=np.complex128)

    def cell_norms(self, norm: float = OPERATOR_NORM) -> np.ndarray:
        return schatten_norms(self.densities, norm) if self.cell_count else np.zeros(0)

    def restrict(self, interval: Interval) -> "DensityOpMeasure":
        if self.cell_count == 0:
            return self
        left = max(interval.left, float(self.breakpoints[0]))
        right = min(interval.right, float(self.breakpoints[-1]))
        if right <= left:
            return DensityOpMeasure.zero(self.shape)
        inner = self.breakpoints[(self.breakpoints > left) & (self.breakpoints < right)]
        bps = np.concatenate([[left], inner, [right]])
        mids = 0.5 * (bps[:-1] + bps[1:])
        idx = np.searchsorted(self.breakpoints, mids, side="left") - 1
        return DensityOpMeasure(bps, self.densities[idx])

    def mass(self, interval: Interval = REAL_LINE) -> np.ndarray:
        if self.cell_count == 0:
            return np.zeros(self.shape, dtype=np.complex128)
        return np.einsum("i,ijk->jk", self.overlaps(interval), self.densities)

    def scaled(self, factor: complex) -> "DensityOpMeasure":
        return DensityOpMeasure(self.breakpoints, self.densities * factor)


@dataclass(frozen=True, eq=False)
class OpMeasure:
    """
    atoms + density * dx; the density may be signed (the bad part of a
    Calderon-Zygmund decomposition lives in this form).
    """
    atoms: SimpleOpMeasure
    density: DensityOpMeasure = field(default=None)

    def __post_init__(self):
        if self.density is None:
            object.__setattr__(self, "density", DensityOpMeasure.zero(self.atoms.shape))
        if self.density.cell_count and self.density.shape != self.atoms.shape:
            raise ShapeMismatchError(f"Atoms have shape {self.atoms.shape}, density {self.density.shape}.")

    @classmethod
    def from_density(cls, density: DensityOpMeasure) -> "OpMeasure":
        return cls(SimpleOpMeasure.zero(density.shape), density)

    @property
    def shape(self) -> tuple[int, int]:
        return self.atoms.shape

    def support(self) -> Interval | None:
        parts = [p for p in (self.atoms.support(), self.density.support()) if p is not None]
        if not parts:
            return None
        return Interval(min(p.left for p in parts), max(p.right for p in parts))

    def restrict(self, interval: Interval) -> "OpMeasure":
        return OpMeasure(self.atoms.restrict(interval), self.density.restrict(interval))

    def mass(self, interval: Interval = REAL_LINE) -> np.ndarray:
        return self.atoms.mass(interval) + self.density.mass(interval)


@dataclass(frozen=True, eq=False)
class ScalarMeasure:
    """
    Nonnegative scalar measure: atoms plus a step density.
    """
    positions: np.ndarray = field(default_factory=lambda: np.zeros(0))
    weights: np.ndarray = field(default_factory=lambda: np.zeros(0))
    breakpoints: np.ndarray = field(default_factory=lambda: np.zeros(0))
    densities: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        positions = np.asarray(self.positions, dtype=float).reshape(-1)
        weights = np.asarray(self.weights, dtype=float).reshape(-1)
        bps = np.asarray(self.breakpoints, dtype=float).reshape(-1)
        dens = np.asarray(self.densities, dtype=float).reshape(-1)
        if positions.shape != weights.shape:
            raise ShapeMismatchError("Scalar measure needs one weight per atom.")
        if dens.size != max(bps.size - 1, 0):
            raise ShapeMismatchError("Scalar measure needs one density value per cell.")
        if np.any(weights < 0) or np.any(dens < 0):
            raise ShapeMismatchError("Scalar measures are nonnegative.")
        if bps.size and np.any(np.diff(bps) <= 0):
            raise ShapeMismatchError("Breakpoints must be strictly increasing.")
        order = np.argsort(positions, kind="stable")
        positions, weights = positions[order], weights[order]
        unique, inverse = np.unique(positions, return_inverse=True)
        merged = np.zeros(unique.shape[0])
        np.add.at(merged, inverse, weights)
        object.__setattr__(self, "positions", unique)
        object.__setattr__(self, "weights", merged)
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "densities", dens)

    @classmethod
    def point_mass(cls, x: float, weight: float) -> "ScalarMeasure":
        return cls(np.array([x]), np.array([weight]))

    @classmethod
    def step_density(cls, breakpoints, densities) -> "ScalarMeasure":
        return cls(breakpoints=breakpoints, densities=densities)

    def is_zero(self) -> bool:
        return not np.any(self.weights) and not np.any(self.densities)

    def overlaps(self, interval: Interval) -> np.ndarray:
        if self.densities.size == 0:
            return np.zeros(0)
        left = np.maximum(self.breakpoints[:-1], interval.left)
        right = np.minimum(self.breakpoints[1:], interval.right)
        return np.clip(right - left, 0.0, None)

    def mass(self, interval: Interval = REAL_LINE) -> float:
        lo = int(np.searchsorted(self.positions, interval.left, side="right"))
        hi = int(np.searchsorted(self.positions, interval.right, side="right"))
        atoms = float(self.weights[lo:hi].sum()) if hi > lo else 0.0
        return atoms + float(np.dot(self.overlaps(interval), self.densities))

    def __call__(self, interval: Interval) -> float:
        return self.mass(interval)

    def total(self) -> float:
        return self.mass(REAL_LINE)

    def density_at(self, x: float) -> float:
        if self.densities.size == 0:
            return 0.0
        i = int(np.searchsorted(self.breakpoints, x, side="left")) - 1
        return float(self.densities[i]) if 0 <= i < self.densities.size else 0.0

    def restrict(self, interval: Interval) -> "ScalarMeasure":
        keep = interval.contains_many(self.positions)
        if self.densities.size == 0:
            return ScalarMeasure(self.positions[keep], self.weights[keep])
        left = max(interval.left, float(self.breakpoints[0]))
        right = min(interval.right, float(self.breakpoints[-1]))
        if right <= left:
            return ScalarMeasure(self.positions[keep], self.weights[keep])
        inner = self.breakpoints[(self.breakpoints > left) & (self.breakpoints < right)]
        bps = np.concatenate([[left], inner, [right]])
        mids = 0.5 * (bps[:-1] + bps[1:])
        idx = np.searchsorted(self.breakpoints, mids, side="left") - 1
        return ScalarMeasure(self.positions[keep], self.weights[keep], bps, self.densities[idx])


AnyOpMeasure = Union[SimpleOpMeasure, DensityOpMeasure, OpMeasure]


def as_op_measure(mu: AnyOpMeasure) -> OpMeasure:
    if isinstance(mu, OpMeasure):
        return mu
    if isinstance(mu, SimpleOpMeasure):
        return OpMeasure(mu)
    if isinstance(mu, DensityOpMeasure):
        return OpMeasure.from_density(mu)
    raise TypeError(f"Not an operator-valued measure: {type(mu).__name__}")


# --- Operations ---

def total_variation(mu: AnyOpMeasure, interval: Interval = REAL_LINE, norm: float = OPERATOR_NORM) -> float:
    """
    ||mu||(interval): sum of atom norms in the interval plus the integral of
    the density norm over it. Atoms and density are mutually singular, so
    the two contributions add.
    """
    mu = as_op_measure(mu)
    lo, hi = mu.atoms.index_range(interval)
    atoms = float(mu.atoms.atom_norms(norm)[lo:hi].sum()) if hi > lo else 0.0
    cells = float(np.dot(mu.density.overlaps(interval), mu.density.cell_norms(norm))) if mu.density.cell_count else 0.0
    return atoms + cells


def variation_measure(mu: AnyOpMeasure, norm: float = OPERATOR_NORM) -> ScalarMeasure:
    """The scalar measure ||mu||(.)"""
    mu = as_op_measure(mu)
    return ScalarMeasure(
        mu.atoms.positions,
        mu.atoms.atom_norms(norm),
        mu.density.breakpoints,
        mu.density.cell_norms(norm),
    )


def mass(mu: AnyOpMeasure, interval: Interval = REAL_LINE) -> np.ndarray:
    """mu(interval) as a matrix."""
    return as_op_measure(mu).mass(interval)


def restrict(mu, interval: Interval):
    """Restriction to (left, right]; returns the same measure type."""
    return mu.restrict(interval)


def discretize(mu: AnyOpMeasure, n: int) -> SimpleOpMeasure:
    """
    mu_n = sum over scale-n dyadic cells Q of delta_{c(Q)} mu(Q).

    Only nonempty cells (cells holding an atom or meeting the density
    support) receive an atom.
    """
    op = as_op_measure(mu)
    centers: list[float] = []
    values: list[np.ndarray] = []
    for x, e in zip(op.atoms.positions, op.atoms.values):
        centers.append(dyadic.containing(float(x), n).center)
        values.append(e)
    if op.density.cell_count:
        support = op.density.support()
        cells = dyadic.cells_covering(support, n)
        logging.debug(f"Discretizing density over {len(cells)} cells at scale {n}.")
        for q in cells:
            centers.append(q.center)
            values.append(op.density.mass(q.as_interval()))
    if not centers:
        return SimpleOpMeasure.zero(op.shape)
    return SimpleOpMeasure(np.array(centers), np.stack(values))
