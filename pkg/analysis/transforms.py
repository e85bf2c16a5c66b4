"""
Integral transforms and maximal functions of operator-valued measures.

Sign conventions: `hilbert` integrates against 1/(y - x) while
`hilbert_truncated` integrates against 1/(x - y), so
hilbert(mu, x) = -lim_{r->0} hilbert_truncated(mu, x, r). Every norm-level
quantity (H-sharp, weak quasi-norms) is insensitive to the sign.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar

from analysis.errors import (
    EmptyGridError,
    ExponentRangeError,
    HalfPlaneError,
    UndefinedAtAtomError,
)
from analysis.opmeasure import (
    AnyOpMeasure,
    DensityOpMeasure,
    OpMeasure,
    ScalarMeasure,
    SimpleOpMeasure,
    as_op_measure,
    total_variation,
    variation_measure,
)
from analysis.schatten import OPERATOR_NORM, schatten_norm, schatten_norms
from utils.parallel import ordered_map

MAXIMAL_KINDS = ("M", "H", "Hsharp", "T")


# --- Grids ---

@dataclass(frozen=True)
class ConePoint:
    """x + iy inside the open cone |x - vertex| < y."""
    vertex: float
    x: float
    y: float

    def __post_init__(self):
        if not (self.y > 0 and abs(self.x - self.vertex) < self.y):
            raise ValueError(f"({self.x}, {self.y}) is not inside the cone with vertex {self.vertex}.")

    @property
    def z(self) -> complex:
        return complex(self.x, self.y)


@dataclass(frozen=True)
class Grid:
    """
    Uniform grid start + k*step, k < count. Node k stands for the cell
    (node - step/2, node + step/2].
    """
    start: float
    step: float
    count: int

    def __post_init__(self):
        if not self.step > 0 or not math.isfinite(self.step):
            raise EmptyGridError(f"Grid step must be positive and finite, got {self.step}.")
        if self.count < 1:
            raise EmptyGridError("Grid has no nodes.")

    @classmethod
    def symmetric(cls, half_width: float, count: int) -> "Grid":
        """Cell-centred grid tiling (-half_width, half_width]; 0 is never a node for even counts."""
        step = 2.0 * half_width / count
        return cls(-half_width + step / 2.0, step, count)

    def nodes(self) -> np.ndarray:
        return self.start + self.step * np.arange(self.count)

    def cell_breakpoints(self) -> np.ndarray:
        return self.start - self.step / 2.0 + self.step * np.arange(self.count + 1)

    def with_samples(self, samples) -> "GridFunction":
        return GridFunction(self.start, self.step, samples)


@dataclass(frozen=True, eq=False)
class GridFunction:
    """
    Nonnegative step function: samples[k] on the cell of node start + k*step.
    """
    start: float
    step: float
    samples: np.ndarray

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float).reshape(-1)
        if not self.step > 0:
            raise EmptyGridError(f"Grid step must be positive, got {self.step}.")
        if not np.all(np.isfinite(samples)):
            raise EmptyGridError("Grid samples must be finite.")
        if np.any(samples < 0):
            raise EmptyGridError("Grid samples must be nonnegative.")
        object.__setattr__(self, "samples", samples)

    @classmethod
    def sample(cls, fn: Callable[[float], float], grid: Grid) -> "GridFunction":
        return grid.with_samples([abs(fn(float(x))) for x in grid.nodes()])

    @property
    def count(self) -> int:
        return int(self.samples.size)

    @property
    def grid(self) -> Grid:
        return Grid(self.start, self.step, self.count)

    def nodes(self) -> np.ndarray:
        return self.start + self.step * np.arange(self.count)

    def as_scalar_measure(self, power: float = 1.0) -> ScalarMeasure:
        """The step density samples**power dx."""
        if self.count == 0:
            return ScalarMeasure()
        return ScalarMeasure.step_density(self.grid.cell_breakpoints(), self.samples ** power)


# --- Cauchy transform ---

def _cauchy_stack(mu: OpMeasure, zs: np.ndarray) -> np.ndarray:
    zs = np.asarray(zs, dtype=np.complex128).reshape(-1)
    result = np.zeros((zs.size, *mu.shape), dtype=np.complex128)
    if mu.atoms.size:
        kernel = 1.0 / (mu.atoms.positions[None, :] - zs[:, None])
        result += np.einsum("zn,nrc->zrc", kernel, mu.atoms.values)
    if mu.density.cell_count:
        logs = np.log(mu.density.breakpoints[None, :] - zs[:, None])
        result += np.einsum("zn,nrc->zrc", np.diff(logs, axis=1), mu.density.densities)
    return result


def cauchy(mu: AnyOpMeasure, z: complex) -> np.ndarray:
    """
    C mu(z) = int dmu(t)/(t - z) for Im z > 0, summed exactly over atoms and
    integrated exactly (complex logarithm) over density cells.
    """
    z = complex(z)
    if not z.imag > 0:
        raise HalfPlaneError(f"Cauchy transform needs Im z > 0, got {z}.")
    return _cauchy_stack(as_op_measure(mu), np.array([z]))[0]


def cauchy_many(mu: AnyOpMeasure, zs) -> np.ndarray:
    zs = np.asarray(zs, dtype=np.complex128).reshape(-1)
    if np.any(zs.imag <= 0):
        raise HalfPlaneError("Cauchy transform needs Im z > 0 at every point.")
    return _cauchy_stack(as_op_measure(mu), zs)


# --- Hilbert transforms ---

def hilbert_truncated(mu: SimpleOpMeasure, x: float, r: float, *, strict: bool = False) -> np.ndarray:
    """
    H_r mu(x): sum of e_i/(x - x_i) over atoms with |x_i - x| >= r, or with
    |x_i - x| > r when `strict`.
    """
    if not r > 0:
        raise ValueError(f"Truncation radius must be positive, got {r}.")
    distances = np.abs(mu.positions - x)
    keep = distances > r if strict else distances >= r
    if not np.any(keep):
        return np.zeros(mu.shape, dtype=np.complex128)
    weights = 1.0 / (x - mu.positions[keep])
    return np.einsum("n,nrc->rc", weights, mu.values[keep])


def hilbert(mu: AnyOpMeasure, x: float) -> np.ndarray:
    """
    H mu(x) = p.v. int dmu(y)/(y - x).

    Density cells contribute through log|y - x| at their breakpoints; the
    value is undefined at an atom and at a breakpoint where the density jumps.
    """
    op = as_op_measure(mu)
    result = np.zeros(op.shape, dtype=np.complex128)
    if op.atoms.size:
        offsets = op.atoms.positions - x
        if np.any((offsets == 0) & np.any(op.atoms.values != 0, axis=(1, 2))):
            raise UndefinedAtAtomError(f"Hilbert transform is undefined at the atom {x}.")
        live = offsets != 0
        result += np.einsum("n,nrc->rc", 1.0 / offsets[live], op.atoms.values[live])
    if op.density.cell_count:
        zeros = np.zeros((1, *op.shape), dtype=np.complex128)
        dens = op.density.densities
        # Coefficient of log|b_k - x| is the jump d_{k-1} - d_k.
        jumps = np.concatenate([zeros, dens]) - np.concatenate([dens, zeros])
        distances = np.abs(op.density.breakpoints - x)
        at_break = distances == 0
        if np.any(at_break & np.any(jumps != 0, axis=(1, 2))):
            raise UndefinedAtAtomError(f"Hilbert transform is undefined at the density jump {x}.")
        live = ~at_break
        result += np.einsum("n,nrc->rc", np.log(distances[live]), jumps[live])
    return result


def hilbert_maximal(mu: SimpleOpMeasure, x: float, norm: float = OPERATOR_NORM) -> float:
    """
    H-sharp mu(x) = sup_{r>0} ||H_r mu(x)||.

    H_r is constant between consecutive atom distances, so the supremum is a
    maximum over r equal to each positive distance.
    """
    distances = np.abs(mu.positions - x)
    positive = distances > 0
    if not np.any(positive):
        return 0.0
    distances = distances[positive]
    terms = mu.values[positive] / (x - mu.positions[positive])[:, None, None]
    order = np.argsort(distances, kind="stable")[::-1]
    distances, terms = distances[order], terms[order]
    partial = np.cumsum(terms, axis=0)
    # The plateau at radius d includes every atom at distance >= d.
    last_of_group = np.r_[distances[1:] != distances[:-1], True]
    return float(np.max(schatten_norms(partial[last_of_group], norm)))


# --- Maximal functions of scalar measures ---

def _ball_masses(nu: ScalarMeasure, x: float, radii: np.ndarray) -> np.ndarray:
    """nu of the closed ball of each radius; density mass is radius-continuous."""
    masses = np.zeros(radii.size)
    if nu.positions.size:
        distances = np.abs(nu.positions - x)
        order = np.argsort(distances, kind="stable")
        distances, weights = distances[order], nu.weights[order]
        cumulative = np.concatenate([[0.0], np.cumsum(weights)])
        masses += cumulative[np.searchsorted(distances, radii, side="right")]
    if nu.densities.size:
        left = np.maximum(nu.breakpoints[None, :-1], x - radii[:, None])
        right = np.minimum(nu.breakpoints[None, 1:], x + radii[:, None])
        masses += np.clip(right - left, 0.0, None) @ nu.densities
    return masses


def hl_maximal(nu: ScalarMeasure, x: float) -> float:
    """
    M nu(x) = sup_{r>0} nu(B(x, r))/(2r) over open balls B(x, r).

    Between consecutive atom or breakpoint distances the ratio is monotone in
    r, so only those radii (approached from above) and the r -> 0 limit need
    checking. The open-ball supremum is reported even when not attained.
    """
    at_x = nu.positions == x
    if np.any(at_x & (nu.weights > 0)):
        return math.inf
    candidates = np.abs(np.concatenate([nu.positions, nu.breakpoints]) - x)
    candidates = np.unique(candidates[candidates > 0])
    best = 0.0
    if nu.densities.size:
        right = np.searchsorted(nu.breakpoints, x, side="right") - 1
        left = np.searchsorted(nu.breakpoints, x, side="left") - 1
        side_right = nu.densities[right] if 0 <= right < nu.densities.size else 0.0
        side_left = nu.densities[left] if 0 <= left < nu.densities.size else 0.0
        best = 0.5 * (float(side_left) + float(side_right))
    if candidates.size:
        best = max(best, float(np.max(_ball_masses(nu, x, candidates) / (2.0 * candidates))))
    return best


def mbeta_maximal(g: GridFunction, beta: float, x: float) -> float:
    """M_beta g(x) = (M |g|^beta (x))^{1/beta}, exact on step functions."""
    if not 0.0 < beta < 1.0:
        raise ExponentRangeError(f"beta must lie in (0, 1), got {beta}.")
    value = hl_maximal(g.as_scalar_measure(power=beta), x)
    return value ** (1.0 / beta)


def mbeta_profile(g: GridFunction, beta: float) -> GridFunction:
    """
    M_beta g at every node of g's own grid. A ball centred on a node has its
    extreme averages when it covers whole cells, so the sup runs over the
    symmetric windows of 2k + 1 cells.
    """
    if not 0.0 < beta < 1.0:
        raise ExponentRangeError(f"beta must lie in (0, 1), got {beta}.")
    powered = g.samples ** beta
    cumulative = np.concatenate([[0.0], np.cumsum(powered)])
    idx = np.arange(g.count)
    best = powered.copy()
    for k in range(1, g.count):
        lo = np.maximum(idx - k, 0)
        hi = np.minimum(idx + k + 1, g.count)
        np.maximum(best, (cumulative[hi] - cumulative[lo]) / (2 * k + 1), out=best)
    return g.grid.with_samples(best ** (1.0 / beta))


def poisson_average(mu, x: float, r: float, norm: float = OPERATOR_NORM) -> float:
    """
    (1/pi) int r/((x - y)^2 + r^2) d||mu||(y). Accepts an operator measure or
    an already formed ScalarMeasure.
    """
    if not r > 0:
        raise ValueError(f"Poisson scale must be positive, got {r}.")
    nu = mu if isinstance(mu, ScalarMeasure) else variation_measure(mu, norm)
    total = 0.0
    if nu.positions.size:
        total += float(np.sum(nu.weights * r / ((x - nu.positions) ** 2 + r * r)))
    if nu.densities.size:
        angles = np.arctan((nu.breakpoints - x) / r)
        total += float(np.dot(nu.densities, np.diff(angles)))
    return total / math.pi


# --- Non-tangential maximal function ---

@dataclass(frozen=True)
class ConeSettings:
    ratio: float = 1.05
    x_samples: int = 64
    refine_passes: int = 1

    def __post_init__(self):
        if not self.ratio > 1:
            raise ValueError(f"Cone ladder ratio must exceed 1, got {self.ratio}.")
        if self.x_samples < 2:
            raise ValueError("Cone sampling needs at least two x-samples per level.")


@dataclass(frozen=True)
class ConeEstimate:
    value: float
    samples: int
    argmax: complex | None = None


def _support_points(mu: OpMeasure) -> np.ndarray:
    return np.concatenate([mu.atoms.positions, mu.density.breakpoints])


def nontangential_maximal(
    mu: AnyOpMeasure,
    lam: float,
    r_min: float = 0.0,
    settings: ConeSettings = ConeSettings(),
    norm: float = OPERATOR_NORM,
) -> ConeEstimate:
    """
    sup{||C mu(x + iy)||: y > r_min, |x - lam| < y}, estimated on a geometric
    ladder in y and a uniform ladder in (x - lam)/y, then refined by bounded
    golden-section searches around the best sample.
    """
    if r_min < 0:
        raise ValueError(f"Cone truncation must be nonnegative, got {r_min}.")
    op = as_op_measure(mu)
    if total_variation(op, norm=norm) == 0:
        return ConeEstimate(0.0, 0)
    if r_min == 0 and np.any((op.atoms.positions == lam) & np.any(op.atoms.values != 0, axis=(1, 2))):
        return ConeEstimate(math.inf, 0)

    points = _support_points(op)
    span = max(float(np.ptp(points)), float(np.max(np.abs(points - lam))))
    if span == 0:
        span = 1.0
    y_low = max(r_min, 1e-6 * span)
    y_high = max(10.0 * span, settings.ratio * y_low)
    levels = int(math.ceil(math.log(y_high / y_low) / math.log(settings.ratio))) + 1
    ys = y_low * settings.ratio ** np.arange(levels)
    us = np.linspace(-1.0, 1.0, settings.x_samples)

    zs = (lam + np.outer(ys, us) + 1j * ys[:, None]).reshape(-1)
    values = schatten_norms(_cauchy_stack(op, zs), norm)
    best = int(np.argmax(values))
    best_value = float(values[best])
    y_star = float(ys[best // us.size])
    u_star = float(us[best % us.size])
    evaluations = zs.size

    def value_at(y: float, u: float) -> float:
        z = complex(lam + u * y, y)
        return float(schatten_norms(_cauchy_stack(op, np.array([z])), norm)[0])

    u_step = 2.0 / (settings.x_samples - 1)
    for _ in range(settings.refine_passes):
        y_bounds = (max(y_low, y_star / settings.ratio), y_star * settings.ratio)
        found = minimize_scalar(lambda y: -value_at(y, u_star), bounds=y_bounds, method="bounded",
                                options={"xatol": 1e-12 * y_star})
        evaluations += int(found.nfev)
        if -found.fun > best_value:
            best_value, y_star = float(-found.fun), float(found.x)
        u_bounds = (max(-1.0, u_star - u_step), min(1.0, u_star + u_step))
        found = minimize_scalar(lambda u: -value_at(y_star, u), bounds=u_bounds, method="bounded",
                                options={"xatol": 1e-12})
        evaluations += int(found.nfev)
        if -found.fun > best_value:
            best_value, u_star = float(-found.fun), float(found.x)

    logging.debug(f"Cone sup at {lam} (r_min={r_min}): {best_value} from {evaluations} samples.")
    return ConeEstimate(best_value, evaluations, complex(lam + u_star * y_star, y_star))


def cone_chain_residual(mu: SimpleOpMeasure, lam: float, x: float, r: float, norm: float = OPERATOR_NORM) -> float:
    """
    ||C mu(lam + x + ir) - H_{2r} mu(lam)|| with the truncated transform taken
    in the Cauchy-kernel orientation 1/(y - lam) over |y - lam| > 2r; bounded by
    (2 + 4 pi) M||mu||(lam) whenever |x| < r.
    """
    if not abs(x) < r:
        raise ValueError(f"Offset {x} must satisfy |x| < r = {r}.")
    truncated = -hilbert_truncated(mu, lam, 2.0 * r, strict=True)
    return schatten_norm(cauchy(mu, complex(lam + x, r)) - truncated, norm)


# --- Weak quasi-norm and grid profiles ---

def weak_quasinorm(f: GridFunction) -> float:
    """
    sup_t t |{f > t}| for the step function with the given samples: with the
    samples sorted decreasingly, max_k v_(k) * k * step.
    """
    if f.count == 0:
        raise EmptyGridError("Weak quasi-norm of an empty grid function.")
    ordered = np.sort(f.samples)[::-1]
    ranks = np.arange(1, ordered.size + 1)
    return float(np.max(ordered * ranks * f.step))


def _atom_cells(mu: OpMeasure, grid: Grid) -> np.ndarray:
    """Mask of grid nodes whose closed cell contains a nonzero atom."""
    nodes = grid.nodes()
    live = mu.atoms.positions[np.any(mu.atoms.values != 0, axis=(1, 2))]
    if live.size == 0:
        return np.zeros(nodes.size, dtype=bool)
    half = grid.step / 2.0
    distance = np.abs(nodes[:, None] - live[None, :])
    return np.any(distance <= half, axis=1)


def maximal_profile(
    kind: str,
    mu: AnyOpMeasure,
    grid: Grid,
    norm: float = OPERATOR_NORM,
    *,
    r_min: float = 0.0,
    cone: ConeSettings = ConeSettings(),
    threads: int = 1,
) -> GridFunction:
    """
    Samples one maximal function over the grid nodes. Cells holding an atom
    get sample 0; elsewhere the value is computed at the node.
    """
    if kind not in MAXIMAL_KINDS:
        raise ValueError(f"Unknown maximal function {kind!r}; expected one of {MAXIMAL_KINDS}.")
    op = as_op_measure(mu)
    if kind == "Hsharp" and op.density.cell_count:
        raise ValueError("H-sharp is defined here for simple measures only.")
    nu = variation_measure(op, norm)

    def evaluate(x: float) -> float:
        if kind == "M":
            return hl_maximal(nu, x)
        if kind == "Hsharp":
            return hilbert_maximal(op.atoms, x, norm)
        if kind == "T":
            return nontangential_maximal(op, x, r_min, cone, norm).value
        try:
            return schatten_norm(hilbert(op, x), norm)
        except UndefinedAtAtomError:
            logging.debug(f"Node {x} sits on a density jump; sample set to 0.")
            return 0.0

    masked = _atom_cells(op, grid)
    nodes = grid.nodes()
    live = [float(x) for x, m in zip(nodes, masked) if not m]
    values = iter(ordered_map(evaluate, live, threads))
    samples = np.array([0.0 if m else next(values) for m in masked])
    logging.debug(f"Profile {kind}: {int(masked.sum())} of {grid.count} nodes masked by atoms.")
    return grid.with_samples(samples)


def umd_ratio(f: DensityOpMeasure, grid: Grid, norm: float = 2.0, threads: int = 1) -> float:
    """
    int ||H(f dx)||^2 / int ||f||^2 on the grid: the smallest C_X that the
    L^2 bound for the Hilbert transform allows on this input.
    """
    energy = float(np.dot(f.cell_norms(norm) ** 2, f.cell_lengths())) if f.cell_count else 0.0
    if energy == 0:
        return 0.0
    profile = maximal_profile("H", OpMeasure.from_density(f), grid, norm, threads=threads)
    return float(np.sum(profile.samples ** 2) * grid.step) / energy


@dataclass(frozen=True)
class SharpChain:
    """(H-sharp mu(x))^beta against the three terms bounding it."""
    lhs: float
    local_hilbert: float
    near_field: float
    far_field: float

    @property
    def rhs(self) -> float:
        return self.local_hilbert + self.near_field + self.far_field

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs * (1 + 1e-12)


def sharp_chain_terms(
    mu: SimpleOpMeasure,
    x: float,
    beta: float,
    grid: Grid,
    c_x: float,
    norm: float = OPERATOR_NORM,
    threads: int = 1,
) -> SharpChain:
    """
    Terms of the pointwise bound
    (H# mu)^b <= [M_b ||H mu||]^b + (4 pi)^b [M||mu||]^b + (3 C_1)^b/(1-b) [M||mu||]^b,
    C_1 = 30 + 4 C_X, with ||H mu|| sampled on `grid`.
    """
    if not 0.0 < beta < 1.0:
        raise ExponentRangeError(f"beta must lie in (0, 1), got {beta}.")
    hilbert_norms = maximal_profile("H", mu, grid, norm, threads=threads)
    m_mu = hl_maximal(variation_measure(mu, norm), x)
    c_1 = 30.0 + 4.0 * c_x
    return SharpChain(
        lhs=hilbert_maximal(mu, x, norm) ** beta,
        local_hilbert=mbeta_maximal(hilbert_norms, beta, x) ** beta,
        near_field=(4.0 * math.pi) ** beta * m_mu ** beta,
        far_field=(3.0 * c_1) ** beta / (1.0 - beta) * m_mu ** beta,
    )
