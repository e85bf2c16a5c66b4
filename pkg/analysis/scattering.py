"""
Finite-dimensional scattering models H1 = H0 + G* J G.

Everything spectral goes through Hermitian eigendecompositions, which are
cached per matrix. At finite dimension the "absolutely continuous" part is
modelled by a discretized multiplication operator (see
`build_example_e1`) and every limit statement is reported as a ladder or a
time series, never as a converged value.
"""
import logging
import math
import threading
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from cachetools import LRUCache, cached
from cachetools.keys import hashkey
from scipy import linalg

from analysis import dyadic
from analysis.dyadic import Interval
from analysis.errors import (
    HalfPlaneError,
    LadderError,
    NonHermitianError,
    ShapeMismatchError,
    SingularPerturbationError,
)
from analysis.opmeasure import ScalarMeasure, SimpleOpMeasure, total_variation
from analysis.schatten import (
    OPERATOR_NORM,
    RegularizedDeterminant,
    as_matrix,
    regularized_determinant,
    schatten_norm,
    schatten_norms,
    smallest_singular_value_of_shift,
)

HERMITIAN_TOLERANCE = 1e-12
SINGULAR_THRESHOLD = 1e-10
IDENTITY_TOLERANCE = 1e-10
# Relative size of ||G u|| below which an eigenvector counts as invisible to G.
VISIBILITY_TOLERANCE = 1e-12


def _check_hermitian(name: str, m: np.ndarray) -> None:
    if m.shape[0] != m.shape[1]:
        raise ShapeMismatchError(f"{name} must be square, got shape {m.shape}.")
    scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
    if m.size and float(np.max(np.abs(m - m.conj().T))) > HERMITIAN_TOLERANCE * scale:
        raise NonHermitianError(f"{name} is not Hermitian.")


@dataclass(frozen=True, eq=False)
class ScatteringModel:
    h0: np.ndarray
    g: np.ndarray
    j: np.ndarray
    h1: np.ndarray

    @classmethod
    def build(cls, h0, g, j) -> "ScatteringModel":
        h0, g, j = as_matrix(h0).copy(), as_matrix(g).copy(), as_matrix(j).copy()
        _check_hermitian("H0", h0)
        _check_hermitian("J", j)
        if g.shape[1] != h0.shape[0]:
            raise ShapeMismatchError(f"G has {g.shape[1]} columns but H0 acts on dimension {h0.shape[0]}.")
        if j.shape[0] != g.shape[0]:
            raise ShapeMismatchError(f"J acts on dimension {j.shape[0]} but G has {g.shape[0]} rows.")
        h1 = h0 + g.conj().T @ j @ g
        for m in (h0, g, j, h1):
            m.setflags(write=False)
        return cls(h0=h0, g=g, j=j, h1=h1)

    @property
    def dimension(self) -> int:
        return int(self.h0.shape[0])

    @property
    def channels(self) -> int:
        return int(self.g.shape[0])

    def hamiltonian(self, which: int) -> np.ndarray:
        if which not in (0, 1):
            raise ValueError(f"Operator index must be 0 or 1, got {which}.")
        return self.h0 if which == 0 else self.h1


@dataclass(frozen=True, eq=False)
class SpectralData:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruction_residual(self, h: np.ndarray) -> float:
        u, lam = self.eigenvectors, self.eigenvalues
        return float(np.linalg.norm(h - (u * lam) @ u.conj().T, 2))


_SPECTRAL_CACHE = LRUCache(maxsize=128)
_SPECTRAL_LOCK = threading.Lock()


@cached(_SPECTRAL_CACHE, key=lambda h: hashkey(h.shape, h.tobytes()), lock=_SPECTRAL_LOCK)
def _eigh(h: np.ndarray) -> SpectralData:
    logging.debug(f"Diagonalising a {h.shape[0]}x{h.shape[0]} Hermitian matrix.")
    lam, u = linalg.eigh(h)
    lam.setflags(write=False)
    u.setflags(write=False)
    return SpectralData(eigenvalues=lam, eigenvectors=u)


def spectral_data(h) -> SpectralData:
    h = np.ascontiguousarray(as_matrix(h))
    return _eigh(h)


# --- Spectral measures ---

def spectral_projection(h, delta: Interval) -> np.ndarray:
    """E_H(delta) for the half-open interval delta = (a, b]."""
    data = spectral_data(h)
    u = data.eigenvectors[:, delta.contains_many(data.eigenvalues)]
    return u @ u.conj().T


def _visible_columns(model: ScatteringModel, which: int) -> tuple[np.ndarray, np.ndarray]:
    data = spectral_data(model.hamiltonian(which))
    return data.eigenvalues, model.g @ data.eigenvectors


def sandwiched_measure(model: ScatteringModel, delta: Interval, which: int = 0) -> np.ndarray:
    """mu_j(delta) = G E_{H_j}(delta) G*, a k x k positive semidefinite matrix."""
    lam, gu = _visible_columns(model, which)
    cols = gu[:, delta.contains_many(lam)]
    return cols @ cols.conj().T


def spectral_measure(model: ScatteringModel, which: int = 0) -> SimpleOpMeasure:
    """mu_j realised atomically: an atom (G u_m)(G u_m)* at each eigenvalue."""
    lam, gu = _visible_columns(model, which)
    values = np.einsum("im,jm->mij", gu, gu.conj())
    return SimpleOpMeasure(lam, values)


def vector_measure(model: ScatteringModel, which: int, psi) -> SimpleOpMeasure:
    """The K-valued measure G E_{H_j}(.) G* psi, with k x 1 atoms."""
    psi = as_matrix(psi)
    if psi.shape != (model.channels, 1):
        raise ShapeMismatchError(f"psi must be a vector of length {model.channels}, got shape {psi.shape}.")
    lam, gu = _visible_columns(model, which)
    coefficients = (gu.conj().T @ psi)[:, 0]
    values = (gu * coefficients[None, :]).T[:, :, None]
    return SimpleOpMeasure(lam, values)


def trace_measure(model: ScatteringModel, which: int = 0) -> ScalarMeasure:
    """nu(delta) = Tr mu_j(delta); it dominates mu_j in trace norm with equality."""
    lam, gu = _visible_columns(model, which)
    return ScalarMeasure(lam, np.sum(np.abs(gu) ** 2, axis=0))


def variation_growth(model: ScatteringModel, which: int, p: float) -> float:
    """||mu_j||(R) measured in S_p."""
    return total_variation(spectral_measure(model, which), norm=p)


# --- Resolvents ---

def sandwiched_resolvent(model: ScatteringModel, which: int, z: complex) -> np.ndarray:
    """B_j(z) = G (H_j - z)^{-1} G*."""
    z = complex(z)
    if z.imag == 0:
        raise HalfPlaneError(f"Sandwiched resolvent needs Im z != 0, got {z}.")
    h = model.hamiltonian(which)
    shifted = h - z * np.eye(model.dimension)
    return model.g @ linalg.solve(shifted, model.g.conj().T)


@dataclass(frozen=True)
class IdentityResiduals:
    r1: float
    r2: float
    tolerance: float

    @property
    def holds(self) -> bool:
        return self.r1 <= self.tolerance and self.r2 <= self.tolerance


def resolvent_identity_residuals(model: ScatteringModel, z: complex) -> IdentityResiduals:
    """
    r1 = ||(I + B0 J)(I - B1 J) - I|| and r2 = ||B1 - (I + B0 J)^{-1} B0||.

    Raises SingularPerturbationError rather than inverting a numerically
    singular I + B0 J.
    """
    b0 = sandwiched_resolvent(model, 0, z)
    b1 = sandwiched_resolvent(model, 1, z)
    eye = np.eye(model.channels)
    sigma = smallest_singular_value_of_shift(b0 @ model.j)
    if sigma < SINGULAR_THRESHOLD:
        raise SingularPerturbationError(z, sigma)
    shift = eye + b0 @ model.j
    r1 = schatten_norm(shift @ (eye - b1 @ model.j) - eye)
    r2 = schatten_norm(b1 - linalg.solve(shift, b0))
    tolerance = IDENTITY_TOLERANCE * (1 + schatten_norm(b0)) * (1 + schatten_norm(b1))
    return IdentityResiduals(r1=r1, r2=r2, tolerance=tolerance)


def det_probe_detail(model: ScatteringModel, lam: float, eps: float, q: int) -> RegularizedDeterminant:
    if not eps > 0:
        raise LadderError(f"Probe offset must be positive, got {eps}.")
    b0 = sandwiched_resolvent(model, 0, complex(lam, eps))
    return regularized_determinant(b0 @ model.j, q)


def det_probe(model: ScatteringModel, lam: float, eps: float, q: int) -> complex:
    """d(lam + i eps) = Det_q(I + B0(lam + i eps) J)."""
    return det_probe_detail(model, lam, eps, q).value


# --- Hypotheses ---

def _eigen_windows(lam: np.ndarray) -> list[Interval]:
    """(l - eta, l] per distinct eigenvalue, eta half the gap to the nearest neighbour."""
    distinct = np.unique(lam)
    if distinct.size == 1:
        return [Interval(float(distinct[0]) - 1.0, float(distinct[0]))]
    gaps = np.diff(distinct)
    nearest = np.minimum(np.r_[np.inf, gaps], np.r_[gaps, np.inf])
    return [Interval(float(x - g / 2), float(x)) for x, g in zip(distinct, nearest)]


def probe_intervals(lam: np.ndarray, delta: Interval, probe_depth: int, eigen_windows: bool = True) -> list[Interval]:
    """
    Dyadic sub-intervals of delta intersected with the spectral hull, down to
    `probe_depth` levels below the coarsest covering scale, plus one short
    window ending at each eigenvalue.
    """
    if lam.size == 0:
        return []
    low = float(lam.min()) - 1.0 if lam.min() == lam.max() else float(np.nextafter(lam.min(), -np.inf))
    hull = delta.intersect(Interval(low, float(lam.max())))
    probes: list[Interval] = []
    if not hull.is_empty:
        top = min(-math.ceil(math.log2(hull.length)), dyadic.MAX_SCALE - probe_depth)
        for n in range(top, top + probe_depth + 1):
            for q in dyadic.cells_covering(hull, n):
                piece = q.as_interval().intersect(delta)
                if not piece.is_empty:
                    probes.append(piece)
    if eigen_windows:
        probes += [w.intersect(delta) for w in _eigen_windows(lam) if delta.contains(w.right)]
    return probes


@dataclass
class HypothesisReport:
    worst_margin: float
    violation: Interval | None
    probes: int
    tolerance: float
    margins: list[tuple[Interval, float]] = field(default_factory=list, repr=False)

    @property
    def passed(self) -> bool:
        return self.worst_margin >= -self.tolerance


def hypothesis_check(
    model: ScatteringModel,
    p: float,
    delta: Interval,
    nu0: ScalarMeasure,
    probe_depth: int,
    which: int = 0,
) -> HypothesisReport:
    """
    Checks ||G E_{H_j}(d) G*||_p <= nu0(d) over the probe intervals d of
    `delta`; p = inf gives the operator-norm form.
    """
    lam, _ = _visible_columns(model, which)
    probes = probe_intervals(lam, delta, probe_depth)
    tolerance = 1e-10 * max(1.0, nu0.total())
    report = HypothesisReport(worst_margin=math.inf, violation=None, probes=len(probes), tolerance=tolerance)
    for d in probes:
        margin = nu0.mass(d) - schatten_norm(sandwiched_measure(model, d, which), p)
        report.margins.append((d, margin))
        if margin < report.worst_margin:
            report.worst_margin = margin
            if margin < -tolerance:
                report.violation = d
    if report.violation is not None:
        logging.info(f"Hypothesis fails on ({report.violation.left}, {report.violation.right}] "
                     f"by {-report.worst_margin}.")
    return report


def kato_smoothness_constant(model: ScatteringModel, which: int, delta: Interval, probe_depth: int) -> float:
    """
    max over probed dyadic d of ||G E_H(d) G*|| / |d|; +inf once a probe
    isolates an eigenvalue that G sees.
    """
    lam, gu = _visible_columns(model, which)
    g_scale = max(1.0, schatten_norm(model.g)) if model.g.size else 1.0
    visible = np.linalg.norm(gu, axis=0) > VISIBILITY_TOLERANCE * g_scale
    distinct = np.unique(lam)
    gaps = np.diff(distinct)
    nearest = np.minimum(np.r_[np.inf, gaps], np.r_[gaps, np.inf])
    isolation = dict(zip(distinct.tolist(), nearest.tolist()))
    best = 0.0
    for d in probe_intervals(lam, delta, probe_depth, eigen_windows=False):
        inside = d.contains_many(lam)
        if not np.any(inside & visible):
            continue
        if any(d.length < isolation[float(x)] for x in lam[inside & visible]):
            logging.debug(f"Probe ({d.left}, {d.right}] isolates an eigenvalue.")
            return math.inf
        best = max(best, schatten_norm(sandwiched_measure(model, d, which)) / d.length)
    return best


# --- Boundary values ---

@dataclass(frozen=True, eq=False)
class EpsilonLadder:
    lam: float
    epsilons: np.ndarray
    values: np.ndarray
    floor: float
    at_eigenvalue: bool
    differences: np.ndarray
    slope: float
    # Schatten norms of Re B = (B + B*)/2 and Im B = (B - B*)/2i per rung
    real_sizes: np.ndarray
    imag_sizes: np.ndarray

    @property
    def max_difference(self) -> float:
        return float(np.max(self.differences)) if self.differences.size else 0.0


def ladder_floor(h, lam: float) -> tuple[float, bool]:
    """
    4 x the gap between the eigenvalues bracketing lam, or 0 when lam is an
    eigenvalue or lies outside the spectral hull. The flag tells whether lam
    is an eigenvalue.
    """
    eig = spectral_data(h).eigenvalues
    scale = max(1.0, float(np.max(np.abs(eig)))) if eig.size else 1.0
    if eig.size and float(np.min(np.abs(eig - lam))) <= 1e-12 * scale:
        return 0.0, True
    below, above = eig[eig < lam], eig[eig > lam]
    if below.size == 0 or above.size == 0:
        return 0.0, False
    return 4.0 * float(above.min() - below.max()), False


def boundary_ladder(
    model: ScatteringModel,
    which: int,
    lam: float,
    eps,
    norm: float = OPERATOR_NORM,
) -> EpsilonLadder:
    """
    B_j(lam + i eps_k) along a strictly decreasing ladder, with successive
    differences and the log-log slope of ||B_j|| against eps (about -1 at a
    pole).
    """
    eps = np.asarray(eps, dtype=float).reshape(-1)
    if eps.size == 0 or np.any(eps <= 0) or np.any(np.diff(eps) >= 0):
        raise LadderError("Epsilon ladder must be positive and strictly decreasing.")
    floor, at_eigenvalue = ladder_floor(model.hamiltonian(which), lam)
    if eps[-1] < floor:
        raise LadderError(f"Smallest epsilon {eps[-1]} is below the resolution floor {floor}.")
    values = np.stack([sandwiched_resolvent(model, which, complex(lam, e)) for e in eps])
    differences = schatten_norms(np.diff(values, axis=0), norm) if eps.size > 1 else np.zeros(0)
    sizes = schatten_norms(values, norm)
    slope = math.nan
    if eps.size > 1 and np.all(sizes > 0):
        slope = float(np.polyfit(np.log(eps), np.log(sizes), 1)[0])
    adjoints = np.conj(np.swapaxes(values, 1, 2))
    return EpsilonLadder(lam=float(lam), epsilons=eps, values=values, floor=floor,
                         at_eigenvalue=at_eigenvalue, differences=differences, slope=slope,
                         real_sizes=schatten_norms((values + adjoints) / 2, norm),
                         imag_sizes=schatten_norms((values - adjoints) / 2j, norm))


# --- Wave operators ---

@dataclass(frozen=True, eq=False)
class WaveProbe:
    times: np.ndarray
    states: np.ndarray
    increments: np.ndarray
    isometry_defects: np.ndarray
    intertwining: np.ndarray

    @property
    def monotone_window(self) -> int:
        """Length of the leading run of nonincreasing increments."""
        run = 0
        for a, b in zip(self.increments, self.increments[1:]):
            if b > a:
                break
            run += 1
        return run + 1 if self.increments.size else 0


def _evolve(data: SpectralData, t: float, v: np.ndarray) -> np.ndarray:
    """exp(itH) v through the eigenbasis of H."""
    u = data.eigenvectors
    return u @ (np.exp(1j * t * data.eigenvalues) * (u.conj().T @ v))


def wave_probe(model: ScatteringModel, psi, times, delta: Interval | None = None) -> WaveProbe:
    """
    W(t) psi = exp(itH1) exp(-itH0) E_{H0}(delta) psi at each time, with the
    increments between consecutive times, the isometry defect and the
    intertwining residual ||H1 W(t) psi - W(t) H0 psi||.
    """
    psi = as_matrix(psi)[:, 0]
    if psi.size != model.dimension:
        raise ShapeMismatchError(f"psi must have length {model.dimension}, got {psi.size}.")
    if abs(np.linalg.norm(psi) - 1.0) > 1e-8:
        raise ValueError("psi must be normalized.")
    times = np.asarray(times, dtype=float).reshape(-1)
    if times.size == 0 or np.any(times <= 0) or np.any(np.diff(times) <= 0):
        raise ValueError("Probe times must be positive and increasing.")
    delta = delta or Interval.real_line()
    start = spectral_projection(model.h0, delta) @ psi
    d0, d1 = spectral_data(model.h0), spectral_data(model.h1)
    moved = model.h0 @ start
    states, intertwining = [], []
    for t in times:
        state = _evolve(d1, t, _evolve(d0, -t, start))
        states.append(state)
        image = _evolve(d1, t, _evolve(d0, -t, moved))
        intertwining.append(float(np.linalg.norm(model.h1 @ state - image)))
    states = np.stack(states)
    increments = np.linalg.norm(np.diff(states, axis=0), axis=1)
    defects = np.abs(np.linalg.norm(states, axis=1) - np.linalg.norm(start))
    return WaveProbe(times=times, states=states, increments=increments,
                     isometry_defects=defects, intertwining=np.array(intertwining))


# --- Model builders ---

def sample_on_cells(fn: Callable[[float], object], grid_n: int) -> tuple[np.ndarray, float]:
    """fn at the midpoints of the grid_n cells of (0, 1], stacked, and the cell width."""
    if grid_n < 1:
        raise ShapeMismatchError("Need at least one cell.")
    width = 1.0 / grid_n
    samples = np.stack([as_matrix(fn((m + 0.5) * width)) for m in range(grid_n)])
    return samples, width


def build_example_e1(grid_n: int, channels: int, g_samples, j) -> ScatteringModel:
    """
    Multiplication by the variable on L^2((0, 1); C^channels), discretized
    on grid_n cells, with G f = int G(x) f(x) dx.
    """
    g_samples = np.asarray(g_samples, dtype=np.complex128)
    if g_samples.ndim != 3 or g_samples.shape[0] != grid_n or g_samples.shape[2] != channels:
        raise ShapeMismatchError(
            f"Expected {grid_n} samples of shape (k, {channels}), got array of shape {g_samples.shape}."
        )
    width = 1.0 / grid_n
    midpoints = (np.arange(grid_n) + 0.5) * width
    h0 = np.kron(np.diag(midpoints), np.eye(channels))
    g = np.concatenate(list(g_samples), axis=1) * math.sqrt(width)
    return ScatteringModel.build(h0, g, j)


def build_remark_model(v) -> ScatteringModel:
    """H0 = 0, G = |V|^{1/2}, J = sign(V), so that H1 = V."""
    v = as_matrix(v)
    _check_hermitian("V", v)
    w, u = linalg.eigh(v)
    root = (u * np.sqrt(np.abs(w))) @ u.conj().T
    sign = (u * np.sign(w)) @ u.conj().T
    return ScatteringModel.build(np.zeros_like(v), root, sign)


def build_near_singular_model(h0, g, lam: float) -> ScatteringModel:
    """
    Rank-one coupling with J = -1/B0(lam), so that lam is an eigenvalue of H1
    and I + B0(lam + i eps) J vanishes to first order in eps.
    """
    h0 = as_matrix(h0)
    _check_hermitian("H0", h0)
    g = as_matrix(g)
    if g.shape != (1, h0.shape[0]):
        raise ShapeMismatchError(f"G must be a single row of length {h0.shape[0]}, got shape {g.shape}.")
    eig = linalg.eigvalsh(h0)
    if float(np.min(np.abs(eig - lam))) <= 1e-12 * max(1.0, float(np.max(np.abs(eig)))):
        raise ValueError(f"{lam} is an eigenvalue of H0; B0 has a pole there.")
    b0 = (g @ linalg.solve(h0 - lam * np.eye(h0.shape[0]), g.conj().T))[0, 0].real
    if b0 == 0:
        raise ValueError(f"B0({lam}) vanishes; no coupling puts an eigenvalue there.")
    return ScatteringModel.build(h0, g, np.array([[-1.0 / b0]]))


@dataclass(frozen=True)
class CorollaryCheck:
    lhs: float
    rhs: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs + 1e-10


def corollary_inequality(g_samples, cell_width: float, p: float) -> CorollaryCheck:
    """
    lhs = ||G||_{2p}^2 for the block operator with blocks G(x_m) sqrt(dx);
    rhs = sum_m ||G(x_m)||_{2p}^2 dx.
    """
    g_samples = np.asarray(g_samples, dtype=np.complex128)
    if g_samples.ndim != 3:
        raise ShapeMismatchError(f"Expected a stack of blocks, got shape {g_samples.shape}.")
    stacked = np.concatenate(list(g_samples), axis=1) * math.sqrt(cell_width)
    lhs = schatten_norm(stacked, 2 * p) ** 2
    rhs = float(np.sum(schatten_norms(g_samples, 2 * p) ** 2) * cell_width)
    return CorollaryCheck(lhs=lhs, rhs=rhs)


def corollary_reference_measure(g_samples, cell_width: float, p: float) -> ScalarMeasure:
    """Atoms ||G(x_m)||_{2p}^2 dx at the cell midpoints, dominating mu_0 in S_p."""
    g_samples = np.asarray(g_samples, dtype=np.complex128)
    midpoints = (np.arange(g_samples.shape[0]) + 0.5) * cell_width
    return ScalarMeasure(midpoints, schatten_norms(g_samples, 2 * p) ** 2 * cell_width)


# --- Grid refinement ---

@dataclass(frozen=True)
class RefinementLevel:
    grid_n: int
    monotone_window: int
    max_isometry_defect: float
    # largest step along this grid's own ladder
    ladder_max_difference: float


@dataclass(frozen=True, eq=False)
class RefinementStudy:
    """
    Example-style models on successive grids. `grid_gaps[i]` is the largest
    ||B0^{(2n)} - B0^{(n)}|| over the coarse grid's ladder, and
    `contractions[i]` = grid_gaps[i] / grid_gaps[i + 1].
    """
    levels: list[RefinementLevel]
    grid_gaps: list[float]
    contractions: list[float]

    @property
    def window_grows(self) -> bool:
        windows = [level.monotone_window for level in self.levels]
        return all(b >= a for a, b in zip(windows, windows[1:])) and windows[-1] > windows[0]

    @property
    def ladders_contract(self) -> bool:
        return all(c >= 2.0 for c in self.contractions)


def refinement_study(
    coupling: Callable[[float], object],
    grid_sizes,
    lam: float,
    times,
    psi_for: Callable[[ScatteringModel], np.ndarray],
    *,
    rungs: int = 10,
    norm: float = OPERATOR_NORM,
) -> RefinementStudy:
    """
    Runs the wave-operator series and the H0 boundary ladder on each grid size. Every
    ladder spans [floor, 10 floor], i.e. 4 to 40 eigenvalue spacings of the
    grid it belongs to.
    """
    sizes = sorted(int(n) for n in grid_sizes)
    if len(sizes) < 2:
        raise ValueError("A refinement study needs at least two grid sizes.")
    models, ladders, levels = [], [], []
    for n in sizes:
        samples, _ = sample_on_cells(coupling, n)
        model = build_example_e1(n, samples.shape[2], samples, np.eye(samples.shape[1]))
        floor, _ = ladder_floor(model.h0, lam)
        if floor <= 0:
            raise LadderError(f"{lam} must lie strictly inside the spectrum, between eigenvalues.")
        eps = np.geomspace(10.0 * floor, floor, rungs)
        ladder = boundary_ladder(model, 0, lam, eps, norm)
        series = wave_probe(model, psi_for(model), times)
        levels.append(RefinementLevel(grid_n=n, monotone_window=series.monotone_window,
                                      max_isometry_defect=float(np.max(series.isometry_defects)),
                                      ladder_max_difference=ladder.max_difference))
        models.append(model)
        ladders.append(ladder)
        logging.info(f"Grid {n}: window {series.monotone_window}, ladder step {ladder.max_difference:.3g}")

    gaps = []
    for coarse, fine in zip(ladders, models[1:]):
        finer = np.stack([sandwiched_resolvent(fine, 0, complex(lam, e)) for e in coarse.epsilons])
        gaps.append(float(np.max(schatten_norms(finer - coarse.values, norm))))
    contractions = [a / b if b > 0 else math.inf for a, b in zip(gaps, gaps[1:])]
    return RefinementStudy(levels=levels, grid_gaps=gaps, contractions=contractions)
