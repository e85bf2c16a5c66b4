"""
Dyadic Calderon-Zygmund decomposition of a simple operator-valued measure.

At level s the measure splits as mu = f dx + sum_l nu_l where the Q_l are
the maximal dyadic intervals with ||mu||(Q)/|Q| > s, f averages mu over
each Q_l and every nu_l lives on Q_l with nu_l(Q_l) = 0.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from analysis import bounds, dyadic
from analysis.dyadic import DyadicInterval, Interval
from analysis.errors import (
    EmptyMeasureError,
    LevelError,
    MismatchedGoodPartError,
    OverlappingIntervalsError,
    UndefinedAtAtomError,
)
from analysis.opmeasure import (
    DensityOpMeasure,
    OpMeasure,
    ScalarMeasure,
    SimpleOpMeasure,
    total_variation,
    variation_measure,
)
from analysis.schatten import OPERATOR_NORM, schatten_norm
from analysis.transforms import Grid, hilbert
from utils.parallel import ordered_map

# Relative tolerance for identities that hold exactly up to rounding.
EXACT_TOLERANCE = 1e-12


@dataclass(frozen=True, eq=False)
class CZDecomposition:
    level: float
    intervals: list[DyadicInterval]
    good: DensityOpMeasure
    bad_parts: list[OpMeasure]
    norm: float = OPERATOR_NORM

    def doubled(self) -> list[Interval]:
        return [dyadic.scaled_double(q) for q in self.intervals]

    def bad_total(self, mu: SimpleOpMeasure) -> OpMeasure:
        """nu = mu - f dx as a single measure."""
        return OpMeasure(mu, self.good.scaled(-1.0))

    def to_dict(self) -> dict:
        return {
            "s": self.level,
            "intervals": [{"j": q.j, "n": q.n} for q in self.intervals],
        }


def _check_level(s: float) -> float:
    s = float(s)
    if not s > 0 or not math.isfinite(s):
        raise LevelError(f"Decomposition level must be positive and finite, got {s}.")
    return s


def _roots(nu: ScalarMeasure, s: float) -> list[DyadicInterval]:
    """
    The two dyadic intervals (-2^-n0, 0] and (0, 2^-n0] at the finest scale
    n0 <= 0 where they cover the support and the mass over 2^-n0 is <= s.
    Every ancestor of a root then also fails the stopping condition.
    """
    total = nu.total()
    low = float(nu.positions[0]) if nu.positions.size else 0.0
    high = float(nu.positions[-1]) if nu.positions.size else 0.0
    n0 = 0
    while True:
        radius = math.ldexp(1.0, -n0)
        if -radius < low and high <= radius and total <= s * radius:
            break
        n0 -= 1
    return [DyadicInterval(-1, n0), DyadicInterval(0, n0)]


def maximal_intervals(mu: SimpleOpMeasure, s: float, norm: float = OPERATOR_NORM) -> list[DyadicInterval]:
    """
    Maximal dyadic intervals Q with ||mu||(Q)/|Q| > s (strict), sorted left
    to right. Cells carrying no variation are never entered.
    """
    s = _check_level(s)
    nu = variation_measure(mu, norm)
    if nu.total() == 0:
        raise EmptyMeasureError("Calderon-Zygmund decomposition of a zero measure.")
    found: list[DyadicInterval] = []
    stack = _roots(nu, s)
    while stack:
        q = stack.pop()
        for child in q.children():
            mass = nu.mass(child.as_interval())
            if mass == 0:
                continue
            if mass / child.length > s:
                found.append(child)
            else:
                stack.append(child)
    found.sort(key=DyadicInterval.sort_key)
    logging.debug(f"Level {s}: {len(found)} maximal intervals.")
    return found


def _check_disjoint(intervals: list[DyadicInterval]) -> list[DyadicInterval]:
    ordered = sorted(intervals, key=DyadicInterval.sort_key)
    for a, b in zip(ordered, ordered[1:]):
        if not a.is_disjoint(b):
            raise OverlappingIntervalsError(f"Intervals ({a.left}, {a.right}] and ({b.left}, {b.right}] overlap.")
    return ordered


def good_part(mu: SimpleOpMeasure, intervals: list[DyadicInterval]) -> DensityOpMeasure:
    """f = mu(Q)/|Q| on each Q, zero elsewhere."""
    ordered = _check_disjoint(intervals)
    cells = [(q.as_interval(), mu.mass(q.as_interval()) / q.length) for q in ordered]
    return DensityOpMeasure.from_cells(cells, mu.shape)


def bad_part(mu: SimpleOpMeasure, f: DensityOpMeasure, intervals: list[DyadicInterval]) -> list[OpMeasure]:
    """nu_l = (mu - f dx) restricted to Q_l, one per interval."""
    ordered = _check_disjoint(intervals)
    parts = []
    for q in ordered:
        cell = q.as_interval()
        expected = mu.mass(cell) / q.length
        density = f.value_at(q.center)
        if not np.allclose(density, expected, rtol=EXACT_TOLERANCE, atol=0.0):
            raise MismatchedGoodPartError(f"Good part on ({q.left}, {q.right}] is not the average of mu.")
        parts.append(OpMeasure(mu.restrict(cell), DensityOpMeasure.from_cells([(cell, -density)], mu.shape)))
    return parts


def decompose(mu: SimpleOpMeasure, s: float, norm: float = OPERATOR_NORM) -> CZDecomposition:
    intervals = maximal_intervals(mu, s, norm)
    good = good_part(mu, intervals)
    return CZDecomposition(level=float(s), intervals=intervals, good=good,
                           bad_parts=bad_part(mu, good, intervals), norm=norm)


# --- Verification ---

@dataclass
class CZReport:
    checks: dict[str, bool] = field(default_factory=dict)
    margins: dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def failures(self) -> list[str]:
        return [name for name, ok in self.checks.items() if not ok]

    def record(self, name: str, ok: bool, margin: float | None = None) -> None:
        self.checks[name] = bool(ok)
        if margin is not None:
            self.margins[name] = float(margin)


def _test_cells(mu: SimpleOpMeasure, intervals: list[DyadicInterval], max_cells: int) -> list[DyadicInterval]:
    """
    Dyadic cells on which mu = f dx + sum nu_l is checked: every cell
    covering the support hull at each scale from the coarsest interval down
    to the atom-separating scale, or just the cells holding atoms and
    interval endpoints where a scale has too many cells.
    """
    hull = Interval(float(np.nextafter(mu.positions[0], -np.inf)), float(mu.positions[-1]))
    coarsest = min([q.n for q in intervals] + [0])
    finest = max([q.n for q in intervals] + [dyadic.separating_scale(mu.positions)])
    landmarks = list(mu.positions) + [q.left for q in intervals] + [q.right for q in intervals]
    cells: set[DyadicInterval] = set()
    for n in range(coarsest, finest + 1):
        count = hull.length * math.ldexp(1.0, n)
        if count <= max_cells:
            cells.update(dyadic.cells_covering(hull, n))
        else:
            cells.update(dyadic.containing(float(x), n) for x in landmarks)
    return sorted(cells, key=DyadicInterval.sort_key)


def _merged(intervals: list[Interval]) -> list[Interval]:
    merged: list[Interval] = []
    for iv in sorted(intervals, key=lambda i: i.left):
        if merged and iv.left <= merged[-1].right:
            last = merged.pop()
            merged.append(Interval(last.left, max(last.right, iv.right)))
        else:
            merged.append(iv)
    return merged


def _bad_norm_at(dec: CZDecomposition, parts: list[OpMeasure], x: float) -> float:
    total = sum((hilbert(p, x) for p in parts), start=np.zeros(dec.good.shape, dtype=np.complex128))
    return schatten_norm(total, dec.norm)


def off_support_integral(mu: SimpleOpMeasure, dec: CZDecomposition) -> float:
    """int over the complement of the union of 2Q_l of ||H nu(x)|| dx, by quadrature."""
    union = _merged(dec.doubled())
    gaps = [Interval(-math.inf, union[0].left)]
    gaps += [Interval(a.right, b.left) for a, b in zip(union, union[1:])]
    gaps.append(Interval(union[-1].right, math.inf))
    total = 0.0
    for gap in gaps:
        if gap.is_empty:
            continue
        value, error = integrate.quad(lambda x: _bad_norm_at(dec, dec.bad_parts, x), gap.left, gap.right, limit=200)
        logging.debug(f"Quadrature over ({gap.left}, {gap.right}]: {value} (+/- {error}).")
        total += value
    return total


def verify(
    mu: SimpleOpMeasure,
    dec: CZDecomposition,
    *,
    samples_per_interval: int = 100,
    quadrature: bool = True,
    max_cells_per_scale: int = 1024,
) -> CZReport:
    """
    Checks every inequality of the decomposition; failures are report
    entries, never exceptions.
    """
    report = CZReport()
    s, norm = dec.level, dec.norm
    nu = variation_measure(mu, norm)
    total = nu.total()

    densities = [nu.mass(q.as_interval()) / q.length for q in dec.intervals]
    report.record("maximality", all(d > s for d in densities), min(densities, default=math.inf) - s)
    parents = [dyadic.parent(q) for q in dec.intervals]
    parent_densities = [nu.mass(p.as_interval()) / p.length for p in parents]
    report.record("parent_bound", all(d <= s for d in parent_densities), s - max(parent_densities, default=0.0))

    good_sup = float(np.max(dec.good.cell_norms(norm))) if dec.good.cell_count else 0.0
    report.record("good_bound", good_sup <= 2 * s * (1 + EXACT_TOLERANCE), 2 * s - good_sup)

    residues = [schatten_norm(p.mass(q.as_interval()), norm) / max(1.0, nu.mass(q.as_interval()))
                for p, q in zip(dec.bad_parts, dec.intervals)]
    report.record("cancellation", all(r <= EXACT_TOLERANCE for r in residues), max(residues, default=0.0))

    variations = [(total_variation(p, norm=norm), nu.mass(q.as_interval())) for p, q in zip(dec.bad_parts, dec.intervals)]
    report.record("bad_variation", all(v <= 2 * m * (1 + EXACT_TOLERANCE) for v, m in variations),
                  min((2 * m - v for v, m in variations), default=0.0))

    covered = sum(q.length for q in dec.intervals)
    report.record("measure_bound", covered <= total / s * (1 + EXACT_TOLERANCE), total / s - covered)

    live_atoms = mu.positions[mu.atom_norms(norm) > 0]
    hits = [sum(q.contains(float(x)) for q in dec.intervals) for x in live_atoms]
    report.record("coverage", all(h == 1 for h in hits))

    ordered = sorted(dec.intervals, key=DyadicInterval.sort_key)
    report.record("disjoint", all(a.is_disjoint(b) for a, b in zip(ordered, ordered[1:])))

    if len(dec.bad_parts) != len(dec.intervals):
        report.record("reconstruction", False)
    else:
        worst = 0.0
        for cell in _test_cells(mu, dec.intervals, max_cells_per_scale):
            iv = cell.as_interval()
            rebuilt = dec.good.mass(iv) + sum((p.mass(iv) for p in dec.bad_parts),
                                              start=np.zeros(mu.shape, dtype=np.complex128))
            worst = max(worst, schatten_norm(mu.mass(iv) - rebuilt, norm))
        report.record("reconstruction", worst <= EXACT_TOLERANCE * max(1.0, total), worst)

    union = dec.doubled()
    decay_margin = math.inf
    for part, q in zip(dec.bad_parts, dec.intervals):
        offsets = q.length * np.geomspace(1.0 + 1e-9, 1e3, max(1, samples_per_interval // 2))
        mass = nu.mass(q.as_interval())
        for x in np.concatenate([q.center - offsets, q.center + offsets]):
            if any(iv.contains(float(x)) for iv in union):
                continue
            try:
                value = schatten_norm(hilbert(part, float(x)), norm)
            except UndefinedAtAtomError:
                continue
            bound = 4.0 * mass * q.length / ((x - q.center) ** 2 + q.length ** 2)
            decay_margin = min(decay_margin, bound - value)
    report.record("off_support_decay", decay_margin >= -EXACT_TOLERANCE * max(1.0, total), decay_margin)

    if quadrature and dec.intervals:
        integral = off_support_integral(mu, dec)
        limit = bounds.off_support_bad_part() * total
        report.record("off_support_integral", integral <= limit * (1 + 1e-6), limit - integral)

    if not report.passed:
        logging.warning(f"Decomposition at level {s} failed checks: {report.failures()}")
    return report


# --- Level sets ---

@dataclass(frozen=True)
class LevelSetSplit:
    """Grid measures of the level sets in the weak-type argument, next to their bounds."""
    level: float
    threshold: float
    omega: float
    omega_good: float
    omega_bad_near: float
    omega_bad_far: float
    bound_good: float
    bound_near: float
    bound_far: float
    inclusion_holds: bool

    @property
    def total_bound(self) -> float:
        return self.bound_good + self.bound_near + self.bound_far

    @property
    def holds(self) -> bool:
        return (
            self.inclusion_holds
            and self.omega <= self.total_bound
            and self.omega_good <= self.bound_good
            and self.omega_bad_far <= self.bound_far
        )


def level_set_split(
    mu: SimpleOpMeasure,
    dec: CZDecomposition,
    grid: Grid,
    c_x: float,
    threads: int = 1,
) -> LevelSetSplit:
    """
    With the decomposition taken at level s/2, measures {||H mu|| > s},
    {||H(f dx)|| > s/2} and {||H nu|| > s/2} split by the union of the
    doubled intervals, and checks pointwise that the first set lies in the
    union of the other two. Nodes where a transform is undefined (atoms,
    jumps of f) are left out.
    """
    s, norm = 2.0 * dec.level, dec.norm
    nu_total = dec.bad_total(mu)
    good = OpMeasure.from_density(dec.good)
    doubled = dec.doubled()

    def evaluate(x: float) -> tuple[float, float, float] | None:
        try:
            return (
                schatten_norm(hilbert(mu, x), norm),
                schatten_norm(hilbert(good, x), norm),
                schatten_norm(hilbert(nu_total, x), norm),
            )
        except UndefinedAtAtomError:
            return None

    nodes = grid.nodes()
    values = ordered_map(evaluate, [float(x) for x in nodes], threads)
    omega = omega_good = near = far = 0.0
    inclusion = True
    for x, v in zip(nodes, values):
        if v is None:
            continue
        h_mu, h_good, h_bad = v
        in_union = any(iv.contains(float(x)) for iv in doubled)
        if h_mu > s:
            omega += grid.step
            inclusion &= h_good > s / 2 or h_bad > s / 2
        if h_good > s / 2:
            omega_good += grid.step
        if h_bad > s / 2:
            if in_union:
                near += grid.step
            else:
                far += grid.step
    total = total_variation(mu, norm=norm)
    half = s / 2
    return LevelSetSplit(
        level=dec.level,
        threshold=s,
        omega=omega,
        omega_good=omega_good,
        omega_bad_near=near,
        omega_bad_far=far,
        bound_good=2 * c_x * total / half,
        bound_near=2 * total / half,
        bound_far=bounds.off_support_bad_part() * total / half,
        inclusion_holds=bool(inclusion),
    )
