"""
Dyadic intervals (j*2^-n, (j+1)*2^-n] of the real line.

Intervals are stored as the integer pair (j, n) so nesting and disjointness
are decided exactly; float endpoints are produced only on request.
Every interval in the laboratory, dyadic or not, is half-open on the left:
(a, b] contains b and not a.
"""
import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from analysis.errors import DyadicScaleError

# 2^-n must stay a normal float, and j*2^-n must not overflow for |j| ~ 2^53.
MIN_SCALE = -960
MAX_SCALE = 1022


def _check_scale(n: int) -> None:
    if not MIN_SCALE <= n <= MAX_SCALE:
        raise DyadicScaleError(f"Dyadic scale {n} is outside [{MIN_SCALE}, {MAX_SCALE}].")


@dataclass(frozen=True)
class Interval:
    """
    A half-open interval (left, right]; either end may be infinite.
    """
    left: float
    right: float

    def __post_init__(self):
        if not self.left <= self.right:
            raise ValueError(f"Interval ({self.left}, {self.right}] has left > right.")

    @classmethod
    def real_line(cls) -> "Interval":
        return cls(-math.inf, math.inf)

    @property
    def length(self) -> float:
        return self.right - self.left

    @property
    def is_bounded(self) -> bool:
        return math.isfinite(self.left) and math.isfinite(self.right)

    @property
    def is_empty(self) -> bool:
        return self.left == self.right

    def contains(self, x: float) -> bool:
        return self.left < x <= self.right

    def contains_many(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        return (xs > self.left) & (xs <= self.right)

    def intersect(self, other: "Interval") -> "Interval":
        left = max(self.left, other.left)
        right = min(self.right, other.right)
        if right < left:
            right = left
        return Interval(left, right)

    def overlap_length(self, left: float, right: float) -> float:
        """Lebesgue measure of (left, right] inside this interval."""
        return max(0.0, min(self.right, right) - max(self.left, left))


@dataclass(frozen=True)
class DyadicInterval:
    """
    (j*2^-n, (j+1)*2^-n].

    Use `sort_key` to order intervals left to right.
    """
    j: int
    n: int

    def __post_init__(self):
        _check_scale(self.n)

    @property
    def left(self) -> float:
        return math.ldexp(self.j, -self.n)

    @property
    def right(self) -> float:
        return math.ldexp(self.j + 1, -self.n)

    @property
    def length(self) -> float:
        return math.ldexp(1.0, -self.n)

    @property
    def center(self) -> float:
        return math.ldexp(2 * self.j + 1, -self.n - 1)

    def sort_key(self) -> tuple[float, int]:
        return (self.left, self.n)

    def as_interval(self) -> Interval:
        return Interval(self.left, self.right)

    def contains(self, x: float) -> bool:
        return self.left < x <= self.right

    def contains_interval(self, other: "DyadicInterval") -> bool:
        """True when `other` is this interval or one of its descendants."""
        if other.n < self.n:
            return False
        return (other.j >> (other.n - self.n)) == self.j

    def is_disjoint(self, other: "DyadicInterval") -> bool:
        return not (self.contains_interval(other) or other.contains_interval(self))

    def children(self) -> tuple["DyadicInterval", "DyadicInterval"]:
        return (DyadicInterval(2 * self.j, self.n + 1), DyadicInterval(2 * self.j + 1, self.n + 1))

    def sibling(self) -> "DyadicInterval":
        return DyadicInterval(self.j ^ 1, self.n)


def containing(x: float, n: int) -> DyadicInterval:
    """
    The dyadic interval of scale n that contains x.

    A grid point belongs to the interval whose right endpoint it is.
    """
    if not math.isfinite(x):
        raise DyadicScaleError(f"Cannot locate non-finite point {x}.")
    _check_scale(n)
    scaled = math.ldexp(x, n)
    if not math.isfinite(scaled) or abs(scaled) >= 2.0 ** 62:
        raise DyadicScaleError(f"Point {x} at scale {n} overflows the integer index.")
    return DyadicInterval(math.ceil(scaled) - 1, n)


def parent(q: DyadicInterval) -> DyadicInterval:
    if q.n - 1 < MIN_SCALE:
        raise DyadicScaleError(f"Interval at scale {q.n} has no representable parent.")
    return DyadicInterval(q.j >> 1, q.n - 1)


def scaled_double(q: DyadicInterval) -> Interval:
    """2Q = (c(Q) - |Q|, c(Q) + |Q|]."""
    return Interval(q.center - q.length, q.center + q.length)


def ancestors(q: DyadicInterval, up_to_scale: int) -> Iterator[DyadicInterval]:
    """Yields Q's ancestors from its parent up to (and including) scale `up_to_scale`."""
    current = q
    while current.n > up_to_scale:
        current = parent(current)
        yield current


def cells_covering(interval: Interval, n: int) -> list[DyadicInterval]:
    """All scale-n dyadic intervals that meet the bounded interval (left, right]."""
    if not interval.is_bounded:
        raise DyadicScaleError("Only bounded intervals can be covered by dyadic cells.")
    if interval.is_empty:
        return []
    first = containing(interval.left, n)
    if first.right <= interval.left:
        first = DyadicInterval(first.j + 1, n)
    last = containing(interval.right, n)
    return [DyadicInterval(j, n) for j in range(first.j, last.j + 1)]


def separating_scale(points: np.ndarray) -> int:
    """
    The coarsest scale n >= 0 at which all distinct points fall in distinct
    dyadic cells (0 when there is at most one point).
    """
    points = np.unique(np.asarray(points, dtype=float))
    if points.size < 2:
        return 0
    gap = float(np.min(np.diff(points)))
    n = max(0, int(math.floor(-math.log2(gap))))
    while True:
        cells = {containing(float(x), n).j for x in points}
        if len(cells) == points.size:
            return n
        n += 1
