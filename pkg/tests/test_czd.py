import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from analysis import bounds
from analysis.czd import CZDecomposition, bad_part, decompose, good_part, level_set_split, maximal_intervals, verify
from analysis.dyadic import DyadicInterval, parent
from analysis.errors import EmptyMeasureError, LevelError, MismatchedGoodPartError, OverlappingIntervalsError
from analysis.opmeasure import DensityOpMeasure, SimpleOpMeasure, total_variation
from analysis.transforms import Grid
from utils.generators import random_simple_measure

E = np.array([[1.0, 0.0], [0.0, 0.5]])


def _third() -> SimpleOpMeasure:
    return SimpleOpMeasure.from_atoms([(1.0 / 3.0, E)])


@pytest.mark.parametrize("s, expected", [
    (1.0, DyadicInterval(0, 1)),
    (3.0, DyadicInterval(1, 2)),
    (0.5, DyadicInterval(0, 0)),
])
def test_single_atom_intervals(s, expected):
    assert maximal_intervals(_third(), s) == [expected]


@pytest.mark.parametrize("s, factor", [(1.0, 2.0), (3.0, 4.0)])
def test_good_part_is_the_average(s, factor):
    intervals = maximal_intervals(_third(), s)
    f = good_part(_third(), intervals)
    assert np.allclose(f.value_at(intervals[0].center), factor * E)
    assert not f.value_at(5.0).any()


def test_atom_on_dyadic_endpoint_goes_left():
    mu = SimpleOpMeasure.from_atoms([(0.5, np.eye(1))])
    (q,) = maximal_intervals(mu, 1.0)
    assert q.contains(0.5)
    assert q.right == 0.5


def test_negative_support_uses_left_root():
    mu = SimpleOpMeasure.from_atoms([(-0.3, np.eye(1)), (2.7, np.eye(1))])
    dec = decompose(mu, 0.7)
    report = verify(mu, dec, quadrature=False)
    assert report.passed, report.failures()
    assert any(q.contains(-0.3) for q in dec.intervals)


@pytest.mark.parametrize("s", [0.0, -1.0, math.inf])
def test_invalid_level(s):
    with pytest.raises(LevelError):
        maximal_intervals(_third(), s)


def test_zero_measure_has_no_decomposition():
    with pytest.raises(EmptyMeasureError):
        maximal_intervals(SimpleOpMeasure.zero((2, 2)), 1.0)


def test_overlapping_intervals_rejected():
    with pytest.raises(OverlappingIntervalsError):
        good_part(_third(), [DyadicInterval(0, 0), DyadicInterval(0, 1)])


def test_mismatched_good_part_rejected():
    intervals = maximal_intervals(_third(), 1.0)
    wrong = DensityOpMeasure.from_cells([(intervals[0].as_interval(), 3 * E)], (2, 2))
    with pytest.raises(MismatchedGoodPartError):
        bad_part(_third(), wrong, intervals)


def test_verify_with_quadrature():
    mu = random_simple_measure(np.random.default_rng(17), 5, 2, 2, 4.0)
    dec = decompose(mu, 1.0)
    report = verify(mu, dec, quadrature=True)
    assert report.passed, report.failures()
    assert report.margins["off_support_integral"] >= 0


def test_decomposition_serializes():
    dec = decompose(_third(), 1.0)
    assert dec.to_dict() == {"s": 1.0, "intervals": [{"j": 0, "n": 1}]}


@settings(max_examples=40, deadline=None)
@given(
    st.integers(min_value=0, max_value=2 ** 32 - 1),
    st.integers(min_value=1, max_value=12),
    st.sampled_from([0.05, 0.3, 1.0, 4.0, 25.0]),
    st.sampled_from([1.0, 2.0, math.inf]),
)
def test_decomposition_invariants(seed, atoms, s, norm):
    mu = random_simple_measure(np.random.default_rng(seed), atoms, 2, 3, 6.0)
    dec = decompose(mu, s, norm)
    report = verify(mu, dec, samples_per_interval=20, quadrature=False)
    assert report.passed, report.failures()
    covered = sum(q.length for q in dec.intervals)
    assert covered <= total_variation(mu, norm=norm) / s * (1 + 1e-12)


def test_level_set_split_within_bounds():
    mu = SimpleOpMeasure.from_atoms([(-1.2, np.eye(1)), (0.4, -2 * np.eye(1)), (2.1, 0.5 * np.eye(1))])
    dec = decompose(mu, 0.5)
    split = level_set_split(mu, dec, Grid.symmetric(20.0, 4000), math.pi ** 2)
    assert split.threshold == 1.0
    assert split.inclusion_holds
    assert split.omega <= split.total_bound
    assert split.omega_good <= split.bound_good
    assert split.omega_bad_far <= split.bound_far
    assert split.holds


def test_verify_flags_a_coarsened_interval():
    mu = _third()
    (q,) = maximal_intervals(mu, 1.0)
    coarse = [parent(q)]
    good = good_part(mu, coarse)
    dec = CZDecomposition(level=1.0, intervals=coarse, good=good, bad_parts=bad_part(mu, good, coarse))
    report = verify(mu, dec, quadrature=False)
    assert not report.passed
    assert "maximality" in report.failures()


def test_verify_flags_an_inflated_good_part():
    mu = _third()
    dec = decompose(mu, 1.0)
    (q,) = dec.intervals
    inflated = DensityOpMeasure.from_cells([(q.as_interval(), 3 * dec.good.value_at(q.center))], (2, 2))
    broken = CZDecomposition(level=1.0, intervals=dec.intervals, good=inflated, bad_parts=dec.bad_parts)
    failures = verify(mu, broken, quadrature=False).failures()
    assert "good_bound" in failures
    assert "reconstruction" in failures


def test_off_support_checks_use_the_bound_constant(monkeypatch):
    mu = random_simple_measure(np.random.default_rng(17), 5, 2, 2, 4.0)
    dec = decompose(mu, 1.0)
    monkeypatch.setattr(bounds, "off_support_bad_part", lambda: 0.0)
    assert "off_support_integral" in verify(mu, dec, quadrature=True).failures()
    split = level_set_split(mu, decompose(mu, 0.5), Grid.symmetric(10.0, 400), math.pi ** 2)
    assert split.bound_far == 0.0
