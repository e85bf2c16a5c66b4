import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from analysis.dyadic import Interval, containing
from analysis.errors import ShapeMismatchError
from analysis.opmeasure import (
    DensityOpMeasure,
    OpMeasure,
    ScalarMeasure,
    SimpleOpMeasure,
    discretize,
    mass,
    total_variation,
    variation_measure,
)
from utils.generators import random_simple_measure


def _two_atoms() -> SimpleOpMeasure:
    return SimpleOpMeasure.from_atoms([(1.0, np.eye(2)), (-1.0, np.diag([3.0, 4.0]))])


def test_atoms_are_sorted():
    mu = _two_atoms()
    assert list(mu.positions) == [-1.0, 1.0]
    assert np.allclose(mu.values[0], np.diag([3.0, 4.0]))


def test_equal_positions_merge():
    mu = SimpleOpMeasure.from_atoms([(0.5, np.eye(2)), (0.5, np.eye(2))])
    assert mu.size == 1
    assert np.allclose(mu.values[0], 2 * np.eye(2))


def test_zero_measure():
    mu = SimpleOpMeasure.zero((2, 3))
    assert mu.is_zero()
    assert mu.shape == (2, 3)
    assert total_variation(mu) == 0.0
    assert mass(mu).shape == (2, 3)


def test_total_variation_by_norm():
    mu = _two_atoms()
    assert total_variation(mu, norm=math.inf) == pytest.approx(1 + 4)
    assert total_variation(mu, norm=1) == pytest.approx(2 + 7)
    assert total_variation(mu, norm=2) == pytest.approx(math.sqrt(2) + 5)


def test_half_open_restriction():
    mu = _two_atoms()
    assert total_variation(mu, Interval(-1.0, 1.0)) == pytest.approx(1.0)
    assert total_variation(mu, Interval(-2.0, -1.0)) == pytest.approx(4.0)
    assert mu.restrict(Interval(1.0, 2.0)).size == 0


def test_density_mass_and_variation():
    f = DensityOpMeasure(np.array([0.0, 1.0, 3.0]), np.stack([np.eye(2), -2 * np.eye(2)]))
    assert np.allclose(f.mass(), np.eye(2) - 4 * np.eye(2))
    assert np.allclose(f.mass(Interval(0.5, 2.0)), 0.5 * np.eye(2) - 2 * np.eye(2))
    assert total_variation(f) == pytest.approx(1 + 4)
    assert np.allclose(f.value_at(1.0), np.eye(2))
    assert np.allclose(f.value_at(1.5), -2 * np.eye(2))


def test_from_cells_fills_gaps():
    f = DensityOpMeasure.from_cells([(Interval(2.0, 3.0), np.eye(1)), (Interval(0.0, 1.0), np.eye(1))], (1, 1))
    assert list(f.breakpoints) == [0.0, 1.0, 2.0, 3.0]
    assert f.densities[1, 0, 0] == 0


def test_from_cells_rejects_overlap():
    with pytest.raises(ShapeMismatchError):
        DensityOpMeasure.from_cells([(Interval(0.0, 2.0), np.eye(1)), (Interval(1.0, 3.0), np.eye(1))], (1, 1))


def test_density_restrict_keeps_mass():
    f = DensityOpMeasure(np.array([0.0, 1.0, 3.0]), np.stack([np.eye(2), -2 * np.eye(2)]))
    part = f.restrict(Interval(0.5, 2.0))
    assert np.allclose(part.mass(), f.mass(Interval(0.5, 2.0)))


def test_mixed_measure_mass():
    f = DensityOpMeasure(np.array([0.0, 1.0]), np.eye(2)[None])
    mu = OpMeasure(_two_atoms(), f)
    assert np.allclose(mu.mass(), np.eye(2) + np.diag([3.0, 4.0]) + np.eye(2))
    assert mu.support().left < -1.0 and mu.support().right == 1.0


def test_shape_mismatch():
    with pytest.raises(ShapeMismatchError):
        SimpleOpMeasure.from_atoms([(0.0, np.eye(2))], shape=(3, 3))
    with pytest.raises(ShapeMismatchError):
        _two_atoms() + SimpleOpMeasure.from_atoms([(0.0, np.eye(3))])


def test_variation_measure_matches_total_variation():
    mu = _two_atoms()
    nu = variation_measure(mu, 2)
    assert nu.total() == pytest.approx(total_variation(mu, norm=2))
    assert nu(Interval(0.0, 1.0)) == pytest.approx(math.sqrt(2))


def test_scalar_measure_rejects_negative_weights():
    with pytest.raises(ShapeMismatchError):
        ScalarMeasure(np.array([0.0]), np.array([-1.0]))


def test_scalar_measure_density_restrict():
    nu = ScalarMeasure.step_density([0.0, 2.0], [3.0])
    assert nu.mass(Interval(1.0, 5.0)) == pytest.approx(3.0)
    assert nu.restrict(Interval(1.0, 5.0)).total() == pytest.approx(3.0)
    assert nu.density_at(1.0) == 3.0
    assert nu.density_at(2.5) == 0.0


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=2 ** 32 - 1), st.integers(min_value=-3, max_value=6))
def test_discretize_preserves_dyadic_masses(seed, n):
    rng = np.random.default_rng(seed)
    mu = random_simple_measure(rng, 10, 2, 2, 6.0)
    mu_n = discretize(mu, n)
    for x in mu.positions:
        cell = containing(float(x), n).as_interval()
        assert np.allclose(mass(mu_n, cell), mass(mu, cell))
    assert np.allclose(mass(mu_n), mass(mu))
    assert total_variation(mu_n) <= total_variation(mu) * (1 + 1e-12)


def test_discretize_density_cells():
    f = DensityOpMeasure(np.array([0.0, 1.5]), np.eye(1)[None])
    mu_n = discretize(f, 1)
    assert list(mu_n.positions) == [0.25, 0.75, 1.25]
    assert np.allclose(mu_n.values[:, 0, 0], [0.5, 0.5, 0.5])
