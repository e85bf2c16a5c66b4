import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from analysis import bounds
from analysis.errors import EmptyGridError, ExponentRangeError, HalfPlaneError, UndefinedAtAtomError
from analysis.opmeasure import DensityOpMeasure, OpMeasure, ScalarMeasure, SimpleOpMeasure, total_variation, \
    variation_measure
from analysis.transforms import (
    ConePoint,
    ConeSettings,
    Grid,
    GridFunction,
    cauchy,
    cauchy_many,
    cone_chain_residual,
    hilbert,
    hilbert_maximal,
    hilbert_truncated,
    hl_maximal,
    maximal_profile,
    mbeta_maximal,
    mbeta_profile,
    nontangential_maximal,
    poisson_average,
    sharp_chain_terms,
    umd_ratio,
    weak_quasinorm,
)
from utils.generators import random_simple_measure


def _delta(x: float = 0.0) -> SimpleOpMeasure:
    return SimpleOpMeasure.from_atoms([(x, np.eye(1))])


def _atoms(*xs: float) -> SimpleOpMeasure:
    return SimpleOpMeasure.from_atoms([(x, np.eye(1)) for x in xs])


def _indicator() -> DensityOpMeasure:
    return DensityOpMeasure(np.array([0.0, 1.0]), np.eye(1)[None])


# --- Cauchy transform ---

def test_cauchy_of_point_mass():
    assert cauchy(_delta(), 1j)[0, 0] == pytest.approx(1j)


def test_cauchy_of_symmetric_pair():
    assert cauchy(_atoms(-1.0, 1.0), 1j)[0, 0] == pytest.approx(1j)


def test_cauchy_of_matrix_atom():
    mu = SimpleOpMeasure.from_atoms([(0.0, np.diag([1.0, 2.0]))])
    assert np.allclose(cauchy(mu, 2j), np.diag([0.5j, 1j]))


def test_cauchy_of_density_matches_quadrature():
    z = 0.3 + 0.2j
    re, _ = integrate.quad(lambda y: (1.0 / (y - z)).real, 0.0, 1.0)
    im, _ = integrate.quad(lambda y: (1.0 / (y - z)).imag, 0.0, 1.0)
    assert cauchy(_indicator(), z)[0, 0] == pytest.approx(complex(re, im), rel=1e-8)


def test_cauchy_needs_upper_half_plane():
    with pytest.raises(HalfPlaneError):
        cauchy(_delta(), 1.0)
    with pytest.raises(HalfPlaneError):
        cauchy_many(_delta(), [1j, -1j])


def test_cauchy_many_matches_single_points():
    mu = random_simple_measure(np.random.default_rng(4), 6)
    zs = np.array([0.5 + 1j, -2 + 0.1j, 3 + 4j])
    stacked = cauchy_many(mu, zs)
    for k, z in enumerate(zs):
        assert np.allclose(stacked[k], cauchy(mu, z))


# --- Hilbert transforms ---

def test_truncated_hilbert_window():
    assert hilbert_truncated(_delta(), 2.0, 1.0)[0, 0] == pytest.approx(0.5)
    assert hilbert_truncated(_delta(), 2.0, 3.0)[0, 0] == 0.0


def test_principal_value_sign():
    assert hilbert(_delta(), 2.0)[0, 0] == pytest.approx(-0.5)


def test_hilbert_undefined_at_atom():
    with pytest.raises(UndefinedAtAtomError):
        hilbert(_delta(), 0.0)


def test_hilbert_of_indicator():
    x = 2.0
    expected = math.log(abs(1 - x)) - math.log(abs(x))
    assert hilbert(_indicator(), x)[0, 0].real == pytest.approx(expected)
    with pytest.raises(UndefinedAtAtomError):
        hilbert(_indicator(), 1.0)


def test_hilbert_is_the_truncation_limit():
    mu = random_simple_measure(np.random.default_rng(2), 5)
    x = 0.123
    assert np.allclose(hilbert(mu, x), -hilbert_truncated(mu, x, 1e-9))


@pytest.mark.parametrize("mu, x, expected", [
    (_delta(), 2.0, 0.5),
    (_atoms(-1.0, 1.0), 0.0, 0.0),
    (_atoms(-1.0, 2.0), 0.0, 0.5),
])
def test_hilbert_maximal(mu, x, expected):
    assert hilbert_maximal(mu, x) == pytest.approx(expected)


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=2 ** 32 - 1), st.floats(min_value=-6, max_value=6))
def test_hilbert_maximal_dominates_every_truncation(seed, x):
    mu = random_simple_measure(np.random.default_rng(seed), 8, 2, 2, 8.0)
    sharp = hilbert_maximal(mu, x)
    for r in np.geomspace(1e-3, 20, 60):
        assert np.linalg.norm(hilbert_truncated(mu, x, r), 2) <= sharp * (1 + 1e-9) + 1e-12


# --- Maximal functions ---

def test_hardy_littlewood_of_point_mass():
    nu = variation_measure(_delta())
    assert hl_maximal(nu, 2.0) == pytest.approx(0.25)
    assert hl_maximal(nu, 0.0) == math.inf


def test_hardy_littlewood_of_indicator():
    nu = ScalarMeasure.step_density([0.0, 1.0], [1.0])
    assert hl_maximal(nu, 0.5) == pytest.approx(1.0)
    assert hl_maximal(nu, 3.0) == pytest.approx(1.0 / 6.0)


def test_mbeta_maximal():
    g = GridFunction(0.25, 0.5, [1.0, 1.0])
    assert mbeta_maximal(g, 0.5, 0.5) == pytest.approx(1.0)
    assert mbeta_maximal(g, 0.5, 2.0) == pytest.approx(1.0 / 16.0)
    with pytest.raises(ExponentRangeError):
        mbeta_maximal(g, 1.0, 0.5)


def test_mbeta_profile_matches_pointwise_values():
    g = GridFunction(-1.0, 0.25, np.random.default_rng(4).uniform(0.0, 3.0, 9))
    profile = mbeta_profile(g, 0.5)
    expected = [mbeta_maximal(g, 0.5, float(x)) for x in g.nodes()]
    assert np.allclose(profile.samples, expected, rtol=1e-9)
    with pytest.raises(ExponentRangeError):
        mbeta_profile(g, 0.0)


@pytest.mark.parametrize("seed", range(4))
@pytest.mark.parametrize("beta", [0.25, 0.5, 0.75])
def test_mbeta_weak_bound_on_hilbert_profiles(seed, beta):
    mu = random_simple_measure(np.random.default_rng(seed), 4, 2, 2, 3.0)
    h = maximal_profile("H", mu, Grid.symmetric(6.0, 240))
    assert weak_quasinorm(mbeta_profile(h, beta)) <= bounds.mbeta_weak(beta) * weak_quasinorm(h)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_hl_maximal_matches_brute_force(seed):
    nu = variation_measure(random_simple_measure(np.random.default_rng(seed), 6, 2, 2, 4.0))
    x = 0.123
    radii = np.geomspace(1e-4, 100.0, 20_000)
    inside = np.abs(nu.positions[None, :] - x) < radii[:, None]
    brute = float(np.max(inside @ nu.weights / (2 * radii)))
    exact = hl_maximal(nu, x)
    assert brute <= exact * (1 + 1e-12)
    assert brute >= exact * (1 - 2e-3)


def test_poisson_average_of_point_mass():
    assert poisson_average(_delta(), 0.0, 1.0) == pytest.approx(1 / math.pi)
    assert poisson_average(_delta(), 1.0, 1.0) == pytest.approx(1 / (2 * math.pi))


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=2 ** 32 - 1),
       st.floats(min_value=-5, max_value=5),
       st.floats(min_value=1e-3, max_value=10))
def test_poisson_below_maximal_function(seed, x, r):
    nu = variation_measure(random_simple_measure(np.random.default_rng(seed), 6, 2, 2, 8.0))
    assert poisson_average(nu, x, r) <= hl_maximal(nu, x) * (1 + 1e-12)


# --- Cone ---

def test_cone_point_validation():
    assert ConePoint(0.0, 0.5, 1.0).z == 0.5 + 1j
    with pytest.raises(ValueError):
        ConePoint(0.0, 2.0, 1.0)


def test_nontangential_off_the_atom():
    estimate = nontangential_maximal(_delta(), 1.0)
    assert estimate.value == pytest.approx(math.sqrt(2), rel=1e-3)
    assert estimate.value <= math.sqrt(2) * (1 + 1e-9)


def test_nontangential_truncated_at_the_atom():
    assert nontangential_maximal(_delta(), 0.0, r_min=1.0).value == pytest.approx(1.0, rel=1e-6)
    assert nontangential_maximal(_delta(), 0.0).value == math.inf


def test_cone_settings_validation():
    with pytest.raises(ValueError):
        ConeSettings(ratio=1.0)


def test_cone_chain_bound():
    rng = np.random.default_rng(9)
    mu = random_simple_measure(rng, 6, 2, 2, 4.0)
    nu = variation_measure(mu)
    for _ in range(20):
        lam = float(rng.uniform(-2, 2))
        r = float(rng.uniform(0.05, 3))
        x = float(rng.uniform(-0.99, 0.99) * r)
        assert cone_chain_residual(mu, lam, x, r) <= bounds.cone_to_hilbert() * hl_maximal(nu, lam)


def test_cone_chain_drops_atoms_at_exactly_twice_r():
    # |C delta_1(i/2)| = 1/|1 - i/2|; the atom at distance 2r stays out of the truncation.
    assert cone_chain_residual(_delta(1.0), 0.0, 0.0, 0.5) == pytest.approx(2 / math.sqrt(5))
    assert hilbert_truncated(_delta(1.0), 0.0, 1.0, strict=True)[0, 0] == 0.0
    assert hilbert_truncated(_delta(1.0), 0.0, 1.0)[0, 0] == pytest.approx(-1.0)


@pytest.mark.parametrize("seed", [3, 8])
def test_truncated_cone_is_nonincreasing_in_r_min(seed):
    mu = random_simple_measure(np.random.default_rng(seed), 5, 2, 2, 4.0)
    lam = float(mu.positions[0]) + 1e-3
    values = [nontangential_maximal(mu, lam, r_min).value for r_min in (0.01, 0.1, 0.5, 2.0, 8.0)]
    assert all(b <= a * (1 + 1e-3) for a, b in zip(values, values[1:]))
    assert values[-1] < values[0]


def test_truncated_cone_profile_obeys_its_bound():
    mu = random_simple_measure(np.random.default_rng(12), 3, 2, 2, 2.0)
    cone = ConeSettings(ratio=1.1, x_samples=16, refine_passes=1)
    profile = maximal_profile("T", mu, Grid.symmetric(6.0, 120), r_min=0.1, cone=cone)
    assert np.all(np.isfinite(profile.samples))
    assert weak_quasinorm(profile) <= bounds.nontangential_weak(math.pi ** 2) * total_variation(mu)


def test_cone_chain_needs_point_in_cone():
    with pytest.raises(ValueError):
        cone_chain_residual(_delta(), 0.0, 2.0, 1.0)


# --- Weak quasi-norms and profiles ---

def test_weak_quasinorm_formula():
    assert weak_quasinorm(GridFunction(0.0, 1.0, [3.0, 0.0, 0.0])) == pytest.approx(3.0)
    assert weak_quasinorm(GridFunction(0.0, 1.0, [1.0, 1.0, 1.0])) == pytest.approx(3.0)
    with pytest.raises(EmptyGridError):
        weak_quasinorm(GridFunction(0.0, 1.0, []))


@settings(max_examples=50)
@given(st.lists(st.floats(min_value=0, max_value=100), min_size=1, max_size=40),
       st.floats(min_value=1e-3, max_value=10))
def test_weak_quasinorm_matches_level_sets(samples, step):
    f = GridFunction(0.0, step, samples)
    values = np.asarray(samples)
    brute = max(float(t) * float(np.sum(values >= t)) * step for t in values)
    assert weak_quasinorm(f) == pytest.approx(brute)


def test_grid_rejects_bad_step():
    with pytest.raises(EmptyGridError):
        Grid(0.0, 0.0, 10)


@pytest.mark.parametrize("kind, expected", [("M", 1.0), ("H", 2.0), ("T", 2 * math.sqrt(2))])
def test_single_atom_profiles(kind, expected):
    grid = Grid.symmetric(10.0, 400)
    profile = maximal_profile(kind, _delta(), grid, cone=ConeSettings(ratio=1.05, x_samples=32, refine_passes=1))
    assert profile.samples[199] == 0.0 and profile.samples[200] == 0.0
    assert weak_quasinorm(profile) == pytest.approx(expected, rel=0.01)


def test_profile_thread_count_does_not_change_output():
    mu = random_simple_measure(np.random.default_rng(5), 4, 2, 2, 3.0)
    grid = Grid.symmetric(4.0, 80)
    single = maximal_profile("Hsharp", mu, grid, threads=1)
    pooled = maximal_profile("Hsharp", mu, grid, threads=4)
    assert np.array_equal(single.samples, pooled.samples)


def test_profile_rejects_unknown_kind():
    with pytest.raises(ValueError):
        maximal_profile("Q", _delta(), Grid.symmetric(1.0, 4))


def test_umd_ratio_of_indicator():
    ratio = umd_ratio(_indicator(), Grid.symmetric(50.0, 10_000))
    assert ratio == pytest.approx(math.pi ** 2, rel=0.05)


def test_sharp_chain_holds_for_point_mass():
    chain = sharp_chain_terms(_delta(), 1.3, 0.5, Grid.symmetric(10.0, 400), math.pi ** 2)
    assert chain.lhs == pytest.approx((1 / 1.3) ** 0.5)
    assert chain.holds


def test_mixed_measure_hilbert_is_linear():
    atoms = _delta(0.5)
    mu = OpMeasure(atoms, _indicator())
    x = 3.0
    assert np.allclose(hilbert(mu, x), hilbert(atoms, x) + hilbert(_indicator(), x))
