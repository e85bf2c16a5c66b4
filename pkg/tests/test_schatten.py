import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from analysis.errors import NonFiniteMatrixError, NonSquareMatrixError, SchattenIndexError
from analysis.schatten import (
    default_q,
    det_regularized,
    eigenvalues,
    regularized_determinant,
    schatten_norm,
    schatten_norms,
    singular_values,
    smallest_singular_value_of_shift,
)

indices = st.sampled_from([1.0, 1.5, 2.0, 3.0, 7.0, math.inf])
seeds = st.integers(min_value=0, max_value=2 ** 32 - 1)


def _random(seed: int, rows: int = 3, cols: int = 3) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))


def test_diagonal_norms():
    a = np.diag([3.0, 4.0])
    assert schatten_norm(a, 1) == pytest.approx(7.0)
    assert schatten_norm(a, 2) == pytest.approx(5.0)
    assert schatten_norm(a, math.inf) == pytest.approx(4.0)


def test_hilbert_schmidt_is_frobenius():
    a = _random(1, 4, 2)
    assert schatten_norm(a, 2) == pytest.approx(np.linalg.norm(a, "fro"))


@settings(max_examples=50)
@given(seeds, indices, indices)
def test_norms_decrease_in_p(seed, p, q):
    a = _random(seed)
    lo, hi = sorted((p, q))
    assert schatten_norm(a, hi) <= schatten_norm(a, lo) * (1 + 1e-12)


@settings(max_examples=50)
@given(seeds, indices)
def test_triangle_inequality(seed, p):
    a, b = _random(seed), _random(seed + 1)
    assert schatten_norm(a + b, p) <= (schatten_norm(a, p) + schatten_norm(b, p)) * (1 + 1e-12)


@settings(max_examples=30)
@given(seeds, indices)
def test_stacked_norms_agree(seed, p):
    stack = np.stack([_random(seed + k, 2, 3) for k in range(4)])
    expected = [schatten_norm(m, p) for m in stack]
    assert np.allclose(schatten_norms(stack, p), expected)


@settings(max_examples=50)
@given(seeds, indices)
def test_doubled_index_squares_to_gram_norm(seed, p):
    a = _random(seed, 3, 4)
    assert schatten_norm(a, 2 * p) ** 2 == pytest.approx(schatten_norm(a.conj().T @ a, p), rel=1e-9)


def test_vectors_use_euclidean_norm():
    v = np.array([[3.0], [4.0]])
    assert schatten_norms(v[None], 1)[0] == pytest.approx(5.0)
    assert schatten_norm(v, 1) == pytest.approx(5.0)


def test_tiny_values_do_not_underflow():
    a = np.diag([1e-200, 1e-200])
    assert schatten_norm(a, 2) == pytest.approx(math.sqrt(2) * 1e-200)


def test_singular_values_sorted():
    sigma = singular_values(_random(3, 4, 3))
    assert sigma.size == 3
    assert np.all(np.diff(sigma) <= 0)


@pytest.mark.parametrize("p", [0.5, 0.0, -1.0, math.nan])
def test_index_below_one_is_rejected(p):
    with pytest.raises(SchattenIndexError):
        schatten_norm(np.eye(2), p)


def test_non_finite_entries_are_rejected():
    with pytest.raises(NonFiniteMatrixError):
        schatten_norm(np.array([[1.0, math.nan]]), 2)


def test_default_q():
    assert default_q(1) == 1
    assert default_q(2.5) == 3
    with pytest.raises(SchattenIndexError):
        default_q(math.inf)


def test_det_order_one_is_plain_determinant():
    a = _random(5)
    assert det_regularized(a, 1) == pytest.approx(np.linalg.det(np.eye(3) + a))


def test_det2_of_diagonal():
    lam = np.array([0.5, -0.25])
    expected = np.prod((1 + lam) * np.exp(-lam))
    assert det_regularized(np.diag(lam), 2) == pytest.approx(expected)


def test_det2_of_identity_shift():
    assert det_regularized(np.eye(2), 2) == pytest.approx(4 / math.e ** 2)


def test_det_detects_singular_shift():
    a = np.diag([-1.0, 0.3])
    det = regularized_determinant(a, 2)
    assert not det.is_invertible()
    assert smallest_singular_value_of_shift(a) == pytest.approx(0.0, abs=1e-14)


def test_det_invertible_when_shift_is_well_conditioned():
    det = regularized_determinant(0.1 * np.eye(3), 3)
    assert det.is_invertible()
    assert det.relative_modulus == pytest.approx(1.0)


def test_eigenvalues_of_jordan_block():
    jordan = np.array([[2.0, 1.0], [0.0, 2.0]])
    assert np.allclose(eigenvalues(jordan), [2.0, 2.0])


def test_det_needs_square_matrix():
    with pytest.raises(NonSquareMatrixError):
        det_regularized(np.ones((2, 3)), 2)
