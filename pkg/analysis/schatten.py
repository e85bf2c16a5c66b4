"""
Schatten-class toolkit at finite dimension.

A ComplexMatrix is a 2-D complex numpy array. The Schatten index p is a
float in [1, inf]; math.inf stands for the operator norm everywhere.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt
from scipy import linalg

from analysis.errors import NonFiniteMatrixError, NonSquareMatrixError, SchattenIndexError

ComplexMatrix = npt.NDArray[np.complex128]

OPERATOR_NORM = math.inf

# Eigenvector matrices worse conditioned than this are treated as defective.
DEFECTIVE_CONDITION = 1e8


def as_matrix(a) -> ComplexMatrix:
    """Coerces `a` to a finite 2-D complex array."""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    elif m.ndim == 1:
        m = m.reshape(-1, 1)
    if m.ndim != 2:
        raise NonFiniteMatrixError(f"Expected a matrix, got an array of shape {m.shape}.")
    if not np.all(np.isfinite(m)):
        raise NonFiniteMatrixError("Matrix has non-finite entries.")
    return m


def check_index(p: float) -> float:
    p = float(p)
    if math.isnan(p) or p < 1:
        raise SchattenIndexError(f"Schatten index must lie in [1, inf], got {p}.")
    return p


def singular_values(a) -> np.ndarray:
    """Singular values in nonincreasing order, min(rows, cols) of them."""
    m = as_matrix(a)
    if m.size == 0:
        return np.zeros(0)
    return linalg.svdvals(m, check_finite=True)


def norm_from_singular_values(sigma: np.ndarray, p: float) -> np.ndarray:
    """
    Schatten norm along the last axis of an array of singular values.
    """
    p = check_index(p)
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape[-1] == 0:
        return np.zeros(sigma.shape[:-1])
    if math.isinf(p):
        return np.max(sigma, axis=-1)
    if p == 1:
        return np.sum(sigma, axis=-1)
    # Scale by the largest value so sigma**p cannot underflow or overflow.
    top = np.max(sigma, axis=-1)
    safe = np.where(top > 0, top, 1.0)
    ratio = sigma / safe[..., None]
    return top * np.sum(ratio ** p, axis=-1) ** (1.0 / p)


def schatten_norm(a, p: float = OPERATOR_NORM) -> float:
    """(sum sigma_k^p)^(1/p); p = inf gives the largest singular value."""
    p = check_index(p)
    return float(norm_from_singular_values(singular_values(a), p))


def schatten_norms(stack: np.ndarray, p: float = OPERATOR_NORM) -> np.ndarray:
    """
    Schatten norms of a stack of matrices with shape (..., rows, cols).
    """
    p = check_index(p)
    stack = np.asarray(stack, dtype=np.complex128)
    if stack.shape[-1] == 1 or stack.shape[-2] == 1:
        # Vectors: every Schatten norm is the Euclidean norm.
        return np.sqrt(np.sum(np.abs(stack) ** 2, axis=(-2, -1)))
    sigma = np.linalg.svd(stack, compute_uv=False)
    return norm_from_singular_values(sigma, p)


def default_q(p: float) -> int:
    """Smallest integer q >= p, the default order for Det_q."""
    p = check_index(p)
    if math.isinf(p):
        raise SchattenIndexError("Det_q needs a finite Schatten index to pick q from.")
    return max(1, math.ceil(p))


def eigenvalues(a) -> np.ndarray:
    """
    Eigenvalues of a square, possibly non-normal, matrix.

    Falls back to the diagonal of the complex Schur form when the
    eigenvector basis is numerically defective.
    """
    m = as_matrix(a)
    if m.shape[0] != m.shape[1]:
        raise NonSquareMatrixError(f"Expected a square matrix, got shape {m.shape}.")
    if m.shape[0] == 0:
        return np.zeros(0, dtype=np.complex128)
    w, v = linalg.eig(m)
    if np.linalg.cond(v) > DEFECTIVE_CONDITION:
        logging.debug("Eigenvector basis is defective; using the Schur diagonal.")
        t, _ = linalg.schur(m, output="complex")
        w = np.diag(t)
    return w


@dataclass(frozen=True)
class RegularizedDeterminant:
    """
    Det_q(I + A) together with the scale used to decide whether it vanishes.
    """
    value: complex
    scale: float
    q: int

    @property
    def relative_modulus(self) -> float:
        return abs(self.value) / self.scale if self.scale > 0 else 0.0

    def is_invertible(self, threshold: float = 1e-10) -> bool:
        return self.relative_modulus > threshold


def _regularization_exponent(lam: np.ndarray, q: int) -> np.ndarray:
    total = np.zeros_like(lam)
    power = np.ones_like(lam)
    for j in range(1, q):
        power = power * lam
        total = total + ((-1) ** j) * power / j
    return total


def regularized_determinant(a, q: int) -> RegularizedDeterminant:
    """
    Det_q(I + A) = prod_k (1 + l_k) exp(sum_{j<q} (-1)^j l_k^j / j).
    """
    if int(q) != q or q < 1:
        raise SchattenIndexError(f"Det_q needs a positive integer q, got {q}.")
    q = int(q)
    lam = eigenvalues(a)
    exponent = _regularization_exponent(lam, q)
    value = complex(np.prod((1.0 + lam) * np.exp(exponent)))
    scale = float(np.prod((1.0 + np.abs(lam)) * np.abs(np.exp(exponent))))
    return RegularizedDeterminant(value=value, scale=scale, q=q)


def det_regularized(a, q: int) -> complex:
    return regularized_determinant(a, q).value


def smallest_singular_value_of_shift(a) -> float:
    """Smallest singular value of I + A."""
    m = as_matrix(a)
    if m.shape[0] != m.shape[1]:
        raise NonSquareMatrixError(f"Expected a square matrix, got shape {m.shape}.")
    if m.shape[0] == 0:
        return 1.0
    return float(singular_values(np.eye(m.shape[0]) + m)[-1])
