"""
Explicit constants of the weak-type estimates, as functions of C_X.

Each function returns the constant K in an estimate of the form
`quasinorm <= K * ||mu||(R)` (or `<= K * ||g||` for M_beta).
"""
import math

from analysis.errors import ExponentRangeError


def hardy_littlewood() -> float:
    """||M nu||_{L^{1,inf}} <= 3 nu(R)."""
    return 3.0


def hilbert_weak(c_x: float) -> float:
    return 30.0 + 4.0 * c_x


def hilbert_sharp_weak(c_x: float) -> float:
    return 17592.0 + 2304.0 * c_x


def nontangential_weak(c_x: float) -> float:
    return 35274.0 + 4608.0 * c_x


def nontangential_weak_doubled(c_x: float) -> float:
    """The constant after passing from the truncated cone to the full one."""
    return 70548.0 + 9216.0 * c_x


def mbeta_weak(beta: float) -> float:
    """||M_beta g||_{L^{1,inf}} <= 6^{1/beta}/(1-beta) ||g||_{L^{1,inf}}."""
    if not 0.0 < beta < 1.0:
        raise ExponentRangeError(f"beta must lie in (0, 1), got {beta}.")
    return 6.0 ** (1.0 / beta) / (1.0 - beta)


def cone_to_hilbert() -> float:
    """||C mu(lambda + x + ir) - H_{2r} mu(lambda)|| <= (2 + 4 pi) M||mu||(lambda)."""
    return 2.0 + 4.0 * math.pi


def off_support_bad_part() -> float:
    """int outside the doubled intervals of ||H nu|| <= 4 pi ||mu||(R)."""
    return 4.0 * math.pi


def minimal_c_x(quasinorm: float, total_variation: float, constant_at_zero: float, slope: float) -> float:
    """
    Smallest C_X >= 0 for which quasinorm <= (constant_at_zero + slope*C_X) * total_variation.
    """
    if total_variation <= 0:
        return 0.0
    return max(0.0, (quasinorm / total_variation - constant_at_zero) / slope)
