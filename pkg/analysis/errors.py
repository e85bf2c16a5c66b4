class LabError(Exception):
    """
    Base class for every error raised by the laboratory.
    """


class DyadicScaleError(LabError, ValueError):
    """Scale index outside the range where 2^-n is a normal float."""


class NonFiniteMatrixError(LabError, ValueError):
    """A matrix with NaN or Inf entries was passed in."""


class SchattenIndexError(LabError, ValueError):
    """Schatten index p < 1 (or not a number)."""


class NonSquareMatrixError(LabError, ValueError):
    pass


class ShapeMismatchError(LabError, ValueError):
    pass


class HalfPlaneError(LabError, ValueError):
    """Spectral parameter on the wrong side of (or on) the real axis."""


class UndefinedAtAtomError(LabError, ValueError):
    """Principal-value transform evaluated exactly at an atom or a density jump."""


class EmptyGridError(LabError, ValueError):
    pass


class ExponentRangeError(LabError, ValueError):
    """Exponent beta outside the open interval (0, 1)."""


class EmptyMeasureError(LabError, ValueError):
    pass


class LevelError(LabError, ValueError):
    """Non-positive stopping level s."""


class OverlappingIntervalsError(LabError, ValueError):
    pass


class MismatchedGoodPartError(LabError, ValueError):
    pass


class NonHermitianError(LabError, ValueError):
    pass


class SingularPerturbationError(LabError):
    """
    I + B_0(z)J is numerically singular at the requested z.

    Raised instead of inverting silently; carries the offending z and the
    smallest singular value found.
    """
    def __init__(self, z: complex, smallest_singular_value: float):
        self.z = z
        self.smallest_singular_value = smallest_singular_value
        super().__init__(
            f"I + B0(z)J is singular at z={z}: smallest singular value {smallest_singular_value:.3e}"
        )


class LadderError(LabError, ValueError):
    """Epsilon ladder not strictly decreasing or reaching below its floor."""


class ConfigError(LabError, ValueError):
    pass


class FixtureError(LabError, ValueError):
    pass
