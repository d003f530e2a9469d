"""Exception types shared across the package."""


class FifieldError(Exception):
    """Base class for all package errors."""


class DegeneratePoint(FifieldError):
    """Landmark coincides with the camera center (bearing undefined)."""


class TooFewSamples(FifieldError):
    """Direction sampling requested with count < 4."""


class SingularFov(FifieldError):
    """Quadratic visibility coefficients undefined (|cos alpha| ~ 1)."""


class SingularGram(FifieldError):
    """GP Gram matrix too ill-conditioned to invert reliably."""


class OutOfField(FifieldError):
    """Query position outside the voxel grid coverage."""


class WrongFactorKind(FifieldError):
    """Operation requires a different factor kind (info vs trace)."""


class EmptyGrid(FifieldError):
    """Grid with zero voxels."""


class BadMagic(FifieldError):
    """Field file does not start with the expected magic bytes."""


class VersionMismatch(FifieldError):
    """Field file written with an unsupported format version."""


class TruncatedFile(FifieldError):
    """Field file ends before the declared payload."""


class NoPathError(FifieldError):
    """Sampling planner found no valid path within its budget.

    `result` holds the partial planner statistics when the search ran, and
    stays None when the start or goal state was rejected outright.
    """

    result = None


class SingularCostMatrix(FifieldError):
    """Polynomial fit cost matrix is singular (degenerate durations)."""
