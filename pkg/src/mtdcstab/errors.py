"""Exception and warning types shared across the package."""


class GridError(ValueError):
    """A frequency grid violates its invariants (ordering, positivity, finiteness)."""


class SpanOverlapError(GridError):
    """The frequency spans of a set of responses have no usable intersection."""


class ParseError(ValueError):
    """A response file is malformed or contains non-finite samples."""


class DimensionError(ValueError):
    """Matrix dimensions are inconsistent with the declared or required shape."""


class ExtrapolationError(ValueError):
    """A resampling target lies outside the measured span of the source."""


class ZeroImpedanceError(ValueError):
    """A station pole impedance is (numerically) zero and cannot be inverted."""


class ManifestError(ValueError):
    """A system manifest is invalid (unknown endpoints, duplicate names, bad options)."""


class SingularMatrixError(ArithmeticError):
    """A per-frequency matrix inversion failed."""

    def __init__(self, message, freq_hz=None):
        super().__init__(message)
        self.freq_hz = freq_hz


class EigendecompositionError(ArithmeticError):
    """An eigendecomposition failed or is too ill-conditioned to use."""

    def __init__(self, message, cond=None, freq_hz=None):
        super().__init__(message)
        self.cond = cond
        self.freq_hz = freq_hz


class ZeroEigenvalueError(ValueError):
    """Normalization by a zero eigenvalue was requested."""


class LocusThroughPointError(ValueError):
    """A locus sample coincides with the winding reference point."""


class ConsistencyError(ArithmeticError):
    """Winding-number cross-checks disagree; the frequency grid is under-resolved
    or the measured span truncates an encirclement."""


class EmptyRangeError(ValueError):
    """A critical frequency range selects no grid points."""


class PoleOnGridError(ValueError):
    """A rational impedance has a pole on (or numerically on) a sampling point."""


class SingularPencilError(ArithmeticError):
    """The descriptor pencil of a synthetic system is singular."""


class StageError(RuntimeError):
    """An error raised by a pipeline stage, tagged with the stage name."""

    def __init__(self, stage, message):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


class ConditioningWarning(UserWarning):
    """A matrix operation ran on badly conditioned input; results may be noisy."""


class DegenerateEigenvalueWarning(UserWarning):
    """Nearly coincident eigenvalues were found; sensitivities there are unreliable."""


class ResolutionWarning(UserWarning):
    """The frequency grid is too coarse for a requested local fit."""
