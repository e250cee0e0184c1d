"""Exception taxonomy for causalest.

Every structured failure raised by the library derives from
:class:`CausalestError`, so callers can catch one base class. Data-shape
problems and estimation problems get distinct subclasses because the CLI maps
them to different exit codes.
"""

from __future__ import annotations


class CausalestError(Exception):
    """Base class for all structured errors raised by this package."""


# ---------------------------------------------------------------------------
# data / validation
# ---------------------------------------------------------------------------

class LengthMismatchError(CausalestError):
    """Input columns do not share a common length."""


class NonFiniteValueError(CausalestError):
    """An input column contains NaN or infinity."""


class EmptyDatasetError(CausalestError):
    """Dataset has too few rows to be usable."""


class EmptyTreatmentArmError(CausalestError):
    """A required treatment arm has no units."""


# ---------------------------------------------------------------------------
# regression
# ---------------------------------------------------------------------------

class RankDeficientError(CausalestError):
    """Design matrix is (numerically) rank deficient."""


class DimensionMismatchError(CausalestError):
    """Matrix/vector dimensions are inconsistent."""


class SeparationError(CausalestError):
    """Logistic fit detected (quasi-)complete separation."""


class NoTreatmentVariationError(CausalestError):
    """The 0/1 response of a logistic fit has a single class."""


class ConvergenceError(CausalestError):
    """Iterative fit exhausted its iteration budget before converging."""


# ---------------------------------------------------------------------------
# propensity
# ---------------------------------------------------------------------------

class SigmaFloorError(CausalestError):
    """Residual scale of a density model fell below the numerical floor."""


class AllUnitsTrimmedError(CausalestError):
    """Overlap trimming removed every unit."""


# ---------------------------------------------------------------------------
# estimators
# ---------------------------------------------------------------------------

class ZeroPropensityError(CausalestError):
    """A propensity score used as a divisor is below the 1e-12 floor."""


class EmptyDoseGroupError(CausalestError):
    """No units received the requested dose."""


class NoUsableStratumError(CausalestError):
    """Every propensity stratum is missing one treatment arm."""


class InsufficientMatchesError(CausalestError):
    """An arm is smaller than the requested number of matches."""


# ---------------------------------------------------------------------------
# panel
# ---------------------------------------------------------------------------

class NoWithinVariationError(CausalestError):
    """Treatment does not vary within units (or within differences)."""


class TooFewPeriodsError(CausalestError):
    """A unit has fewer periods than the method requires."""


# ---------------------------------------------------------------------------
# quasi-experimental
# ---------------------------------------------------------------------------

class WeakInstrumentError(CausalestError):
    """Instrument-treatment covariance is (numerically) zero."""


class OrderConditionError(CausalestError):
    """Fewer instruments than endogenous regressors."""


class EmptyCellError(CausalestError):
    """A group-by-period cell of the 2x2 design is empty."""


class DegenerateProblemError(CausalestError):
    """Synthetic-control problem has no usable donor variation."""


class OneSidedDataError(CausalestError):
    """All forcing-variable values fall on one side of the cutoff."""


class NoFirstStageJumpError(CausalestError):
    """Assignment probability does not jump at the cutoff."""


# ---------------------------------------------------------------------------
# variance
# ---------------------------------------------------------------------------

class TooManyFailedReplicatesError(CausalestError):
    """More than 10% of bootstrap replicates raised errors."""


class MissingCoefCovarianceError(CausalestError):
    """A fit lacks the coefficient covariance the formula requires."""


# ---------------------------------------------------------------------------
# simulation harness
# ---------------------------------------------------------------------------

class UnknownCaseError(CausalestError):
    """Requested simulation case id is not registered."""


class MissingReferenceCellError(CausalestError):
    """Reference table lacks a method present in the report."""


class TooManyFailedRunsError(CausalestError):
    """More than 5% of Monte Carlo runs failed for some method."""
