"""Exception types shared by all modules."""


class LabError(Exception):
    """Base class; `kind` is the short error name used in reports and the CLI."""

    kind = "error"


class InvalidParameter(LabError, ValueError):
    kind = "invalid-parameter"


class SingularArgument(LabError, ValueError):
    kind = "singular-argument"


class AccuracyNotReached(LabError):
    kind = "accuracy-not-reached"

    def __init__(self, message, value=None, error_estimate=None):
        super().__init__(message)
        self.value = value
        self.error_estimate = error_estimate


class PVDivergence(LabError):
    kind = "pv-divergence-detected"


class Underdetermined(LabError, ValueError):
    kind = "underdetermined"


class InvalidProfile(LabError, ValueError):
    kind = "invalid-profile"


class BracketFailure(LabError):
    kind = "bracket-failure"


class RadialDecreaseViolation(LabError):
    kind = "radial-decrease-violation"


class BandCollapse(LabError):
    kind = "band-collapse"


class NewtonFailure(LabError):
    kind = "newton-failure"

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class NotApplicable(LabError):
    kind = "not-applicable"


class DegenerateNorm(LabError, ValueError):
    kind = "degenerate-norm"


class DegenerateSet(LabError, ValueError):
    """Raised for an empty or a completely full pixel set."""

    kind = "empty-set/full-set"
