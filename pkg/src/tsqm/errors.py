"""Exception hierarchy shared by all modules."""


class TsqmError(Exception):
    """Base class for every error raised by the package."""


class DimensionMismatch(TsqmError, ValueError):
    pass


class ZeroVector(TsqmError, ValueError):
    pass


class NotNormalized(TsqmError, ValueError):
    pass


class InvariantViolation(TsqmError, ValueError):
    """An operator or context failed an eager constructor check.

    ``invariant`` names the failed condition (e.g. ``"mutual-orthogonality"``)
    and ``detail`` carries the offending value.
    """

    def __init__(self, invariant: str, detail: str = ""):
        self.invariant = invariant
        self.detail = detail
        super().__init__(f"{invariant}: {detail}" if detail else invariant)


class ZeroProbabilityOutcome(TsqmError, ValueError):
    pass


class EmptyEnsemble(TsqmError):
    """Pre- and postselection admit no surviving trial."""


class UnknownOutcome(TsqmError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class NoPostselectedTrials(TsqmError):
    pass


class StepNotMeasure(TsqmError, ValueError):
    pass


class TooManyContexts(TsqmError, ValueError):
    pass


class ParseError(TsqmError):
    def __init__(self, location: str, message: str):
        self.location = location
        self.message = message
        super().__init__(f"{location}: {message}")


class ValidationError(TsqmError):
    def __init__(self, invariant: str, location: str, detail: str = ""):
        self.invariant = invariant
        self.location = location
        self.detail = detail
        msg = f"{location}: {invariant} violated"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)
