"""Exception hierarchy shared by every stage of the pipeline."""


class LagdistError(Exception):
    """Base class for all errors raised by lagdist."""


class DataError(LagdistError):
    """Input data is missing, malformed or unusable."""


class EmptyInputError(DataError):
    """A sequence source produced no usable A/C/G/T segment."""


class DegenerateInputError(DataError):
    """Input has too few distinct rows for the requested number of clusters."""


class InvalidCaseError(DataError):
    """A simulation factor combination lies outside the study design."""


class NumericalError(LagdistError):
    """A numerical procedure failed to produce a usable answer."""


class FitError(NumericalError):
    """Baseline fit could not be computed.

    ``diagnostics`` holds whatever per-start information was collected
    before giving up.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class UndefinedIndexError(NumericalError):
    """A validity or agreement index is undefined for the given partition."""
