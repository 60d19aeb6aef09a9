"""Exception types shared across the package."""


class QOrthoError(Exception):
    """Base class for every error raised by qortho."""


class DomainError(QOrthoError, ValueError):
    """Input outside the mathematical domain of an operation."""


class PoleProximityError(DomainError):
    pass


class DivergentMomentError(DomainError):
    pass


class InadmissibleWeightError(DomainError):
    pass


class TableMissError(QOrthoError, KeyError):
    """A tabulated lattice function was read outside its stored range."""


class NumericFailure(QOrthoError, ArithmeticError):
    """Base for failures of a numerical procedure (exit code 3 in the CLI)."""


class TruncationError(NumericFailure):
    """An infinite sum or product hit ``max_terms`` before meeting its tolerance."""


class ResonanceError(NumericFailure):
    pass


class NonConvergenceError(NumericFailure):
    pass


class DegenerateMeasureError(NumericFailure):
    pass


class NoSignChangeError(NumericFailure):
    pass
