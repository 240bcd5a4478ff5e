"""Exception hierarchy shared by all modules."""


class MarkovRecoveryError(ValueError):
    """Base class for every error raised by this package."""


class NotHermitian(MarkovRecoveryError):
    pass


class NonFinite(MarkovRecoveryError):
    pass


class NegativeEigenvalue(MarkovRecoveryError):
    pass


class DimMismatch(MarkovRecoveryError):
    pass


class InvalidState(MarkovRecoveryError):
    pass


class BadRank(MarkovRecoveryError):
    pass


class UnknownName(MarkovRecoveryError):
    pass


class ParseError(MarkovRecoveryError):
    pass


class SchemaViolation(MarkovRecoveryError):
    pass


class OutOfRange(MarkovRecoveryError):
    pass


class SingularInput(MarkovRecoveryError):
    pass


class NonUnitaryParams(MarkovRecoveryError):
    pass


class NotCP(MarkovRecoveryError):
    pass


class BudgetZero(MarkovRecoveryError):
    pass


class EpsilonOutOfRange(MarkovRecoveryError):
    pass


class NotApplicable(MarkovRecoveryError):
    pass


class PreconditionViolated(MarkovRecoveryError):
    pass


class TooLarge(MarkovRecoveryError):
    pass


class TooManyTypes(MarkovRecoveryError):
    pass


class MarginalMismatch(MarkovRecoveryError):
    pass
