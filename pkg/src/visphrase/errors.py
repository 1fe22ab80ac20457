"""Exception and warning types shared across the package."""


class VisphraseError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(VisphraseError):
    """A file does not follow its declared format."""


class ContractError(VisphraseError, ValueError):
    """Arguments violate an operation's preconditions."""


class UndefinedSimilarityError(VisphraseError, ValueError):
    """Cosine similarity requested for a zero-norm vector."""


class EmptyPoolError(VisphraseError):
    """No candidate labels remain after filtering."""


class DegenerateInputError(VisphraseError, ValueError):
    """Input carries no usable signal (e.g. an all-zero count matrix)."""


class NumericalError(VisphraseError, ArithmeticError):
    """A matrix computation could not be carried out reliably."""


class UndefinedMetricError(VisphraseError, ValueError):
    """A metric is undefined for the given inputs (e.g. AUC without negatives)."""


class NoPrototypeError(VisphraseError):
    """A noun has no adjective above the selectional-preference threshold."""


class StateError(VisphraseError, RuntimeError):
    """An object is used before it has been fitted."""


class RankDeficiencyWarning(UserWarning):
    """A solver fell back to a pseudoinverse or padded a decomposition."""
