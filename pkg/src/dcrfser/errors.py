"""Exception types shared across the pipeline.

``DataError`` subclasses map to CLI exit code 2 and ``NumericalError``
subclasses to exit code 3.
"""


class SERError(Exception):
    """Base class for all pipeline errors."""


class DataError(SERError):
    pass


class NumericalError(SERError):
    pass


class MalformedHeader(DataError):
    pass


class UnsupportedEncoding(DataError):
    pass


class EmptyCorpus(DataError):
    pass


class ClassTooSmall(DataError):
    pass


class TooFewEntries(DataError):
    pass


class FeatureStoreMissing(DataError):
    pass


class ClipTooShort(DataError):
    pass


class NonFiniteInput(NumericalError):
    pass


class NonFiniteLoss(NumericalError):
    pass


class ShapeMismatch(ValueError, SERError):
    pass


class DegenerateBatch(ValueError, SERError):
    pass
