"""Exception types shared across the package."""


class SmoothQuantError(Exception):
    """Base class for all package errors."""


class NotSymmetric(SmoothQuantError):
    pass


class NotPSD(SmoothQuantError):
    pass


class DimensionMismatch(SmoothQuantError):
    pass


class RankOutOfRange(SmoothQuantError):
    pass


class EmptyData(SmoothQuantError):
    pass


class BlockSizesMismatch(SmoothQuantError):
    pass


class InvalidProbability(SmoothQuantError):
    pass


class UnknownKind(SmoothQuantError):
    pass


class BudgetTooSmall(SmoothQuantError):
    pass


class DegenerateBlock(SmoothQuantError):
    pass


class NonpositiveMu(SmoothQuantError):
    pass


class NonpositiveBeta(SmoothQuantError):
    pass


class LevelOverflow(SmoothQuantError):
    pass


class MalformedPayload(SmoothQuantError):
    pass


class TruncatedPayload(SmoothQuantError):
    pass


class OutOfRange(SmoothQuantError):
    pass


class MalformedLine(SmoothQuantError):
    pass


class NonNumericValue(SmoothQuantError):
    pass


class IndexZero(SmoothQuantError):
    pass


class TooFewRows(SmoothQuantError):
    pass


class NoConvergence(SmoothQuantError):
    pass


class NonfiniteGradient(SmoothQuantError):
    pass


class AlphaTooLarge(SmoothQuantError):
    pass


class ZeroDenominator(SmoothQuantError):
    pass


class ConfigParse(SmoothQuantError):
    pass


class DatasetNotFound(SmoothQuantError):
    pass


class EmptyTraces(SmoothQuantError):
    pass
