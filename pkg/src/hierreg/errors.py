"""Exception types shared across the package."""


class HierregError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatch(HierregError):
    """Shapes of related arrays disagree (ragged designs, wrong lengths)."""


class NonFinite(HierregError):
    """An input array contains NaN or infinity."""


class EmptyDataset(HierregError):
    """A dataset with zero groups was supplied where data is required."""


class DomainError(HierregError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class NotPositiveDefinite(HierregError, ArithmeticError):
    """A matrix required to be SPD has a non-positive pivot."""


class RankDeficient(HierregError):
    """Design matrix does not have full column rank."""


class InsufficientDraws(HierregError):
    """Too few retained posterior draws for the requested summary."""


class MissingColumn(HierregError, KeyError):
    """A required column is absent from a tabular file."""


class ParseError(HierregError):
    """A cell of a tabular file failed to parse; reports row and column."""


class RaggedRows(HierregError):
    """A tabular file has rows of differing lengths."""
