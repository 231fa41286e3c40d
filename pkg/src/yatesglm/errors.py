"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class YatesError(Exception):
    """Base class for every error raised by this package."""


class InvalidInputError(YatesError, ValueError):
    """Malformed or non-finite input, or a violated precondition."""


class NotEstimableError(InvalidInputError):
    """Raised when span(G) is not contained in the row space of X."""

    def __init__(self, columns: list[int], residuals: list[float]):
        self.columns = list(columns)
        self.residuals = list(residuals)
        detail = ", ".join(f"{c} (residual {r:.3g})" for c, r in zip(columns, residuals))
        super().__init__(f"hypothesis is not estimable; offending G columns: {detail}")


class DegenerateHypothesisError(InvalidInputError):
    """The hypothesis has zero numerator degrees of freedom."""


class SaturatedModelError(YatesError):
    """The full model leaves no error degrees of freedom, so no F-test exists."""


class InvalidConstructionError(InvalidInputError):
    """An (A, C) construction violates its invariants (e.g. D not positive-definite)."""


class EmptyCellError(InvalidInputError):
    """A two-factor layout has one or more cells without observations."""

    def __init__(self, cells: list[tuple[str, str]]):
        self.cells = list(cells)
        listing = ", ".join(f"({a}, {b})" for a, b in cells)
        super().__init__(f"empty cells: {listing}")


class DegenerateFactorError(InvalidInputError):
    """A factor has fewer than two levels."""
