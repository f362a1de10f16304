"""Exception hierarchy.

Validation problems (bad parameters, bad shapes) derive from ``ValueError``;
numerical breakdowns derive from ``ArithmeticError``.  The CLI maps the first
family to exit code 1 and the second to exit code 2.
"""


class ValidationError(ValueError):
    """Input outside the documented domain."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class NumericalError(ArithmeticError):
    """A computation could not be completed reliably."""


class NotPositiveDefinite(NumericalError):
    pass


class InsufficientExcitation(NumericalError):
    pass


class AssumptionViolated(NumericalError):
    pass


class OutsideStabilityRegion(NumericalError):
    pass


class EmbeddingNotNonnegative(NumericalError):
    pass
