"""Exception hierarchy shared by all modules.

Refusals (a precondition the caller can fix) derive from ``PreconditionError``;
the CLI maps them to exit status 2.  ``PrecisionExhausted`` maps to 3.
"""


class TorusLeafError(Exception):
    """Base class for every error raised by the package."""


class PreconditionError(TorusLeafError, ValueError):
    """An operation refused its input."""


class OrderMismatchError(PreconditionError):
    pass


class NonInvertibleError(PreconditionError):
    pass


class ResonanceError(PreconditionError):
    """``tau**n == 1`` at the order being eliminated."""

    def __init__(self, order, divisor):
        self.order = order
        self.divisor = divisor
        super().__init__(f"resonant at order {order}: |tau^{order} - 1| = {divisor}")


class DegreeError(PreconditionError):
    pass


class DomainError(PreconditionError):
    """A point lies outside the chart, overlap or disk an operation requires."""

    def __init__(self, message, admissible_radius=None):
        self.admissible_radius = admissible_radius
        super().__init__(message)


class NotHyperbolicError(PreconditionError):
    pass


class CapExceeded(PreconditionError):
    def __init__(self, message, required=None):
        self.required = required
        super().__init__(message)


class PrecisionExhausted(TorusLeafError):
    """Working precision cannot deliver the requested tolerance."""

    def __init__(self, message, required_bits=None):
        self.required_bits = required_bits
        super().__init__(message)


class ParseError(TorusLeafError, ValueError):
    pass
