"""Exception types shared across the package.

The CLI maps :class:`NumericalFailure` (and subclasses) to exit code 4.
"""


class SpaceMismatch(ValueError):
    """Operands live on incompatible weighted spaces or have wrong dimensions."""


class ClassViolation(ValueError):
    """A map is not in the class (subresonant, strictly subresonant, ...) an operation requires."""


class NumericalFailure(ArithmeticError):
    """A numerical routine refused to produce an answer."""


class SmallDivisor(NumericalFailure):
    """A homological equation hit a (near-)resonant divisor."""

    def __init__(self, message, slot=None, divisor=None):
        super().__init__(message)
        self.slot = slot
        self.divisor = divisor


class UnresolvedFlag(NumericalFailure):
    """An Oseledets level could not be separated at the available horizon."""


class DivergenceError(NumericalFailure):
    """An iteration that should converge did not."""
