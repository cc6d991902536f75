"""Error taxonomy.

Every failure mode the library can report maps to one exception class with a
distinct process exit code, so batch drivers can tell input mistakes apart
from numerical failures without parsing messages.
"""

from __future__ import annotations


class ConelqError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class ParseError(ConelqError):
    """Config file is not readable as the expected text format."""

    exit_code = 2


class SchemaError(ConelqError):
    """Config parsed but a key is missing, mistyped, or out of domain."""

    exit_code = 3


class ViolatedAssumption(ConelqError):
    """A model-level standing assumption fails (e.g. E0 < -1, lambda < 0)."""

    exit_code = 4


class NotPSD(ConelqError):
    """A weight matrix that must be positive semidefinite is not."""

    exit_code = 5


class NeitherCase(ConelqError):
    """Problem satisfies neither the standard nor the singular certificate."""

    exit_code = 6


class OutOfRange(ConelqError):
    """A time/state query lies outside the solved domain."""

    exit_code = 7


class NonCoercive(ConelqError):
    """A Hamiltonian objective is unbounded below on the cone."""

    exit_code = 8


class ConvexityViolated(ConelqError):
    """A convexity certificate failed during the backward sweep."""

    exit_code = 9


class BlowUp(ConelqError):
    """A Riccati curve exceeded the finite-escape guard ceiling."""

    exit_code = 10


class InvariantViolation(ConelqError):
    """An assembled solution failed one of its hard invariants."""

    exit_code = 11


class NonFinite(ConelqError):
    """NaN or infinity appeared where a finite number is required."""

    exit_code = 12


class InfeasibleTarget(ConelqError):
    """Mean-variance target is not attainable in the given market."""

    exit_code = 13


class DegenerateDual(ConelqError):
    """The dual quadratic is degenerate (N0 * e^{-2 int r} >= 1)."""

    exit_code = 14


EXIT_CODES = {
    cls.__name__: cls.exit_code
    for cls in (
        ConelqError,
        ParseError,
        SchemaError,
        ViolatedAssumption,
        NotPSD,
        NeitherCase,
        OutOfRange,
        NonCoercive,
        ConvexityViolated,
        BlowUp,
        InvariantViolation,
        NonFinite,
        InfeasibleTarget,
        DegenerateDual,
    )
}
