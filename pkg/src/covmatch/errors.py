"""Exception types shared by all modules.

The CLI maps these onto exit codes: ``InputError`` -> 1, ``CapacityError`` -> 2.
"""


class CovmatchError(Exception):
    """Base class for library errors."""

    kind = "error"


class InputError(CovmatchError, ValueError):
    """Malformed or out-of-domain input."""

    kind = "input"


class CapacityError(CovmatchError):
    """A computation would exceed the configured size caps."""

    kind = "capacity"


class EvaluationError(CovmatchError, ArithmeticError):
    """A numerical evaluation produced a non-finite value."""

    kind = "evaluation"
