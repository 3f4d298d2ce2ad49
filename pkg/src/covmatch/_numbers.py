"""Parsing and formatting of scalars that may be exact rationals."""
from __future__ import annotations

import math
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Union

from .errors import InputError

Scalar = Union[Fraction, float]


def parse_scalar(value) -> Scalar:
    """Return ``value`` as a Fraction when it is rational-typed, else as float.

    Accepts ints, Fractions, floats and strings such as ``"3/8"``, ``"2"`` or
    ``"0.25"``.  Decimal strings are taken as exact; bare floats stay floats.
    """
    if isinstance(value, bool):
        raise InputError(f"boolean is not a number: {value!r}")
    if isinstance(value, Rational):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise InputError(f"non-finite number: {value!r}")
        return value
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise InputError(f"cannot parse number {value!r}") from exc
    try:
        out = float(value)
    except (TypeError, ValueError) as exc:
        raise InputError(f"cannot parse number {value!r}") from exc
    if not math.isfinite(out):
        raise InputError(f"non-finite number: {value!r}")
    return out


def unify(values: Iterable) -> tuple[list[Scalar], bool]:
    """Parse ``values``; if any is a float, demote all to float.

    Returns the parsed list and whether it is exact.
    """
    parsed = [parse_scalar(v) for v in values]
    exact = all(isinstance(v, Fraction) for v in parsed)
    if not exact:
        parsed = [float(v) for v in parsed]
    return parsed, exact


def format_scalar(value) -> str:
    """Render exact values as ``p/q`` and floats with 17 significant digits."""
    if isinstance(value, Fraction):
        if value.denominator == 1:
            return str(value.numerator)
        return f"{value.numerator}/{value.denominator}"
    if isinstance(value, int):
        return str(value)
    return format(float(value), ".17g")


def jsonable(value):
    """Rationals become ``p/q`` strings; ints and floats stay JSON numbers."""
    if isinstance(value, Fraction):
        return format_scalar(value)
    if isinstance(value, int):
        return value
    return float(value)
