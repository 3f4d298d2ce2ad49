"""Exact integration over the unit cube by splitting it into order simplices.

On the simplex ``u_{p(1)} < u_{p(2)} < ... < u_{p(d)}`` every ``min(u_a, u_b)``
is a single coordinate, so products of min-kernels become monomials whose
iterated integral has a closed form.  Index 0 always denotes the fixed
endpoint ``u_0 = 1``, which is larger than every integration variable.
"""
from __future__ import annotations

import itertools
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

from .errors import CapacityError, InputError
from .polynomial import Polynomial

MAX_SIMPLEX_DIM = 8


def simplex_monomial_integral(exponents: Sequence[int]) -> Fraction:
    """Integral of ``prod v_i**p_i`` over ``0 < v_1 < ... < v_d < 1``.

    Integrating out ``v_1, v_2, ...`` in turn gives
    ``prod_m 1 / sum_{i<=m} (p_i + 1)``.
    """
    value = Fraction(1)
    running = 0
    for p in exponents:
        if p < 0:
            raise InputError(f"negative exponent {p}")
        running += p + 1
        value /= running
    return value


def order_simplices(d: int):
    """Orderings of ``d`` variables; each tuple lists variables from smallest to largest."""
    if d > MAX_SIMPLEX_DIM:
        raise CapacityError(f"{d}! order simplices exceeds cap for d <= {MAX_SIMPLEX_DIM}")
    return itertools.permutations(range(d))


@lru_cache(maxsize=None)
def _min_product_integral(factors: tuple[tuple[int, int, int], ...], d: int) -> Fraction:
    total = Fraction(0)
    for order in order_simplices(d):
        # rank[v] is the position of variable v (1-based) in ascending order; u_0 ranks last
        rank = {0: d + 1}
        for pos, var in enumerate(order):
            rank[var + 1] = pos
        powers = [0] * d
        for a, b, e in factors:
            low = a if rank[a] <= rank[b] else b
            if low != 0:
                powers[rank[low]] += e
        total += simplex_monomial_integral(powers)
    return total


def integrate_min_product(factors: Iterable[tuple[int, int, int]], d: int) -> Fraction:
    """Exact ``int_{[0,1]^d} prod min(u_a, u_b)**e du_1...du_d`` with ``u_0 = 1``.

    ``factors`` holds triples ``(a, b, e)`` with ``0 <= a, b <= d``.
    """
    norm = []
    for a, b, e in factors:
        if not (0 <= a <= d and 0 <= b <= d):
            raise InputError(f"factor index out of range: {(a, b)} for d={d}")
        if e:
            norm.append((min(a, b), max(a, b), int(e)))
    return _min_product_integral(tuple(sorted(norm)), d)


def integrate_on_simplex(poly: Polynomial, order: Sequence[int]) -> Fraction:
    """Integrate ``poly`` over the order simplex listing variables in ``order``."""
    if sorted(order) != list(range(poly.dim)):
        raise InputError(f"order {order} is not a permutation of {poly.dim} variables")
    total = Fraction(0)
    for exps, coeff in poly.sorted_terms():
        total += coeff * simplex_monomial_integral([exps[v] for v in order])
    return total
