"""Direct evaluation of generalized Gaussian moments via Isserlis' theorem.

This is the independent check on :mod:`covmatch.moments`: moments such as
``E[B_1^2 M_1 M_2]`` are computed by expanding every factor into an explicit
list of jointly Gaussian variables and summing over perfect pairings, with
no generating functions or differentiation involved.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .covariance import CovarianceKernel, SchemeSpec, scheme_covariance_matrix
from .errors import CapacityError, InputError
from .moments import DiophantineIndex, generalized_moment_via_polynomial
from .polynomial import Polynomial
from .simplex import integrate_on_simplex, order_simplices

MAX_DEGREE = 10
MAX_MU = 4


def perfect_pairings(items: Sequence):
    """Yield every partition of ``items`` into unordered pairs."""
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for i, partner in enumerate(rest):
        for tail in perfect_pairings(rest[:i] + rest[i + 1:]):
            yield [(first, partner)] + tail


def isserlis(cov, multiplicity: Sequence[int], max_degree: int = MAX_DEGREE):
    """``E[prod X_i^{m_i}]`` for centered Gaussians with covariance ``cov``.

    Entries of ``cov`` may be any commutative ring elements (numbers,
    Fractions, :class:`~covmatch.polynomial.Polynomial`).  Odd total degree
    gives exactly 0.
    """
    if any(m < 0 for m in multiplicity):
        raise InputError(f"negative multiplicity in {multiplicity}")
    if len(multiplicity) > len(cov):
        raise InputError("more multiplicities than covariance rows")
    variables = [i for i, m in enumerate(multiplicity) for _ in range(m)]
    if len(variables) % 2:
        return 0
    if len(variables) > max_degree:
        raise CapacityError(f"degree {len(variables)} exceeds Isserlis cap {max_degree}")
    if not variables:
        return 1
    total = None
    for pairing in perfect_pairings(variables):
        term = None
        for a, b in pairing:
            term = cov[a][b] if term is None else term * cov[a][b]
        total = term if total is None else total + term
    return total


@dataclass(frozen=True)
class MomentValue:
    value: object
    zeta: DiophantineIndex
    side: str


def _factor_layout(zeta: DiophantineIndex):
    """Integration variables and their powers: one fresh variable per M_k factor with k >= 1."""
    powers = []
    for k in range(3, 2 * zeta.mu + 1):
        powers.extend([k - 2] * zeta.j[k - 1])
    return powers


def _check_mu(zeta: DiophantineIndex):
    if zeta.mu > MAX_MU:
        raise CapacityError(f"mu = {zeta.mu} exceeds oracle cap {MAX_MU}")


def bm_generalized_moment_direct(zeta: DiophantineIndex) -> MomentValue:
    """Exact Brownian moment by pointwise Isserlis and simplex integration.

    Variable 0 is ``B_1``; variables ``1..m`` are ``B_{u_s}`` for the ``m``
    integration variables.  On each order simplex the covariance matrix has
    monomial entries, so the Isserlis sum is a polynomial in ``u`` that
    integrates in closed form.
    """
    _check_mu(zeta)
    powers = _factor_layout(zeta)
    m = len(powers)
    multiplicity = [zeta.j[0], *powers]
    if sum(multiplicity) % 2:
        return MomentValue(Fraction(0), zeta, "brownian")
    one = Polynomial.constant(m, Fraction(1))
    total = Fraction(0)
    for order in order_simplices(m):
        rank = {v: pos for pos, v in enumerate(order)}

        def cov(a, b):
            if a == 0 and b == 0:
                return one
            if a == 0 or b == 0:
                return Polynomial.variable(m, max(a, b) - 1)
            low = a if rank[a - 1] <= rank[b - 1] else b
            return Polynomial.variable(m, low - 1)

        matrix = [[cov(a, b) for b in range(m + 1)] for a in range(m + 1)]
        poly = isserlis(matrix, multiplicity)
        if isinstance(poly, int):
            poly = one * poly
        total += integrate_on_simplex(poly, order)
    return MomentValue(total, zeta, "brownian")


def scheme_generalized_moment_direct(scheme: SchemeSpec, zeta: DiophantineIndex) -> MomentValue:
    """Scheme moment with ``M~_k = sum_i w_i B~_{theta_i}^k`` expanded over knot tuples."""
    _check_mu(zeta)
    powers = _factor_layout(zeta)
    m = len(powers)
    multiplicity = [zeta.j[0], *powers]
    zero = Fraction(0) if scheme.exact else 0.0
    if sum(multiplicity) % 2:
        return MomentValue(zero, zeta, "scheme")
    gamma = scheme_covariance_matrix(scheme)
    w = scheme.weights
    terms = []
    for tup in itertools.product(range(scheme.n_q), repeat=m):
        pos = [0] + [i + 1 for i in tup]
        sub = [[gamma[a][b] for b in pos] for a in pos]
        wt = math.prod((w[i] for i in tup), start=Fraction(1) if scheme.exact else 1.0)
        terms.append(wt * isserlis(sub, multiplicity))
    value = sum(terms, zero) if scheme.exact else math.fsum(terms)
    return MomentValue(value, zeta, "scheme")


@dataclass(frozen=True)
class CrossValidation:
    zeta: DiophantineIndex
    side: str
    direct: object
    polynomial: object
    diff: object

    @property
    def exact_equal(self) -> bool | None:
        if isinstance(self.direct, Fraction) and isinstance(self.polynomial, Fraction):
            return self.direct == self.polynomial
        return None


def cross_validate(zeta: DiophantineIndex, scheme: SchemeSpec | None = None) -> CrossValidation:
    """Compare the direct moment with the moment-polynomial route; ``scheme=None`` means Brownian."""
    if scheme is None:
        direct = bm_generalized_moment_direct(zeta).value
        poly = generalized_moment_via_polynomial(zeta, CovarianceKernel.brownian())
        side = "brownian"
    else:
        direct = scheme_generalized_moment_direct(scheme, zeta).value
        poly = generalized_moment_via_polynomial(zeta, CovarianceKernel.for_scheme(scheme))
        side = "scheme"
    return CrossValidation(zeta, side, direct, poly, direct - poly)
