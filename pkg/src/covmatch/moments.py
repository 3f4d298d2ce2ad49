"""Moment polynomials and order certification by covariance matching.

For a kernel ``g`` (Brownian ``min`` or a scheme's discrete covariance) the
moment polynomial of degree ``2n`` in ``1 + d`` variables is

    f_{n,d}(lam) = E_u [ (sum_{a,b=0..d} lam_a lam_b g(u_a, u_b))**n ],

with ``u_0 = 1`` and ``u_1..u_d`` drawn from Lebesgue measure (Brownian) or
from the quadrature rule (scheme).  A scheme has order ``nu`` iff both
polynomials agree for every ``n + d = nu``.

Brownian coefficients are computed exactly by splitting ``[0, 1]^d`` into
order simplices; scheme coefficients by finite sums over knot tuples.
"""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable

import numpy as np

from .covariance import CovarianceKernel, SchemeSpec, scheme_covariance_matrix
from .errors import CapacityError, InputError
from .polynomial import Polynomial
from .simplex import integrate_min_product

DEFAULT_MAX_ORDER = 5


@dataclass(frozen=True, order=True)
class DiophantineIndex:
    """A solution ``j = (j_1, ..., j_{2mu})`` of ``sum_k k j_k = 2 mu``."""

    mu: int
    j: tuple[int, ...]

    def __post_init__(self):
        j = tuple(int(x) for x in self.j)
        if self.mu < 1:
            raise InputError(f"mu must be >= 1, got {self.mu}")
        if len(j) != 2 * self.mu or any(x < 0 for x in j):
            raise InputError(f"index needs {2 * self.mu} non-negative entries, got {self.j}")
        if sum((k + 1) * x for k, x in enumerate(j)) != 2 * self.mu:
            raise InputError(f"{j} does not solve sum k j_k = {2 * self.mu}")
        object.__setattr__(self, "j", j)

    @classmethod
    def of(cls, *j: int) -> "DiophantineIndex":
        if len(j) % 2:
            raise InputError(f"index length must be even, got {len(j)}")
        return cls(len(j) // 2, tuple(j))

    @property
    def d(self) -> int:
        return sum(self.j[2:])

    @property
    def n(self) -> int:
        return self.mu - self.j[1] - self.d

    def derivative_orders(self) -> tuple[int, ...]:
        """Exponent pattern selected by the differentiation functional.

        ``j_1`` on ``lam_0``; then ``j_3`` variables of order 1, ``j_4`` of
        order 2, ..., ``j_{2mu}`` of order ``2mu - 2``.
        """
        orders = [self.j[0]]
        for k in range(3, 2 * self.mu + 1):
            orders.extend([k - 2] * self.j[k - 1])
        return tuple(orders)

    def __str__(self):
        return "(" + ",".join(map(str, self.j)) + ")"


@dataclass(frozen=True)
class IndexStats:
    d: int
    n: int


def enumerate_indices(mu: int) -> list[DiophantineIndex]:
    """All solutions of ``sum_k k j_k = 2 mu`` in descending lexicographic order."""
    if not isinstance(mu, int) or mu < 1:
        raise InputError(f"mu must be a positive integer, got {mu!r}")
    total = 2 * mu
    out = []

    def rec(k, remaining, prefix):
        # k runs from the largest part size down to 1
        if k == 0:
            if remaining == 0:
                out.append(tuple(reversed(prefix)))
            return
        for count in range(remaining // k, -1, -1):
            rec(k - 1, remaining - k * count, prefix + [count])

    rec(total, total, [])
    return [DiophantineIndex(mu, j) for j in sorted(out, reverse=True)]


def index_stats(zeta: DiophantineIndex) -> IndexStats:
    d, n = zeta.d, zeta.n
    twice_n = zeta.j[0] + sum((k - 2) * zeta.j[k - 1] for k in range(3, 2 * zeta.mu + 1))
    assert twice_n == 2 * n, "degree identity violated"
    assert d + n <= zeta.mu
    return IndexStats(d, n)


# expansion of the quadratic form

@lru_cache(maxsize=None)
def _pairs(d: int) -> tuple[tuple[int, int], ...]:
    return tuple((a, b) for a in range(d + 1) for b in range(a, d + 1))


@lru_cache(maxsize=None)
def quadratic_power_terms(n: int, d: int):
    """Multinomial expansion of ``(sum_{a,b} lam_a lam_b g_ab)**n`` with ``g`` symmetric.

    Returns tuples ``(lam_exponents, integer_coefficient, factors)`` where
    ``factors`` lists ``(a, b, e)`` for the covariance powers ``g_ab**e``.
    Off-diagonal pairs carry a factor 2 from ``g_ab = g_ba``.
    """
    pairs = _pairs(d)
    out = []
    for combo in itertools.combinations_with_replacement(range(len(pairs)), n):
        counts: dict[int, int] = {}
        for c in combo:
            counts[c] = counts.get(c, 0) + 1
        coeff = math.factorial(n)
        lam = [0] * (d + 1)
        factors = []
        for c, e in sorted(counts.items()):
            a, b = pairs[c]
            coeff //= math.factorial(e)
            if a != b:
                coeff *= 2**e
            lam[a] += e
            lam[b] += e
            factors.append((a, b, e))
        out.append((tuple(lam), coeff, tuple(factors)))
    return tuple(out)


def _check_capacity(n: int, d: int, max_order: int):
    if n < 0 or d < 0:
        raise InputError(f"n and d must be non-negative, got n={n}, d={d}")
    if n + d > max_order:
        raise CapacityError(f"n + d = {n + d} exceeds the cap {max_order}")


@lru_cache(maxsize=None)
def _bm_polynomial(n: int, d: int) -> Polynomial:
    coeffs: dict[tuple, Fraction] = {}
    for lam, c, factors in quadratic_power_terms(n, d):
        coeffs[lam] = coeffs.get(lam, Fraction(0)) + c * integrate_min_product(factors, d)
    return Polynomial(d + 1, coeffs)


def bm_moment_polynomial(n: int, d: int, max_order: int = DEFAULT_MAX_ORDER) -> Polynomial:
    """Exact Brownian moment polynomial ``f_{n,d}``."""
    _check_capacity(n, d, max_order)
    return _bm_polynomial(n, d)


def _scheme_sums_exact(scheme: SchemeSpec, n: int, d: int) -> dict:
    gamma = scheme_covariance_matrix(scheme)
    w = scheme.weights
    coeffs: dict[tuple, object] = {}
    terms = quadratic_power_terms(n, d)
    for tup in itertools.product(range(scheme.n_q), repeat=d):
        pos = (0,) + tuple(i + 1 for i in tup)
        wt = math.prod((w[i] for i in tup), start=Fraction(1))
        if wt == 0:
            continue
        for lam, c, factors in terms:
            val = wt * c
            for a, b, e in factors:
                val *= gamma[pos[a]][pos[b]] ** e
            coeffs[lam] = coeffs.get(lam, 0) + val
    return coeffs


def _scheme_sums_float(scheme: SchemeSpec, n: int, d: int) -> dict:
    gamma = np.asarray(scheme_covariance_matrix(scheme), dtype=float)
    w = np.asarray(scheme.weights, dtype=float)
    grids = np.indices((scheme.n_q,) * d).reshape(d, -1) if d else np.zeros((0, 1), dtype=int)
    pos = np.vstack([np.zeros(grids.shape[1], dtype=int), grids + 1])
    wt = np.prod(w[grids], axis=0) if d else np.ones(1)
    coeffs: dict[tuple, float] = {}
    for lam, c, factors in quadratic_power_terms(n, d):
        vals = wt * c
        for a, b, e in factors:
            vals = vals * gamma[pos[a], pos[b]] ** e
        coeffs[lam] = coeffs.get(lam, 0.0) + math.fsum(vals)
    return coeffs


def scheme_moment_polynomial(
    scheme: SchemeSpec, n: int, d: int, max_order: int = DEFAULT_MAX_ORDER
) -> Polynomial:
    """Scheme moment polynomial; exact for rational schemes, float otherwise."""
    _check_capacity(n, d, max_order)
    if scheme.exact:
        return Polynomial(d + 1, _scheme_sums_exact(scheme, n, d))
    return Polynomial(d + 1, _scheme_sums_float(scheme, n, d))


def moment_polynomial(kernel: CovarianceKernel, n: int, d: int, max_order: int = DEFAULT_MAX_ORDER):
    if kernel.is_brownian:
        return bm_moment_polynomial(n, d, max_order)
    if kernel.scheme is None:
        raise InputError("moment polynomials need a Brownian or scheme kernel")
    return scheme_moment_polynomial(kernel.scheme, n, d, max_order)


def apply_D_zeta(zeta: DiophantineIndex, p: Polynomial):
    """Mixed derivative at the origin selected by ``zeta``.

    Variables beyond ``1 + d(zeta)`` are left underived.
    """
    orders = zeta.derivative_orders()
    if p.dim < len(orders):
        raise InputError(f"polynomial has {p.dim} variables, index needs {len(orders)}")
    orders = orders + (0,) * (p.dim - len(orders))
    return p.derivative_at_zero(orders)


def generalized_moment_via_polynomial(
    zeta: DiophantineIndex, kernel: CovarianceKernel, max_order: int = DEFAULT_MAX_ORDER
):
    """``E[B_1^{j_1} M_1^{j_3} ... M_{2mu-2}^{j_{2mu}}]`` from the moment polynomial.

    Only the degree-``2n`` term of ``exp(Q / 2)`` survives the derivative,
    giving ``D_zeta f_{n,d} / (2^n n!)``.
    """
    n, d = zeta.n, zeta.d
    poly = moment_polynomial(kernel, n, d, max_order)
    value = apply_D_zeta(zeta, poly)
    scale = 2**n * math.factorial(n)
    if isinstance(value, (int, Fraction)):
        return Fraction(value, scale)
    return value / scale


# certification

@dataclass(frozen=True)
class ConditionResult:
    n: int
    d: int
    max_residual: object
    passed: bool
    brownian: Polynomial = field(repr=False, compare=False)
    scheme: Polynomial = field(repr=False, compare=False)


@dataclass(frozen=True)
class CertificationReport:
    scheme: str
    nu_max: int
    certified_order: int
    exact: bool
    tol: float
    conditions: tuple[ConditionResult, ...]

    @property
    def first_failure(self) -> ConditionResult | None:
        return next((c for c in self.conditions if not c.passed), None)

    def to_json(self, polynomials: bool = False) -> dict:
        from ._numbers import jsonable

        conds = []
        for c in self.conditions:
            entry = {"n": c.n, "d": c.d, "max_residual": jsonable(c.max_residual), "pass": c.passed}
            if polynomials:
                entry["brownian_polynomial"] = c.brownian.to_json()
                entry["scheme_polynomial"] = c.scheme.to_json()
            conds.append(entry)
        return {
            "scheme": self.scheme,
            "certified_order": self.certified_order,
            "nu_max": self.nu_max,
            "exact": self.exact,
            "tol": 0 if self.exact else self.tol,
            "conditions": conds,
        }


def order_pairs(nu: int) -> list[tuple[int, int]]:
    """``(n, d)`` with ``n + d = nu``, in descending ``n``."""
    return [(nu - d, d) for d in range(nu + 1)]


def _check_condition(scheme, n, d, tol, max_order):
    ref = bm_moment_polynomial(n, d, max_order)
    got = scheme_moment_polynomial(scheme, n, d, max_order)
    residual = got.max_abs_difference(ref)
    passed = residual == 0 if scheme.exact else residual <= tol
    return ConditionResult(n, d, residual, bool(passed), ref, got)


def certify_order(
    scheme: SchemeSpec,
    nu_max: int,
    tol: float = 1e-10,
    max_order: int = DEFAULT_MAX_ORDER,
    threads: int = 1,
) -> CertificationReport:
    """Largest ``nu <= nu_max`` such that the polynomials agree for all ``n + d <= nu``.

    Orders are checked in turn; the scan stops after the first order that
    fails, and the report lists every condition that was evaluated.
    """
    if nu_max < 1:
        raise InputError(f"nu_max must be >= 1, got {nu_max}")
    if nu_max > max_order:
        raise CapacityError(f"order {nu_max} exceeds the cap {max_order}")
    conditions: list[ConditionResult] = []
    certified = 0
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        for nu in range(1, nu_max + 1):
            pairs = order_pairs(nu)
            results = list(pool.map(lambda nd: _check_condition(scheme, *nd, tol, max_order), pairs))
            conditions.extend(results)
            if not all(r.passed for r in results):
                break
            certified = nu
    return CertificationReport(scheme.name, nu_max, certified, scheme.exact, tol, tuple(conditions))


def residual_vector(scheme: SchemeSpec, nu: int, max_order: int = DEFAULT_MAX_ORDER) -> np.ndarray:
    """Coefficient differences ``f~ - f`` for all ``n + d <= nu``.

    Entries are ordered by ``nu' = 1..nu``, then ``n`` descending, then the
    lexicographic order of all degree-``2n`` monomials in ``1 + d`` variables.
    """
    from .polynomial import homogeneous_exponents

    out = []
    for total in range(1, nu + 1):
        for n, d in order_pairs(total):
            ref = bm_moment_polynomial(n, d, max_order)
            got = scheme_moment_polynomial(scheme, n, d, max_order)
            for exps in homogeneous_exponents(d + 1, 2 * n):
                out.append(float(got.coefficient(exps) - ref.coefficient(exps)))
    return np.asarray(out, dtype=float)


def residual_labels(nu: int) -> list[tuple[int, int, tuple]]:
    """``(n, d, exponents)`` for each entry of :func:`residual_vector`."""
    from .polynomial import homogeneous_exponents

    return [
        (n, d, exps)
        for total in range(1, nu + 1)
        for n, d in order_pairs(total)
        for exps in homogeneous_exponents(d + 1, 2 * n)
    ]


def as_index(values: Iterable[int]) -> DiophantineIndex:
    return DiophantineIndex.of(*values)
