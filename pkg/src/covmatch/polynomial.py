"""Sparse multivariate polynomials with exact (or float) coefficients.

Terms are stored as ``{exponent tuple: coefficient}``.  Coefficients can be
any commutative numeric type; the moment code uses :class:`fractions.Fraction`
for rational schemes and ``float`` otherwise.  Zero coefficients are never
stored, so equality of two exact polynomials is dictionary equality.
"""
from __future__ import annotations

import itertools
import math
from fractions import Fraction
from typing import Iterable, Mapping

from ._numbers import format_scalar, jsonable
from .errors import InputError

Exponents = tuple[int, ...]


class Polynomial:
    """Immutable sparse polynomial in ``dim`` variables."""

    __slots__ = ("dim", "_terms")

    def __init__(self, dim: int, terms: Mapping[Exponents, object] | None = None):
        if dim < 0:
            raise InputError(f"dimension must be non-negative, got {dim}")
        self.dim = dim
        clean: dict[Exponents, object] = {}
        for exps, coeff in (terms or {}).items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != dim or any(e < 0 for e in exps):
                raise InputError(f"bad exponent vector {exps} for dimension {dim}")
            if coeff != 0:
                clean[exps] = clean.get(exps, 0) + coeff
                if clean[exps] == 0:
                    del clean[exps]
        self._terms = clean

    # construction helpers

    @classmethod
    def constant(cls, dim: int, value=1) -> "Polynomial":
        return cls(dim, {(0,) * dim: value})

    @classmethod
    def variable(cls, dim: int, index: int, coeff=1) -> "Polynomial":
        exps = [0] * dim
        exps[index] = 1
        return cls(dim, {tuple(exps): coeff})

    @classmethod
    def monomial(cls, exponents: Iterable[int], coeff=1) -> "Polynomial":
        exps = tuple(exponents)
        return cls(len(exps), {exps: coeff})

    # read access

    @property
    def terms(self) -> dict[Exponents, object]:
        return dict(self._terms)

    def coefficient(self, exponents: Iterable[int]):
        return self._terms.get(tuple(exponents), 0)

    def sorted_terms(self) -> list[tuple[Exponents, object]]:
        """Terms in lexicographic exponent order."""
        return sorted(self._terms.items())

    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self):
        return iter(self.sorted_terms())

    def is_zero(self) -> bool:
        return not self._terms

    def degrees(self) -> set[int]:
        return {sum(e) for e in self._terms}

    def is_homogeneous(self, degree: int | None = None) -> bool:
        degs = self.degrees()
        if not degs:
            return True
        if len(degs) != 1:
            return False
        return degree is None or degs == {degree}

    @property
    def exact(self) -> bool:
        return all(isinstance(c, (int, Fraction)) for c in self._terms.values())

    # arithmetic

    def _check_dim(self, other: "Polynomial"):
        if other.dim != self.dim:
            raise InputError(f"dimension mismatch: {self.dim} vs {other.dim}")

    def __add__(self, other):
        if not isinstance(other, Polynomial):
            other = Polynomial.constant(self.dim, other)
        self._check_dim(other)
        out = dict(self._terms)
        for e, c in other._terms.items():
            out[e] = out.get(e, 0) + c
        return Polynomial(self.dim, out)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.dim, {e: -c for e, c in self._terms.items()})

    def __sub__(self, other):
        if not isinstance(other, Polynomial):
            other = Polynomial.constant(self.dim, other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Polynomial):
            return Polynomial(self.dim, {e: c * other for e, c in self._terms.items()})
        self._check_dim(other)
        out: dict[Exponents, object] = {}
        for e1, c1 in self._terms.items():
            for e2, c2 in other._terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, 0) + c1 * c2
        return Polynomial(self.dim, out)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if n < 0:
            raise InputError("negative powers are not polynomials")
        result = Polynomial.constant(self.dim, 1)
        base = self
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return result

    def __eq__(self, other):
        if isinstance(other, Polynomial):
            return self.dim == other.dim and self._terms == other._terms
        return NotImplemented

    def __hash__(self):
        return hash((self.dim, frozenset(self._terms.items())))

    # transformations

    def evaluate(self, point: Iterable):
        point = list(point)
        if len(point) != self.dim:
            raise InputError(f"expected {self.dim} values, got {len(point)}")
        total = 0
        for exps, coeff in self._terms.items():
            term = coeff
            for x, e in zip(point, exps):
                if e:
                    term = term * x**e
            total = total + term
        return total

    def permute(self, perm: Iterable[int]) -> "Polynomial":
        """Relabel variables: variable ``i`` becomes variable ``perm[i]``."""
        perm = list(perm)
        if sorted(perm) != list(range(self.dim)):
            raise InputError(f"not a permutation of {self.dim} variables: {perm}")
        out = {}
        for exps, coeff in self._terms.items():
            new = [0] * self.dim
            for i, e in enumerate(exps):
                new[perm[i]] = e
            out[tuple(new)] = coeff
        return Polynomial(self.dim, out)

    def truncate(self, dim: int) -> "Polynomial":
        """Set the trailing ``self.dim - dim`` variables to zero and drop them."""
        if dim > self.dim:
            raise InputError(f"cannot truncate dimension {self.dim} to {dim}")
        out = {e[:dim]: c for e, c in self._terms.items() if not any(e[dim:])}
        return Polynomial(dim, out)

    def extend(self, dim: int) -> "Polynomial":
        """Embed into ``dim`` variables; the new trailing variables do not appear."""
        if dim < self.dim:
            raise InputError(f"cannot extend dimension {self.dim} to {dim}")
        pad = (0,) * (dim - self.dim)
        return Polynomial(dim, {e + pad: c for e, c in self._terms.items()})

    def derivative_at_zero(self, orders: Iterable[int]):
        """Mixed partial derivative with the given orders, evaluated at the origin.

        Only the monomial whose exponents equal ``orders`` survives; its
        coefficient is multiplied by the product of factorials.
        """
        orders = tuple(orders)
        if len(orders) != self.dim:
            raise InputError(f"expected {self.dim} derivative orders, got {len(orders)}")
        coeff = self.coefficient(orders)
        if coeff == 0:
            return 0 if self.exact else 0.0
        return coeff * math.prod(math.factorial(k) for k in orders)

    def max_abs_difference(self, other: "Polynomial"):
        self._check_dim(other)
        keys = set(self._terms) | set(other._terms)
        if not keys:
            return Fraction(0) if self.exact and other.exact else 0.0
        return max(abs(self.coefficient(k) - other.coefficient(k)) for k in keys)

    def to_json(self) -> list[dict]:
        return [{"exponents": list(e), "coeff": jsonable(c)} for e, c in self.sorted_terms()]

    def __repr__(self):
        if not self._terms:
            return f"Polynomial({self.dim}, 0)"
        parts = []
        for exps, coeff in self.sorted_terms():
            mono = "*".join(
                f"x{i}" + (f"^{e}" if e > 1 else "") for i, e in enumerate(exps) if e
            )
            parts.append(format_scalar(coeff) + (f"*{mono}" if mono else ""))
        return f"Polynomial({self.dim}, " + " + ".join(parts) + ")"


MomentPolynomial = Polynomial


def homogeneous_exponents(dim: int, degree: int) -> list[Exponents]:
    """All exponent vectors of the given total degree, lexicographically sorted."""
    if dim == 0:
        return [()] if degree == 0 else []
    out = []
    for cut in itertools.combinations(range(degree + dim - 1), dim - 1):
        prev = -1
        exps = []
        for c in cut:
            exps.append(c - prev - 1)
            prev = c
        exps.append(degree + dim - 2 - prev)
        out.append(tuple(exps))
    return sorted(out)
