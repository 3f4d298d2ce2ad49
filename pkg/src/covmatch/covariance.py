"""Schemes (quadrature rule plus bridge basis) and the two covariance kernels.

A scheme replaces the Brownian bridge on ``[0, 1]`` by the finite Gaussian
process ``sum_k a_k L_k(u)`` observed only at the quadrature knots.  Its
covariance at knots is the Gram form ``theta_i theta_j + sum_k L_k(i) L_k(j)``
and is compared against the Brownian ``min(u, tau)``.

Indices into a scheme covariance are 0-based knot positions or the
:data:`ENDPOINT` sentinel for ``u = 1``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from ._numbers import Scalar, format_scalar, parse_scalar, unify
from .errors import InputError

ENDPOINT = "end"
INTERPOLATIONS = ("piecewise-linear", "user-table")
WEIGHT_SUM_TOL = 1e-12
PSD_TOL = 1e-12


@dataclass(frozen=True)
class QuadratureRule:
    """Knots in ``[0, 1]`` (strictly increasing) with non-negative weights summing to one."""

    knots: tuple
    weights: tuple
    exact: bool = field(init=False)

    def __post_init__(self):
        knots, kx = unify(self.knots)
        weights, wx = unify(self.weights)
        exact = kx and wx
        if not exact:
            knots = [float(k) for k in knots]
            weights = [float(w) for w in weights]
        if len(knots) == 0:
            raise InputError("quadrature rule needs at least one knot")
        if len(knots) != len(weights):
            raise InputError(f"{len(knots)} knots but {len(weights)} weights")
        if any(k < 0 or k > 1 for k in knots):
            raise InputError(f"knots must lie in [0, 1]: {knots}")
        if any(b <= a for a, b in zip(knots, knots[1:])):
            raise InputError(f"knots must be strictly increasing: {knots}")
        if any(w < 0 for w in weights):
            raise InputError(f"weights must be non-negative: {weights}")
        total = sum(weights) if exact else math.fsum(weights)
        if exact and total != 1:
            raise InputError(f"weights sum to {total}, not 1")
        if not exact and abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise InputError(f"weights sum to {total!r}, not 1")
        object.__setattr__(self, "knots", tuple(knots))
        object.__setattr__(self, "weights", tuple(weights))
        object.__setattr__(self, "exact", exact)

    def __len__(self):
        return len(self.knots)

    @classmethod
    def merged(cls, knots: Sequence, weights: Sequence) -> "QuadratureRule":
        """Build a rule from possibly repeated knots, adding weights of duplicates."""
        acc: dict = {}
        for k, w in zip(knots, weights):
            acc[k] = acc.get(k, 0) + w
        items = sorted(acc.items())
        return cls(tuple(k for k, _ in items), tuple(w for _, w in items))

    def integrate(self, func):
        """``sum_i w_i func(theta_i)``; exact for exact rules and rational-valued ``func``."""
        terms = [w * func(k) for k, w in zip(self.knots, self.weights)]
        return sum(terms, Fraction(0)) if self.exact else math.fsum(terms)


@dataclass(frozen=True)
class BridgeBasis:
    """Values ``L[k][i]`` of the bridge functions at the quadrature knots.

    ``table`` is only consulted for ``interpolation="user-table"``: a pair
    ``(u_grid, rows)`` giving each bridge function on a grid that covers
    ``[0, 1]``; the extension interpolates it linearly.
    """

    values: tuple
    interpolation: str = "piecewise-linear"
    table: tuple | None = None
    exact: bool = field(init=False, default=True)

    def __post_init__(self):
        rows = [list(r) for r in self.values]
        flat, exact = unify(v for r in rows for v in r)
        it = iter(flat)
        rows = tuple(tuple(next(it) for _ in r) for r in rows)
        if any(not math.isfinite(float(v)) for r in rows for v in r):
            raise InputError("bridge values must be finite")
        if len({len(r) for r in rows}) > 1:
            raise InputError("bridge rows have different lengths")
        if self.interpolation not in INTERPOLATIONS:
            raise InputError(f"unknown interpolation {self.interpolation!r}")
        if self.interpolation == "user-table":
            if self.table is None:
                raise InputError("user-table interpolation requires a table")
            grid, trows = self.table
            grid = np.asarray(grid, dtype=float)
            trows = np.atleast_2d(np.asarray(trows, dtype=float))
            if trows.shape != (len(rows), grid.size) or np.any(np.diff(grid) <= 0):
                raise InputError("table must be (n_nu x grid) with increasing grid")
            if grid[0] > 0 or grid[-1] < 1:
                raise InputError("table grid must cover [0, 1]")
            object.__setattr__(self, "table", (tuple(grid), tuple(map(tuple, trows))))
        object.__setattr__(self, "values", rows)
        object.__setattr__(self, "exact", exact)

    @property
    def n_nu(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class SchemeSpec:
    """A short-time approximation: quadrature rule plus bridge basis values."""

    name: str
    quadrature: QuadratureRule
    bridge: BridgeBasis

    def __post_init__(self):
        nq = len(self.quadrature)
        for k, row in enumerate(self.bridge.values):
            if len(row) != nq:
                raise InputError(f"bridge row {k} has {len(row)} entries, expected {nq}")
            for i, theta in enumerate(self.quadrature.knots):
                if theta in (0, 1) and row[i] != 0:
                    raise InputError(
                        f"bridge function {k} must vanish at endpoint knot {theta}"
                    )
        if self.bridge.interpolation == "user-table":
            for k in range(self.n_nu):
                ext = self.extension(k, np.asarray(self.quadrature.knots, dtype=float))
                if not np.allclose(ext, np.asarray(self.bridge.values[k], dtype=float), atol=1e-12):
                    raise InputError(f"table for bridge function {k} disagrees with knot values")
                if abs(self.extension(k, np.array([0.0, 1.0]))).max() > 1e-12:
                    raise InputError(f"table for bridge function {k} must vanish at 0 and 1")

    @property
    def n_q(self) -> int:
        return len(self.quadrature)

    @property
    def n_nu(self) -> int:
        return self.bridge.n_nu

    @property
    def knots(self) -> tuple:
        return self.quadrature.knots

    @property
    def weights(self) -> tuple:
        return self.quadrature.weights

    @property
    def exact(self) -> bool:
        return self.quadrature.exact and self.bridge.exact

    def bridge_array(self) -> np.ndarray:
        """``L`` as a float array of shape ``(n_nu, n_q)``."""
        return np.asarray(self.bridge.values, dtype=float).reshape(self.n_nu, self.n_q)

    def extension(self, k: int, u) -> np.ndarray:
        """Continuous extension of bridge function ``k`` (0-based); zero outside ``[0, 1]``."""
        if not 0 <= k < self.n_nu:
            raise InputError(f"bridge index {k} out of range for n_nu={self.n_nu}")
        u = np.asarray(u, dtype=float)
        if self.bridge.interpolation == "piecewise-linear":
            xs = [0.0, *map(float, self.knots), 1.0]
            ys = [0.0, *map(float, self.bridge.values[k]), 0.0]
        else:
            grid, rows = self.bridge.table
            xs, ys = list(grid), list(rows[k])
        out = np.interp(u, xs, ys)
        return np.where((u < 0) | (u > 1), 0.0, out)

    def extension_bound(self) -> float:
        """Common bound ``M`` on ``|L_k(u)|`` over ``[0, 1]`` for the attached extension."""
        if self.n_nu == 0:
            return 0.0
        if self.bridge.interpolation == "piecewise-linear":
            return float(np.abs(self.bridge_array()).max())
        _, rows = self.bridge.table
        return float(np.abs(np.asarray(rows)).max())

    def with_bridge_scaled(self, factor) -> "SchemeSpec":
        rows = [[v * factor for v in r] for r in self.bridge.values]
        return SchemeSpec(self.name, self.quadrature, BridgeBasis(rows, self.bridge.interpolation))


def make_scheme(name: str, knots, weights, bridge=(), interpolation="piecewise-linear", table=None):
    """Convenience constructor; ``bridge`` is a list of rows (one per bridge function)."""
    return SchemeSpec(
        name, QuadratureRule(tuple(knots), tuple(weights)), BridgeBasis(tuple(map(tuple, bridge)), interpolation, table)
    )


# built-in schemes

def trapezoid() -> SchemeSpec:
    return make_scheme("trapezoid", [0, 1], [Fraction(1, 2), Fraction(1, 2)])


def midpoint() -> SchemeSpec:
    return make_scheme("midpoint", [Fraction(1, 2)], [1])


def midpoint_bridge() -> SchemeSpec:
    return make_scheme("midpoint-bridge", [Fraction(1, 2)], [1], [[Fraction(1, 2)]])


BUILTINS = {
    "trapezoid": trapezoid,
    "midpoint": midpoint,
    "midpoint-bridge": midpoint_bridge,
}


# kernels

def eval_bm_covariance(u, tau):
    """Brownian motion covariance ``min(u, tau)`` on ``[0, 1]``."""
    for v in (u, tau):
        if not 0 <= v <= 1:
            raise InputError(f"argument {v!r} outside [0, 1]")
    return min(u, tau)


def _position(scheme: SchemeSpec, index):
    if index == ENDPOINT:
        return 1, None
    if isinstance(index, bool) or not isinstance(index, int) or not 0 <= index < scheme.n_q:
        raise InputError(f"index {index!r} out of range for {scheme.n_q} knots")
    return scheme.knots[index], index


def eval_scheme_covariance(scheme: SchemeSpec, a, b):
    """``theta_a theta_b + sum_k L[k][a] L[k][b]``; bridge terms vanish at the endpoint."""
    ta, ia = _position(scheme, a)
    tb, ib = _position(scheme, b)
    value = ta * tb
    if ia is not None and ib is not None:
        for row in scheme.bridge.values:
            value = value + row[ia] * row[ib]
    return value


def scheme_covariance_matrix(scheme: SchemeSpec) -> list[list]:
    """Full ``(n_q + 1)`` square covariance; row/column 0 is the endpoint ``u = 1``."""
    idx = [ENDPOINT, *range(scheme.n_q)]
    return [[eval_scheme_covariance(scheme, a, b) for b in idx] for a in idx]


@dataclass(frozen=True)
class CovarianceKernel:
    """Either the Brownian kernel or a scheme's discrete kernel at knots plus endpoint."""

    variant: str
    scheme: SchemeSpec | None = None
    matrix: tuple | None = None

    @classmethod
    def brownian(cls) -> "CovarianceKernel":
        return cls("brownian")

    @classmethod
    def for_scheme(cls, scheme: SchemeSpec) -> "CovarianceKernel":
        mat = scheme_covariance_matrix(scheme)
        return cls("scheme", scheme, tuple(map(tuple, mat)))

    @classmethod
    def from_matrix(cls, matrix) -> "CovarianceKernel":
        """Wrap a raw ``(n_q + 1)`` covariance, rejecting ones no scheme could produce."""
        mat = np.asarray(matrix, dtype=float)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] < 1:
            raise InputError("covariance matrix must be square")
        if not np.all(np.isfinite(mat)):
            raise InputError("covariance matrix has non-finite entries")
        if not np.allclose(mat, mat.T, atol=PSD_TOL):
            raise InputError("covariance matrix is not symmetric")
        if abs(mat[0, 0] - 1.0) > PSD_TOL:
            raise InputError("endpoint variance must be 1")
        lam = float(np.linalg.eigvalsh(mat).min())
        if lam < -PSD_TOL:
            raise InputError(f"covariance matrix is not PSD (smallest eigenvalue {lam:.3e})")
        return cls("matrix", None, tuple(map(tuple, np.asarray(matrix).tolist())))

    @property
    def is_brownian(self) -> bool:
        return self.variant == "brownian"

    def __call__(self, a, b):
        if self.is_brownian:
            return eval_bm_covariance(a, b)
        ia = 0 if a == ENDPOINT else a + 1
        ib = 0 if b == ENDPOINT else b + 1
        return self.matrix[ia][ib]


# structural checks

@dataclass(frozen=True)
class SymmetryReport:
    knots_pass: bool
    knots_deviation: Scalar
    bridge_pass: bool
    bridge_deviation: Scalar

    @property
    def passed(self) -> bool:
        return self.knots_pass and self.bridge_pass


def _mirror_map(scheme: SchemeSpec):
    """For each knot, the index of the knot nearest to its reflection and the gap."""
    knots = scheme.knots
    out = []
    for theta in knots:
        target = 1 - theta
        j = min(range(len(knots)), key=lambda m: abs(knots[m] - target))
        out.append((j, abs(knots[j] - target)))
    return out


def check_scheme_symmetry(scheme: SchemeSpec, tol=0) -> SymmetryReport:
    """Check reflection symmetry of the quadrature and of the bridge covariance.

    Knot check: every knot has a mirror ``1 - theta`` carrying the same weight.
    Bridge check: ``G(i, j) = G(m(i), m(j))`` for the bridge Gram part ``G``
    and the mirror map ``m``; undefined (reported as failed, deviation inf)
    when the knots do not mirror.
    """
    mirror = _mirror_map(scheme)
    zero = Fraction(0) if scheme.exact else 0.0
    dev = zero
    for i, (j, gap) in enumerate(mirror):
        dev = max(dev, gap, abs(scheme.weights[i] - scheme.weights[j]))
    knots_pass = dev <= tol
    if not knots_pass:
        return SymmetryReport(False, dev, False, math.inf)
    bdev = zero
    for i in range(scheme.n_q):
        for j in range(scheme.n_q):
            mi, mj = mirror[i][0], mirror[j][0]
            g = eval_scheme_covariance(scheme, i, j) - scheme.knots[i] * scheme.knots[j]
            gm = eval_scheme_covariance(scheme, mi, mj) - scheme.knots[mi] * scheme.knots[mj]
            bdev = max(bdev, abs(g - gm))
    return SymmetryReport(True, dev, bdev <= tol, bdev)


@dataclass(frozen=True)
class PsdResult:
    psd: bool
    min_eigenvalue: float

    def __bool__(self):
        return self.psd


def psd_check(scheme: SchemeSpec) -> PsdResult:
    """Eigen-check of the full knot-plus-endpoint covariance at tolerance 1e-12."""
    mat = np.asarray(scheme_covariance_matrix(scheme), dtype=float)
    lam = float(np.linalg.eigvalsh(mat).min())
    return PsdResult(lam >= -PSD_TOL, lam)


# JSON I/O

def scheme_from_dict(data: dict) -> SchemeSpec:
    try:
        knots = data["knots"]
        weights = data["weights"]
    except (KeyError, TypeError) as exc:
        raise InputError(f"scheme is missing field {exc}") from exc
    bridge = data.get("bridge", []) or []
    interp = data.get("interpolation", "piecewise-linear")
    table = None
    if interp == "user-table":
        t = data.get("table")
        if not isinstance(t, dict) or "u" not in t or "values" not in t:
            raise InputError("user-table interpolation needs table {u: [...], values: [[...]]}")
        table = ([float(parse_scalar(x)) for x in t["u"]], [[float(parse_scalar(x)) for x in r] for r in t["values"]])
    if not isinstance(bridge, list) or any(not isinstance(r, list) for r in bridge):
        raise InputError("bridge must be a list of rows")
    return make_scheme(str(data.get("name", "unnamed")), knots, weights, bridge, interp, table)


def scheme_to_dict(scheme: SchemeSpec) -> dict:
    def enc(v):
        return format_scalar(v) if isinstance(v, Fraction) else float(v)

    out = {
        "name": scheme.name,
        "knots": [enc(k) for k in scheme.knots],
        "weights": [enc(w) for w in scheme.weights],
        "bridge": [[enc(v) for v in row] for row in scheme.bridge.values],
        "interpolation": scheme.bridge.interpolation,
    }
    if scheme.bridge.interpolation == "user-table":
        grid, rows = scheme.bridge.table
        out["table"] = {"u": list(grid), "values": [list(r) for r in rows]}
    return out


def load_scheme(ref: str) -> SchemeSpec:
    """Resolve ``builtin:<name>`` or read a scheme JSON file."""
    if ref.startswith("builtin:"):
        name = ref.split(":", 1)[1]
        if name not in BUILTINS:
            raise InputError(f"unknown builtin scheme {name!r}; choose from {sorted(BUILTINS)}")
        return BUILTINS[name]()
    path = Path(ref)
    if not path.is_file():
        raise InputError(f"file not found: {ref}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputError(f"invalid JSON in {ref}: {exc.msg}") from exc
    return scheme_from_dict(data)


def save_scheme(scheme: SchemeSpec, path) -> None:
    Path(path).write_text(json.dumps(scheme_to_dict(scheme), indent=2) + "\n", encoding="utf-8")
