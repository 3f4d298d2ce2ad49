"""Search for schemes that satisfy the order conditions.

Parameters live in a chart that builds reflection symmetry in: knots come in
mirrored pairs ``(1 - t, t)`` with ``t`` in ``(1/2, 1]`` plus an optional
centre knot at ``1/2``; mirrored knots share a weight; each bridge function
is either symmetric or antisymmetric about ``1/2``.  The residual is the
vector of moment-polynomial coefficient differences, minimised by bounded
damped least squares from several starts.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.optimize import least_squares
from scipy.stats import qmc

from .covariance import SchemeSpec, make_scheme
from .errors import InputError
from .moments import DEFAULT_MAX_ORDER, certify_order, residual_vector
from .sampling import RandomStream

SNAP_DENOMINATOR = 10**6
KNOT_FLOOR = 0.5 + 1e-9


@dataclass(frozen=True)
class DesignProblem:
    """Layout of free parameters.

    ``knots`` pins the upper half of the knot set (values in ``(1/2, 1]``,
    one per mirrored pair); the centre knot, when ``n_q`` is odd, is always
    ``1/2``.  ``parities`` gives ``"sym"`` or ``"anti"`` per bridge function.
    """

    n_q: int
    n_nu: int
    order: int
    knots: tuple | None = None
    parities: tuple | None = None
    max_order: int = DEFAULT_MAX_ORDER

    def __post_init__(self):
        if self.n_q < 1 or self.n_nu < 0 or self.order < 1:
            raise InputError(f"need n_q >= 1, n_nu >= 0, order >= 1: {self}")
        if self.knots is not None:
            pinned = tuple(Fraction(k) if not isinstance(k, float) else k for k in self.knots)
            if len(pinned) != self.n_pairs or any(not 0.5 < k <= 1 for k in pinned):
                raise InputError(f"pin {self.n_pairs} knots in (1/2, 1], got {self.knots}")
            object.__setattr__(self, "knots", pinned)
        par = self.parities or tuple("sym" if k % 2 == 0 else "anti" for k in range(self.n_nu))
        if len(par) != self.n_nu or any(p not in ("sym", "anti") for p in par):
            raise InputError(f"parities must list sym/anti for each bridge function: {par}")
        object.__setattr__(self, "parities", tuple(par))

    @property
    def n_pairs(self) -> int:
        return self.n_q // 2

    @property
    def has_centre(self) -> bool:
        return self.n_q % 2 == 1

    @property
    def n_orbits(self) -> int:
        return self.n_pairs + int(self.has_centre)

    @property
    def free_knots(self) -> int:
        return 0 if self.knots is not None else self.n_pairs

    @property
    def free_weights(self) -> int:
        return self.n_orbits if self.n_orbits > 1 else 0

    def bridge_slots(self) -> list[tuple[int, int]]:
        """``(function, orbit)`` entries that are free; antisymmetric functions vanish at the centre."""
        slots = []
        for f, par in enumerate(self.parities):
            for orbit in range(self.n_orbits):
                centre = self.has_centre and orbit == self.n_pairs
                if centre and par == "anti":
                    continue
                slots.append((f, orbit))
        return slots

    @property
    def n_params(self) -> int:
        return self.free_knots + self.free_weights + len(self.bridge_slots())

    def bounds(self):
        lo = [KNOT_FLOOR] * self.free_knots + [0.0] * self.free_weights
        hi = [1.0] * self.free_knots + [1.0] * self.free_weights
        nb = len(self.bridge_slots())
        return np.array(lo + [-np.inf] * nb), np.array(hi + [np.inf] * nb)

    def build(self, params: Sequence, name: str = "designed") -> SchemeSpec:
        """Map chart coordinates to a scheme (floats, or exact values if all inputs are exact)."""
        params = list(params)
        if len(params) != self.n_params:
            raise InputError(f"expected {self.n_params} parameters, got {len(params)}")
        pos = 0
        if self.knots is not None:
            upper = list(self.knots)
        else:
            upper = params[:self.free_knots]
            pos = self.free_knots
        if self.free_weights:
            raw = params[pos:pos + self.free_weights]
            pos += self.free_weights
        else:
            raw = [1]
        bridge_vals = params[pos:]
        exact = all(isinstance(v, (int, Fraction)) for v in params + upper)
        half = Fraction(1, 2) if exact else 0.5
        raw = [Fraction(r) if exact else float(r) for r in raw]
        # orbit weights: pairs carry two knots each
        mult = [2] * self.n_pairs + [1] * int(self.has_centre)
        total = sum(m * r for m, r in zip(mult, raw))
        if total <= 0:
            raw, total = [1] * self.n_orbits, sum(mult)
        orbit_w = [r / total for r in raw]
        knots, weights, owner = [], [], []
        for p, t in enumerate(upper):
            knots += [1 - t, t]
            weights += [orbit_w[p], orbit_w[p]]
            owner += [(p, -1), (p, 1)]
        if self.has_centre:
            knots.append(half)
            weights.append(orbit_w[-1])
            owner.append((self.n_pairs, 0))
        order = sorted(range(len(knots)), key=lambda i: knots[i])
        knots = [knots[i] for i in order]
        weights = [weights[i] for i in order]
        owner = [owner[i] for i in order]
        values = {slot: v for slot, v in zip(self.bridge_slots(), bridge_vals)}
        rows = []
        for f, par in enumerate(self.parities):
            row = []
            for (orbit, side), t in zip(owner, knots):
                v = values.get((f, orbit), 0)
                if par == "anti" and side == -1:
                    v = -v
                if t in (0, 1):
                    v = 0 * v
                row.append(v)
            rows.append(row)
        return make_scheme(name, knots, weights, rows)


@dataclass
class StartLog:
    start: int
    iterations: int
    residual: float


@dataclass
class DesignResult:
    scheme: SchemeSpec
    residual_norm: float
    certified_order: int
    certified: bool
    exact: bool
    log: list[StartLog] = field(default_factory=list)


def _initial_points(problem: DesignProblem, starts: int, stream: RandomStream) -> np.ndarray:
    gen = stream.generator()
    nb = len(problem.bridge_slots())
    pts = np.empty((starts, problem.n_params))
    col = 0
    if problem.free_knots:
        sob = qmc.Halton(d=problem.free_knots, scramble=True, seed=gen).random(starts)
        pts[:, :problem.free_knots] = KNOT_FLOOR + (1 - KNOT_FLOOR) * sob
        col = problem.free_knots
    if problem.free_weights:
        pts[:, col:col + problem.free_weights] = gen.uniform(0.2, 1.0, (starts, problem.free_weights))
        col += problem.free_weights
    if nb:
        pts[:, col:] = 0.25 * gen.standard_normal((starts, nb))
    return pts


def _residual(problem: DesignProblem, x) -> np.ndarray:
    return residual_vector(problem.build(x), problem.order, problem.max_order)


def snap_rational(values: Sequence[float], max_denominator: int = SNAP_DENOMINATOR) -> list[Fraction]:
    return [Fraction(float(v)).limit_denominator(max_denominator) for v in values]


def design_scheme(
    problem: DesignProblem,
    starts: int = 32,
    stream: RandomStream | None = None,
    tol: float = 1e-10,
    max_nfev: int = 200,
    threads: int = 1,
    name: str = "designed",
) -> DesignResult:
    """Multi-start bounded least squares on the order-``problem.order`` residual.

    The best start (smallest residual, ties by start index) is re-built,
    optionally snapped to nearby rationals, re-evaluated and certified; the
    reported residual is always recomputed from the returned scheme.
    """
    stream = stream or RandomStream(0)
    if problem.n_params == 0:
        scheme = problem.build([], name)
        return _finish(problem, scheme, [StartLog(0, 0, float(np.linalg.norm(_residual(problem, []))))], tol)
    lo, hi = problem.bounds()
    x0s = np.clip(_initial_points(problem, starts, stream), lo, hi)

    def run(i):
        fit = least_squares(
            lambda x: _residual(problem, x), x0s[i], jac="3-point", diff_step=1e-6,
            bounds=(lo, hi), method="trf", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=max_nfev,
        )
        return i, fit.x, float(np.linalg.norm(fit.fun)), int(fit.nfev)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        runs = list(pool.map(run, range(starts)))
    log = [StartLog(i, nfev, res) for i, _, res, nfev in runs]
    best = min(runs, key=lambda r: (r[2], r[0]))
    scheme = problem.build(best[1], name)
    snapped = _try_snap(problem, best[1], name)
    if snapped is not None:
        scheme = snapped
    return _finish(problem, scheme, log, tol)


def _try_snap(problem: DesignProblem, x, name):
    try:
        candidate = problem.build(snap_rational(x), name)
    except InputError:
        return None
    if not candidate.exact:
        return None
    if np.any(residual_vector(candidate, problem.order, problem.max_order) != 0):
        return None
    return candidate


def _finish(problem, scheme, log, tol) -> DesignResult:
    norm = float(np.linalg.norm(residual_vector(scheme, problem.order, problem.max_order)))
    report = certify_order(scheme, problem.order, tol=tol, max_order=problem.max_order)
    certified = norm < tol and report.certified_order >= problem.order
    return DesignResult(scheme, norm, report.certified_order, certified, scheme.exact, log)


def bridge_amplitude(scheme: SchemeSpec) -> float:
    """Largest absolute bridge value at the knots."""
    return float(np.abs(scheme.bridge_array()).max()) if scheme.n_nu else 0.0

