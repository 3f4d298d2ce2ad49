"""Short-time kernels, Lie-Trotter composition and empirical convergence orders.

Units are ``hbar = m = 1`` unless :class:`PhysicalParams` says otherwise, so
``sigma = sqrt(beta)``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .covariance import SchemeSpec
from .errors import EvaluationError, InputError
from .sampling import (
    RandomStream,
    RunningMoments,
    bridge_from_normals,
    chunk_sizes,
    composite_knots,
    dyadic_interpolate,
    run_streams,
)

GH_LEVEL = 8
GH_MAX_NNU = 4
MC_FALLBACK_SAMPLES = 20000
BOUNDARY_TOL = 1e-10


@dataclass(frozen=True)
class PhysicalParams:
    beta: float
    mass: float = 1.0
    hbar: float = 1.0

    def __post_init__(self):
        if not (self.beta > 0 and self.mass > 0 and self.hbar > 0):
            raise InputError(f"beta, mass and hbar must be positive: {self}")

    @property
    def sigma(self) -> float:
        return math.sqrt(self.hbar**2 * self.beta / self.mass)

    def at_beta(self, beta: float) -> "PhysicalParams":
        return PhysicalParams(beta, self.mass, self.hbar)


@dataclass(frozen=True)
class PotentialSpec:
    """A potential with a declared lower bound ``v0``.

    Use :meth:`harmonic`, :meth:`quartic`, :meth:`constant` or :meth:`table`.
    """

    kind: str
    func: Callable = field(repr=False, compare=False)
    v0: float
    params: tuple = ()

    def __call__(self, x):
        return self.func(np.asarray(x, dtype=float))

    @classmethod
    def harmonic(cls, omega: float = 1.0) -> "PotentialSpec":
        if omega <= 0:
            raise InputError(f"omega must be positive, got {omega}")
        return cls("harmonic", lambda x: 0.5 * omega**2 * x * x, 0.0, (("omega", omega),))

    @classmethod
    def quartic(cls, a: float = 1.0) -> "PotentialSpec":
        if a <= 0:
            raise InputError(f"quartic coefficient must be positive, got {a}")
        return cls("quartic", lambda x: a * x**4, 0.0, (("a", a),))

    @classmethod
    def constant(cls, c: float = 0.0) -> "PotentialSpec":
        return cls("constant", lambda x: np.full_like(x, c, dtype=float), c, (("c", c),))

    @classmethod
    def table(cls, xs: Sequence[float], vs: Sequence[float]) -> "PotentialSpec":
        xs = np.asarray(xs, dtype=float)
        vs = np.asarray(vs, dtype=float)
        if xs.ndim != 1 or xs.shape != vs.shape or xs.size < 2 or np.any(np.diff(xs) <= 0):
            raise InputError("potential table needs increasing x with matching V values")
        if not np.all(np.isfinite(vs)):
            raise InputError("potential table has non-finite values")
        return cls("table", lambda x: np.interp(x, xs, vs), float(vs.min()), (("points", xs.size),))

    @property
    def omega(self) -> float | None:
        return dict(self.params).get("omega") if self.kind == "harmonic" else None


def parse_potential(text: str) -> PotentialSpec:
    """Parse ``harmonic:omega=1``, ``quartic:a=0.1``, ``constant:c=0``, ``free`` or ``table:path.csv``."""
    kind, _, rest = text.partition(":")
    if kind == "free":
        return PotentialSpec.constant(0.0)
    if kind == "table":
        try:
            try:
                data = np.loadtxt(rest, delimiter=",", ndmin=2)
            except ValueError:
                # one header row is allowed
                data = np.loadtxt(rest, delimiter=",", ndmin=2, skiprows=1)
        except (OSError, ValueError) as exc:
            raise InputError(f"cannot read potential table {rest!r}: {exc}") from exc
        return PotentialSpec.table(data[:, 0], data[:, 1])
    args = {}
    for item in filter(None, rest.split(",")):
        key, eq, val = item.partition("=")
        if not eq:
            raise InputError(f"bad potential parameter {item!r}")
        try:
            args[key.strip()] = float(val)
        except ValueError as exc:
            raise InputError(f"bad potential parameter {item!r}") from exc
    try:
        if kind == "harmonic":
            return PotentialSpec.harmonic(**args)
        if kind == "quartic":
            return PotentialSpec.quartic(**args)
        if kind == "constant":
            return PotentialSpec.constant(**args)
    except TypeError as exc:
        raise InputError(f"bad parameters for {kind}: {exc}") from exc
    raise InputError(f"unknown potential kind {kind!r}")


@dataclass(frozen=True)
class SpatialGrid:
    x_min: float
    x_max: float
    size: int

    def __post_init__(self):
        if self.size < 3 or not self.x_max > self.x_min:
            raise InputError(f"grid needs size >= 3 and x_max > x_min: {self}")

    @property
    def points(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.size)

    @property
    def step(self) -> float:
        return (self.x_max - self.x_min) / (self.size - 1)

    @property
    def weights(self) -> np.ndarray:
        w = np.full(self.size, self.step)
        w[0] = w[-1] = 0.5 * self.step
        return w

    @classmethod
    def parse(cls, text: str) -> "SpatialGrid":
        try:
            lo, hi, n = text.split(":")
            return cls(float(lo), float(hi), int(n))
        except ValueError as exc:
            raise InputError(f"grid must look like -8:8:512, got {text!r}") from exc

    @classmethod
    def default(cls, beta: float, size: int = 512) -> "SpatialGrid":
        half = 8 * math.sqrt(beta)
        return cls(-half, half, size)


# analytic kernels

def free_particle_kernel(x, xp, params: PhysicalParams):
    s2 = params.sigma**2
    diff = np.asarray(xp, dtype=float) - np.asarray(x, dtype=float)
    return np.exp(-diff * diff / (2 * s2)) / np.sqrt(2 * np.pi * s2)


def reference_harmonic_kernel(x, xp, beta: float, omega: float):
    """Closed-form harmonic density matrix (Mehler kernel) in ``hbar = m = 1`` units."""
    if beta <= 0 or omega <= 0:
        raise InputError("beta and omega must be positive")
    x = np.asarray(x, dtype=float)
    xp = np.asarray(xp, dtype=float)
    bw = beta * omega
    sh = math.sinh(bw)
    # cosh(bw) - 1 written via sinh to stay accurate as omega -> 0
    cm1 = 2 * math.sinh(bw / 2) ** 2
    expo = -omega * ((xp - x) ** 2 + cm1 * (x * x + xp * xp)) / (2 * sh)
    return np.sqrt(omega / (2 * np.pi * sh)) * np.exp(expo)


# short-time kernel

def gauss_hermite_tensor(nnu: int, level: int = GH_LEVEL):
    """Nodes ``(G, nnu)`` and weights ``(G,)`` for ``E f(a)`` with ``a`` standard normal."""
    if nnu == 0:
        return np.zeros((1, 0)), np.ones(1)
    z, w = np.polynomial.hermite_e.hermegauss(level)
    w = w / math.sqrt(2 * math.pi)
    nodes = np.array(list(itertools.product(z, repeat=nnu)))
    weights = np.array([math.prod(c) for c in itertools.product(w, repeat=nnu)])
    return nodes, weights


def _exponent_average(scheme, potential, x, xp, params, nodes, weights):
    """``sum_g weights_g exp(-beta sum_i w_i V(x_r(theta_i) + sigma nodes_g . L_i))``."""
    theta = np.asarray(scheme.knots, dtype=float)
    w = np.asarray(scheme.weights, dtype=float)
    L = scheme.bridge_array()
    shift = params.sigma * nodes @ L                       # (G, n_q)
    xr = x[..., None] + (xp - x)[..., None] * theta          # (..., n_q)
    pos = xr[..., None, :] + shift                           # (..., G, n_q)
    action = potential(pos) @ w                              # (..., G)
    vals = np.exp(-params.beta * action) @ weights
    if not np.all(np.isfinite(vals)):
        raise EvaluationError("non-finite potential or Boltzmann factor")
    return vals


def short_time_kernel(
    scheme: SchemeSpec,
    potential: PotentialSpec,
    x,
    xp,
    params: PhysicalParams,
    integration: str = "gauss-hermite",
    level: int = GH_LEVEL,
    samples: int = MC_FALLBACK_SAMPLES,
    stream: RandomStream | None = None,
):
    """Short-time approximation ``rho_fp * E exp(-beta sum_i w_i V[...])`` at ``(x, xp)``.

    The expectation over the ``n_nu`` bridge normals uses a tensor
    Gauss-Hermite rule, or Monte Carlo for ``integration="mc"`` and
    whenever ``n_nu`` exceeds the tensor cap.
    """
    x, xp = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(xp, dtype=float))
    if integration not in ("gauss-hermite", "mc"):
        raise InputError(f"unknown integration {integration!r}")
    if integration == "mc" or scheme.n_nu > GH_MAX_NNU:
        gen = (stream or RandomStream(0)).generator()
        nodes = gen.standard_normal((samples, scheme.n_nu))
        weights = np.full(samples, 1.0 / samples)
    else:
        nodes, weights = gauss_hermite_tensor(scheme.n_nu, level)
    avg = _exponent_average(scheme, potential, x, xp, params, nodes, weights)
    return free_particle_kernel(x, xp, params) * avg


# Lie-Trotter composition

@dataclass
class TrotterResult:
    """``n + 1`` short-time factors at ``beta / (n + 1)`` composed on a grid."""

    n: int
    grid: SpatialGrid
    params: PhysicalParams
    matrix: np.ndarray
    boundary_mass: float
    boundary_warning: bool
    weight_sum: float
    _factor: Callable = field(repr=False)
    _step: np.ndarray = field(repr=False)

    def at(self, x: float, xp: float) -> float:
        """``rho_n(x, xp)`` for arbitrary points, integrating the inner variables on the grid."""
        pts = self.grid.points
        if self.n == 0:
            return float(self._factor(np.asarray(x), np.asarray(xp)))
        left = self._factor(np.full_like(pts, x), pts) * self.grid.weights
        right = self._factor(pts, np.full_like(pts, xp))
        inner = np.linalg.matrix_power(self._step, self.n - 1)
        return float(left @ inner @ right)

    def domination_bound(self, v0: float) -> np.ndarray:
        """``exp(-c beta V0) rho_fp`` on the grid, with ``c`` the quadrature weight sum."""
        pts = self.grid.points
        c = self.weight_sum
        bound = math.exp(-c * self.params.beta * min(v0, 0.0))
        return bound * free_particle_kernel(pts[:, None], pts[None, :], self.params)

    def dominated(self, v0: float, rtol: float = 1e-9, atol: float = 1e-300) -> bool:
        return bool(np.all(self.matrix <= self.domination_bound(v0) * (1 + rtol) + atol))


def trotter_compose(
    scheme: SchemeSpec,
    potential: PotentialSpec,
    params: PhysicalParams,
    n: int,
    grid: SpatialGrid | None = None,
    level: int = GH_LEVEL,
) -> TrotterResult:
    """Compose ``n + 1`` short-time factors; powers use repeated squaring."""
    if n < 0:
        raise InputError(f"n must be non-negative, got {n}")
    grid = grid or SpatialGrid.default(params.beta)
    short = params.at_beta(params.beta / (n + 1))

    def factor(a, b):
        return short_time_kernel(scheme, potential, a, b, short, level=level)

    pts = grid.points
    K = factor(pts[:, None], pts[None, :])
    K = 0.5 * (K + K.T) if _is_symmetric(scheme) else K
    step = K * grid.weights[None, :]
    matrix = np.linalg.matrix_power(step, n) @ K if n else K
    peak = float(np.max(np.abs(matrix)))
    edge = float(max(np.abs(matrix[0]).max(), np.abs(matrix[-1]).max()))
    mass = edge / peak if peak > 0 else 0.0
    return TrotterResult(
        n, grid, params, matrix, mass, mass > BOUNDARY_TOL,
        math.fsum(map(float, scheme.weights)), factor, step,
    )


def _is_symmetric(scheme: SchemeSpec) -> bool:
    from .covariance import check_scheme_symmetry

    return check_scheme_symmetry(scheme, tol=1e-12).passed


# standard discretization

@dataclass(frozen=True)
class MCEstimate:
    mean: float
    stderr: float
    samples: int


def standard_discretization_mc(
    scheme: SchemeSpec,
    potential: PotentialSpec,
    x: float,
    xp: float,
    params: PhysicalParams,
    k: int,
    samples: int,
    stream: RandomStream,
    tail: bool = True,
    streams: int = 1,
    threads: int = 1,
) -> MCEstimate:
    """Monte Carlo estimate of ``rho_n / rho_fp`` for ``n = 2**k - 1``.

    Paths are level-``k`` Levy-Ciesielski bridges evaluated on the composite
    knots of ``scheme``; with ``tail=True`` each cell also receives the
    scaled bridge correction ``sum_l b_{l,j} G_{l,j}``.  Per path the
    stream yields ``2**k - 1`` bridge normals and then ``n_nu * 2**k`` tail
    normals.
    """
    if k < 1:
        raise InputError(f"level must be >= 1, got {k}")
    knots, weights = composite_knots(scheme, k)
    u = np.asarray(knots, dtype=float)
    w = np.asarray(weights, dtype=float)
    xr = x + (xp - x) * u
    cells = 2**k
    nq = scheme.n_q
    nnu = scheme.n_nu if tail else 0
    # tail at knot (i, cell j) is 2^{-k/2} sum_l b_{l,j} L_l(theta_i); knots are cell-major
    Lk = scheme.bridge_array()[:nnu] * 2.0 ** (-k / 2)
    sigma, beta = params.sigma, params.beta

    def task(sub: RandomStream, count: int) -> RunningMoments:
        gen = sub.generator()
        acc = RunningMoments()
        for take in chunk_sizes(count, cells * (1 + nnu + nq)):
            draws = gen.standard_normal((take, cells - 1 + nnu * cells))
            paths = bridge_from_normals(draws[:, :cells - 1], k)
            vals = dyadic_interpolate(paths, k, u)
            if nnu:
                b = draws[:, cells - 1:].reshape(take, nnu, cells)
                vals = vals + np.einsum("slj,li->sji", b, Lk).reshape(take, cells * nq)
            action = potential(xr + sigma * vals) @ w
            f = np.exp(-beta * action)
            if not np.all(np.isfinite(f)):
                raise EvaluationError("non-finite Boltzmann factor")
            acc.add(f)
        return acc

    mom = run_streams(task, stream, samples, streams, threads)
    return MCEstimate(mom.mean, mom.stderr, samples)


# order estimation

@dataclass(frozen=True)
class OrderFit:
    slope: float
    stderr: float
    intercept: float
    residuals: tuple
    used: tuple
    excluded: tuple


def estimate_convergence_order(errors: Sequence[tuple[int, float]]) -> OrderFit:
    """Least-squares slope of ``log(error)`` against ``log(n + 1)``.

    Non-positive errors are dropped and listed in ``excluded``; at least
    four usable points are required.
    """
    used = [(int(n), float(e)) for n, e in errors if e > 0 and math.isfinite(e)]
    excluded = tuple((int(n), float(e)) for n, e in errors if not (e > 0 and math.isfinite(e)))
    if len(used) < 4:
        raise InputError(f"need at least 4 positive errors, got {len(used)}")
    lx = np.log([n + 1 for n, _ in used])
    ly = np.log([e for _, e in used])
    fit = stats.linregress(lx, ly)
    resid = ly - (fit.intercept + fit.slope * lx)
    return OrderFit(float(fit.slope), float(fit.stderr), float(fit.intercept),
                    tuple(map(float, resid)), tuple(used), excluded)
