"""Dyadic constructions: Schauder functions, Levy-Ciesielski bridges, tail fields.

Index conventions follow the usual 1-based labelling: Schauder function
``F_{l,j}`` has level ``l >= 1`` and cell ``1 <= j <= 2**(l-1)``; tail
functions ``G_{l,j}`` have bridge index ``1 <= l <= n_nu`` and cell
``1 <= j <= 2**k``.

Normal deviates are drawn level-major then by cell: a level-``k`` bridge
consumes ``a_{1,1}, a_{2,1}, a_{2,2}, a_{3,1}, ...`` (``2**k - 1`` values);
tail coefficients ``b_{l,j}`` are drawn bridge-function-major then by cell.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import _kernels
from .covariance import QuadratureRule, SchemeSpec
from .errors import InputError

CHUNK_ELEMENTS = 1 << 21
GRID_POINTS_PER_CELL = 16


@dataclass(frozen=True)
class RandomStream:
    """Reproducible normal deviates keyed by ``(seed, stream_id)``."""

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.PCG64(ss))

    def substream(self, offset: int) -> "RandomStream":
        return RandomStream(self.seed, self.stream_id + offset)


class RunningMoments:
    """Mean and sum of squared deviations, merged in a fixed order.

    Batches are shifted by their first value, so a constant sample gives
    mean equal to that constant and variance exactly zero.
    """

    def __init__(self):
        self.count = 0
        self.mean = 0.0
        self.m2 = 0.0

    def add(self, values) -> "RunningMoments":
        values = np.asarray(values, dtype=float).ravel()
        if values.size == 0:
            return self
        shift = float(values[0])
        dev = values - shift
        mean = shift + math.fsum(dev) / values.size
        m2 = math.fsum((values - mean) ** 2)
        other = RunningMoments()
        other.count, other.mean, other.m2 = values.size, mean, m2
        return self.merge(other)

    def merge(self, other: "RunningMoments") -> "RunningMoments":
        if other.count == 0:
            return self
        if self.count == 0:
            self.count, self.mean, self.m2 = other.count, other.mean, other.m2
            return self
        n = self.count + other.count
        delta = other.mean - self.mean
        self.mean = self.mean + delta * other.count / n
        self.m2 = self.m2 + other.m2 + delta * delta * self.count * other.count / n
        self.count = n
        return self

    @property
    def variance(self) -> float:
        return self.m2 / (self.count - 1) if self.count > 1 else 0.0

    @property
    def stderr(self) -> float:
        return math.sqrt(self.variance / self.count) if self.count else math.inf


def split_samples(samples: int, streams: int) -> list[int]:
    if streams < 1:
        raise InputError(f"need at least one stream, got {streams}")
    base, extra = divmod(samples, streams)
    return [base + (1 if i < extra else 0) for i in range(streams)]


def run_streams(task, stream: RandomStream, samples: int, streams: int = 1, threads: int = 1):
    """Run ``task(sub_stream, count) -> RunningMoments`` per stream and merge in stream order."""
    counts = split_samples(samples, streams)
    subs = [stream.substream(i) for i in range(streams)]
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        parts = list(pool.map(task, subs, counts))
    total = RunningMoments()
    for part in parts:
        total.merge(part)
    return total


def chunk_sizes(samples: int, width: int):
    per = max(1, CHUNK_ELEMENTS // max(1, width))
    while samples > 0:
        take = min(per, samples)
        yield take
        samples -= take


# Schauder system

def _tent(v):
    v = np.asarray(v, dtype=float)
    return np.where((v >= 0) & (v <= 0.5), v, np.where((v > 0.5) & (v <= 1), 1 - v, 0.0))


def schauder(l: int, j: int, u):
    """``F_{l,j}(u) = 2^{-(l-1)/2} F_{1,1}(2^{l-1} u - j + 1)`` with the unit tent ``F_{1,1}``."""
    if l < 1 or not 1 <= j <= 2 ** (l - 1):
        raise InputError(f"invalid Schauder index (l={l}, j={j})")
    out = 2.0 ** (-(l - 1) / 2) * _tent(2.0 ** (l - 1) * np.asarray(u, dtype=float) - j + 1)
    return out if np.ndim(out) else float(out)


@dataclass(frozen=True)
class DyadicPath:
    """Path values at ``u = j / 2**level`` for ``j = 0..2**level``."""

    level: int
    values: np.ndarray

    @property
    def grid(self) -> np.ndarray:
        return np.arange(2**self.level + 1) / 2**self.level


def bridge_from_normals(normals, k: int) -> np.ndarray:
    """Level-``k`` Levy-Ciesielski sums at dyadic points; ``normals`` is ``(samples, 2**k - 1)``."""
    if k < 1:
        raise InputError(f"level must be >= 1, got {k}")
    normals = np.atleast_2d(np.asarray(normals, dtype=float))
    if normals.shape[1] != 2**k - 1:
        raise InputError(f"level {k} needs {2**k - 1} normals per path, got {normals.shape[1]}")
    return _kernels.lc_fill(normals, k)


def levy_ciesielski_paths(k: int, samples: int, stream: RandomStream) -> np.ndarray:
    """``samples`` bridge paths of level ``k``; row ``s`` uses the ``s``-th block of normals."""
    gen = stream.generator()
    out = np.empty((samples, 2**k + 1))
    start = 0
    for take in chunk_sizes(samples, 2**k):
        out[start:start + take] = bridge_from_normals(gen.standard_normal((take, 2**k - 1)), k)
        start += take
    return out


def levy_ciesielski_bridge(k: int, stream: RandomStream) -> DyadicPath:
    return DyadicPath(k, levy_ciesielski_paths(k, 1, stream)[0])


def dyadic_interpolate(paths: np.ndarray, k: int, u) -> np.ndarray:
    """Linear interpolation of dyadic path values at points ``u`` in ``[0, 1]``.

    Exact for Levy-Ciesielski sums of level ``k``, which are linear on every
    level-``k`` cell.
    """
    u = np.asarray(u, dtype=float)
    size = 2**k
    pos = u * size
    cell = np.clip(np.floor(pos).astype(int), 0, size - 1)
    frac = pos - cell
    return paths[:, cell] * (1 - frac) + paths[:, cell + 1] * frac


def empirical_covariance(paths: np.ndarray, i: int, j: int) -> tuple[float, float]:
    """Sample covariance of columns ``i`` and ``j`` with its standard error."""
    x = paths[:, i] - paths[:, i].mean()
    y = paths[:, j] - paths[:, j].mean()
    prod = x * y
    return float(prod.mean()), float(prod.std(ddof=1) / math.sqrt(len(prod)))


# tail field and composite measure

def tail_field(scheme: SchemeSpec, k: int, l: int, j: int, u):
    """``G_{l,j}(u) = 2^{-k/2} L_l(2^k u - j + 1)`` with the bridge extension set to zero off ``[0, 1]``."""
    if k < 1:
        raise InputError(f"level must be >= 1, got {k}")
    if not 1 <= l <= scheme.n_nu:
        raise InputError(f"bridge index {l} outside 1..{scheme.n_nu}")
    if not 1 <= j <= 2**k:
        raise InputError(f"cell index {j} outside 1..{2**k}")
    s = 2.0**k * np.asarray(u, dtype=float) - j + 1
    out = 2.0 ** (-k / 2) * scheme.extension(l - 1, s)
    return out if np.ndim(out) else float(out)


def composite_knots(scheme: SchemeSpec, k: int):
    """Unmerged knots ``2^-k (theta_i + j - 1)`` and weights ``2^-k w_i``, cell-major."""
    if k < 0:
        raise InputError(f"level must be >= 0, got {k}")
    scale = Fraction(1, 2**k) if scheme.quadrature.exact else 2.0**-k
    knots, weights = [], []
    for j in range(1, 2**k + 1):
        for theta, w in zip(scheme.knots, scheme.weights):
            knots.append(scale * (theta + j - 1))
            weights.append(scale * w)
    return knots, weights


def composite_measure(scheme: SchemeSpec, k: int) -> QuadratureRule:
    """Contracted and translated copies of the scheme's rule in ``2**k`` dyadic cells."""
    knots, weights = composite_knots(scheme, k)
    return QuadratureRule.merged(knots, weights)


# tail statistic

@dataclass(frozen=True)
class TailStatistic:
    k: int
    samples: int
    estimate: float
    stderr: float
    bound: float

    @property
    def within_bound(self) -> bool:
        return self.estimate <= self.bound + 3 * self.stderr


def tail_grid(scheme: SchemeSpec, points_per_cell: int = GRID_POINTS_PER_CELL) -> np.ndarray:
    """Local cell coordinates in ``[0, 1]``: a uniform grid merged with the knots."""
    grid = np.linspace(0.0, 1.0, points_per_cell + 1)
    return np.unique(np.concatenate([grid, np.asarray(scheme.knots, dtype=float)]))


def tail_sup_statistic(
    scheme: SchemeSpec,
    k: int,
    samples: int,
    stream: RandomStream,
    streams: int = 1,
    threads: int = 1,
    points_per_cell: int = GRID_POINTS_PER_CELL,
) -> TailStatistic:
    """Monte Carlo estimate of ``E[(max_u |T_k(u)|)^4]`` for the tail series.

    In cell ``j`` the tail is ``2^{-k/2} sum_l b_{l,j} L_l(s)`` with local
    coordinate ``s``, so the sup-norm is a maximum over cells of a fixed
    linear combination evaluated on :func:`tail_grid`.
    """
    if k < 1:
        raise InputError(f"level must be >= 1, got {k}")
    if samples < 1000:
        raise InputError(f"need at least 1000 samples, got {samples}")
    nnu = scheme.n_nu
    bound = 3 * nnu * scheme.extension_bound() ** 4 / 2**k
    if nnu == 0:
        return TailStatistic(k, samples, 0.0, 0.0, 0.0)
    s = tail_grid(scheme, points_per_cell)
    lam = np.vstack([scheme.extension(l, s) for l in range(nnu)])
    cells = 2**k
    scale = 2.0 ** (-k / 2)

    def task(sub: RandomStream, count: int) -> RunningMoments:
        gen = sub.generator()
        acc = RunningMoments()
        for take in chunk_sizes(count, cells * nnu * lam.shape[1]):
            b = gen.standard_normal((take, nnu, cells)).transpose(0, 2, 1)
            sup = scale * _kernels.tail_sup(np.ascontiguousarray(b), lam)
            acc.add(sup**4)
        return acc

    mom = run_streams(task, stream, samples, streams, threads)
    return TailStatistic(k, samples, mom.mean, mom.stderr, bound)
