import math
from fractions import Fraction

import numpy as np
import pytest

from covmatch import _kernels
from covmatch.covariance import load_scheme, make_scheme
from covmatch.errors import InputError
from covmatch.sampling import (
    RandomStream,
    RunningMoments,
    bridge_from_normals,
    composite_measure,
    dyadic_interpolate,
    levy_ciesielski_paths,
    schauder,
    tail_field,
    tail_sup_statistic,
)

F = Fraction


class TestSchauder:
    def test_values(self):
        assert schauder(1, 1, 0.5) == 0.5
        assert schauder(1, 1, 0.25) == 0.25
        assert schauder(2, 1, 0.25) == pytest.approx(0.5 / math.sqrt(2))
        assert schauder(2, 2, 0.25) == 0.0
        assert schauder(3, 4, 7 / 8) == pytest.approx(0.25)

    def test_invalid(self):
        with pytest.raises(InputError):
            schauder(2, 3, 0.1)


class TestBridge:
    def test_level_one(self):
        np.testing.assert_array_equal(bridge_from_normals([[1.0]], 1), [[0.0, 0.5, 0.0]])

    def test_matches_schauder_sum(self):
        k = 3
        a = np.random.default_rng(3).standard_normal(2**k - 1)
        u = np.arange(2**k + 1) / 2**k
        expected = np.zeros_like(u)
        pos = 0
        for l in range(1, k + 1):
            for j in range(1, 2 ** (l - 1) + 1):
                expected += a[pos] * schauder(l, j, u)
                pos += 1
        np.testing.assert_allclose(bridge_from_normals(a[None, :], k)[0], expected, atol=1e-15)

    @pytest.mark.parametrize("k", [1, 3, 5])
    def test_exact_covariance(self, k):
        # with unit normals as rows, P^T P is the exact covariance at the dyadic points
        P = bridge_from_normals(np.eye(2**k - 1), k)
        u = np.arange(2**k + 1) / 2**k
        np.testing.assert_allclose(P.T @ P, np.minimum.outer(u, u) - np.outer(u, u), atol=1e-14)

    def test_endpoints_and_linear_cells(self):
        paths = levy_ciesielski_paths(4, 50, RandomStream(7))
        assert np.all(paths[:, 0] == 0) and np.all(paths[:, -1] == 0)
        mid = dyadic_interpolate(paths, 4, [1 / 32])
        np.testing.assert_allclose(mid[:, 0], 0.5 * paths[:, 1])

    def test_reproducible(self):
        a = levy_ciesielski_paths(5, 10, RandomStream(11))
        b = levy_ciesielski_paths(5, 10, RandomStream(11))
        c = levy_ciesielski_paths(5, 10, RandomStream(11, 1))
        assert np.array_equal(a, b) and not np.array_equal(a, c)

    def test_backends_agree(self):
        if _kernels.cython_kernels is None:
            pytest.skip("compiled kernels unavailable")
        rng = np.random.default_rng(5)
        normals = rng.standard_normal((100, 63))
        np.testing.assert_array_equal(
            _kernels.python_kernels.lc_fill(normals, 6), _kernels.cython_kernels.lc_fill(normals, 6)
        )
        b = rng.standard_normal((100, 8, 2))
        lam = rng.standard_normal((2, 17))
        np.testing.assert_allclose(
            _kernels.python_kernels.tail_sup(b, lam), _kernels.cython_kernels.tail_sup(b, lam), rtol=1e-15
        )


class TestRunningMoments:
    def test_constant_has_zero_variance(self):
        m = RunningMoments().add(np.full(1000, 0.1)).add(np.full(10, 0.1))
        assert m.mean == 0.1 and m.variance == 0.0

    def test_merge_matches_numpy(self):
        x = np.random.default_rng(0).standard_normal(1001)
        m = RunningMoments().add(x[:300]).add(x[300:])
        assert m.mean == pytest.approx(x.mean(), rel=1e-13)
        assert m.variance == pytest.approx(x.var(ddof=1), rel=1e-12)


class TestComposite:
    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_trapezoid_identities(self, k):
        q = composite_measure(load_scheme("builtin:trapezoid"), k)
        assert q.exact
        assert sum(q.weights) == 1
        assert q.integrate(lambda u: u) == F(1, 2)
        # composite trapezoid error for u^2 is h^2 / 6 with h = 2^-k
        assert q.integrate(lambda u: u * u) - F(1, 3) == F(1, 6 * 4**k)

    def test_duplicates_merged(self):
        q = composite_measure(load_scheme("builtin:trapezoid"), 1)
        assert q.knots == (0, F(1, 2), 1)
        assert q.weights == (F(1, 4), F(1, 2), F(1, 4))

    def test_tail_field(self):
        mb = load_scheme("builtin:midpoint-bridge")
        # G_{1,2} at the centre of cell 2 of level 1: 2^{-1/2} * 1/2
        assert tail_field(mb, 1, 1, 2, 0.75) == pytest.approx(0.5 / math.sqrt(2))
        assert tail_field(mb, 1, 1, 2, 0.25) == 0.0


class TestTailStatistic:
    def test_no_bridge_is_zero(self):
        st = tail_sup_statistic(load_scheme("builtin:trapezoid"), 3, 1000, RandomStream(0))
        assert st.estimate == 0 and st.bound == 0

    def test_within_bound(self):
        st = tail_sup_statistic(load_scheme("builtin:midpoint-bridge"), 2, 5000, RandomStream(0))
        assert st.bound == 3 * 0.5**4 / 4
        assert st.within_bound

    def test_streams_reproducible(self):
        s = load_scheme("builtin:midpoint-bridge")
        a = tail_sup_statistic(s, 3, 2000, RandomStream(4), streams=4, threads=1)
        b = tail_sup_statistic(s, 3, 2000, RandomStream(4), streams=4, threads=4)
        assert a == b

    def test_needs_samples(self):
        with pytest.raises(InputError):
            tail_sup_statistic(make_scheme("m", [0.5], [1.0], [[0.5]]), 2, 10, RandomStream(0))
