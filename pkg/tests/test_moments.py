from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from covmatch.covariance import load_scheme, make_scheme
from covmatch.errors import CapacityError, InputError
from covmatch.moments import (
    DiophantineIndex,
    bm_moment_polynomial,
    certify_order,
    enumerate_indices,
    index_stats,
    residual_vector,
    scheme_moment_polynomial,
)

F = Fraction
SCHEMES = ["trapezoid", "midpoint", "midpoint-bridge"]


def _brute_indices(mu):
    """Every tuple in the box 0 <= j_k <= 2mu/k solving sum k j_k = 2mu."""
    import itertools

    ranges = [range(2 * mu // k + 1) for k in range(1, 2 * mu + 1)]
    return {j for j in itertools.product(*ranges) if sum((k + 1) * x for k, x in enumerate(j)) == 2 * mu}


class TestIndices:
    @pytest.mark.parametrize("mu", [1, 2, 3, 4])
    def test_enumeration_matches_brute_force(self, mu):
        got = [z.j for z in enumerate_indices(mu)]
        assert set(got) == _brute_indices(mu)
        assert got == sorted(got, reverse=True)

    def test_counts(self):
        # partitions of 2 mu
        assert [len(enumerate_indices(m)) for m in (1, 2, 3, 4)] == [2, 5, 11, 22]

    def test_d_and_n(self):
        z = DiophantineIndex.of(1, 0, 1, 0)
        assert (z.d, z.n) == (1, 1)
        z = DiophantineIndex.of(0, 3, 0, 0, 0, 0)
        assert (z.d, z.n) == (0, 0)

    @pytest.mark.parametrize("mu", [1, 2, 3, 4])
    def test_degree_identity(self, mu):
        for z in enumerate_indices(mu):
            stats = index_stats(z)
            assert stats.d + stats.n <= mu

    def test_rejects_non_solutions(self):
        with pytest.raises(InputError):
            DiophantineIndex.of(1, 1)


class TestMomentPolynomials:
    def test_bm_f11(self):
        # E[(l0 + l1 B_u)^2]-type quadratic: l0^2 + 2 l0 l1 E[u] + l1^2 E[u]
        p = bm_moment_polynomial(1, 1)
        assert p.coefficient((2, 0)) == 1
        assert p.coefficient((1, 1)) == 1
        assert p.coefficient((0, 2)) == F(1, 2)
        assert len(p) == 3

    def test_bm_f21_cross_term(self):
        # from 2 l0^2 l1^2 E[u] + 4 l0^2 l1^2 E[u^2] = 1 + 4/3
        assert bm_moment_polynomial(2, 1).coefficient((2, 2)) == F(7, 3)

    def test_trapezoid_f21_cross_term(self):
        # knot 1 contributes (l0 + l1)^4 with weight 1/2; knot 0 contributes l0^4
        p = scheme_moment_polynomial(load_scheme("builtin:trapezoid"), 2, 1)
        assert p.coefficient((2, 2)) == 3
        assert p.coefficient((4, 0)) == 1

    def test_f_n0_is_endpoint_power(self):
        for n in range(1, 5):
            assert bm_moment_polynomial(n, 0).terms == {(2 * n,): 1}

    def test_capacity(self):
        with pytest.raises(CapacityError):
            bm_moment_polynomial(4, 2)
        assert len(bm_moment_polynomial(4, 2, max_order=6)) > 0

    @settings(max_examples=20, deadline=None)
    @given(n=st.integers(1, 3), d=st.integers(0, 2), scheme=st.sampled_from([None, *SCHEMES]))
    def test_homogeneous(self, n, d, scheme):
        p = bm_moment_polynomial(n, d) if scheme is None else scheme_moment_polynomial(load_scheme(f"builtin:{scheme}"), n, d)
        assert p.is_homogeneous(2 * n)

    @settings(max_examples=20, deadline=None)
    @given(n=st.integers(1, 3), d=st.integers(2, 3), scheme=st.sampled_from([None, *SCHEMES]), data=st.data())
    def test_permutation_symmetry(self, n, d, scheme, data):
        if n + d > 5:
            return
        p = bm_moment_polynomial(n, d) if scheme is None else scheme_moment_polynomial(load_scheme(f"builtin:{scheme}"), n, d)
        perm = data.draw(st.permutations(list(range(1, d + 1))))
        assert p.permute([0, *perm]) == p

    @settings(max_examples=20, deadline=None)
    @given(n=st.integers(1, 3), d=st.integers(1, 2), scheme=st.sampled_from([None, *SCHEMES]))
    def test_dimension_reduction(self, n, d, scheme):
        # setting lambda_d = 0 leaves the d - 1 polynomial
        if scheme is None:
            hi, lo = bm_moment_polynomial(n, d), bm_moment_polynomial(n, d - 1)
        else:
            s = load_scheme(f"builtin:{scheme}")
            hi, lo = scheme_moment_polynomial(s, n, d), scheme_moment_polynomial(s, n, d - 1)
        assert hi.truncate(d) == lo

    def test_float_scheme_close_to_exact(self):
        exact = load_scheme("builtin:midpoint-bridge")
        approx = make_scheme("f", [0.5], [1.0], [[0.5]])
        a = scheme_moment_polynomial(exact, 2, 2)
        b = scheme_moment_polynomial(approx, 2, 2)
        assert float(a.max_abs_difference(b)) < 1e-14


class TestCertification:
    def test_trapezoid(self):
        rep = certify_order(load_scheme("builtin:trapezoid"), 4)
        assert rep.certified_order == 2
        first = rep.first_failure
        assert (first.n, first.d) == (2, 1)
        assert first.max_residual == F(2, 3)

    def test_midpoint(self):
        rep = certify_order(load_scheme("builtin:midpoint"), 3)
        assert rep.certified_order == 1
        assert (rep.first_failure.n, rep.first_failure.d) == (1, 1)

    def test_midpoint_bridge(self):
        assert certify_order(load_scheme("builtin:midpoint-bridge"), 3).certified_order == 2

    def test_report_json(self):
        js = certify_order(load_scheme("builtin:trapezoid"), 2).to_json(polynomials=True)
        assert js["certified_order"] == 2 and js["tol"] == 0
        assert set(js["conditions"][0]) >= {"n", "d", "max_residual", "pass", "brownian_polynomial"}

    def test_threads_deterministic(self):
        s = load_scheme("builtin:midpoint-bridge")
        assert certify_order(s, 3, threads=4).to_json() == certify_order(s, 3).to_json()

    def test_scaled_bridge_breaks_order(self):
        s = load_scheme("builtin:midpoint-bridge").with_bridge_scaled(F(1001, 1000))
        assert certify_order(s, 2).certified_order == 1

    def test_residual_vector_zero_iff_certified(self):
        assert not residual_vector(load_scheme("builtin:trapezoid"), 2).any()
        assert residual_vector(load_scheme("builtin:trapezoid"), 3).any()
