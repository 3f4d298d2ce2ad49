import math
from fractions import Fraction

import numpy as np
import pytest

from covmatch.covariance import load_scheme
from covmatch.errors import CapacityError
from covmatch.moments import DiophantineIndex, enumerate_indices
from covmatch.wick import (
    bm_generalized_moment_direct,
    cross_validate,
    isserlis,
    perfect_pairings,
    scheme_generalized_moment_direct,
)

F = Fraction
Z = DiophantineIndex.of


class TestIsserlis:
    @pytest.mark.parametrize("m", [1, 2, 3, 4, 5])
    def test_pairing_count(self, m):
        # (2m - 1)!!
        assert sum(1 for _ in perfect_pairings(range(2 * m))) == math.prod(range(1, 2 * m, 2))

    def test_standard_normal_moments(self):
        for m, val in [(2, 1), (4, 3), (6, 15), (8, 105)]:
            assert isserlis([[1]], [m]) == val

    def test_odd_vanishes(self):
        assert isserlis([[1, F(1, 2)], [F(1, 2), 1]], [2, 1]) == 0

    def test_bivariate(self):
        a, b, c = F(2), F(3), F(1, 2)
        cov = [[a, c], [c, b]]
        assert isserlis(cov, [2, 2]) == a * b + 2 * c * c
        assert isserlis(cov, [3, 1]) == 3 * a * c

    def test_against_monte_carlo(self):
        cov = np.array([[1.0, 0.3, 0.1], [0.3, 0.8, -0.2], [0.1, -0.2, 0.5]])
        x = np.random.default_rng(1).multivariate_normal(np.zeros(3), cov, 400_000)
        mc = x[:, 0] ** 2 * x[:, 1] * x[:, 2]
        exact = isserlis(cov.tolist(), [2, 1, 1])
        assert abs(mc.mean() - exact) < 4 * mc.std() / np.sqrt(len(mc))

    def test_capacity(self):
        with pytest.raises(CapacityError):
            isserlis([[1]], [12])


class TestDirectMoments:
    def test_brownian_hand_values(self):
        assert bm_generalized_moment_direct(Z(2, 0)).value == 1
        assert bm_generalized_moment_direct(Z(4, 0, 0, 0)).value == 3
        # E[B_1 int B] = int u du
        assert bm_generalized_moment_direct(Z(1, 0, 1, 0)).value == F(1, 2)
        # E[int B^2] = int u du
        assert bm_generalized_moment_direct(Z(0, 0, 0, 1)).value == F(1, 2)
        # E[(int B)^2] = int int min
        assert bm_generalized_moment_direct(Z(0, 0, 2, 0, 0, 0)).value == F(1, 3)

    def test_j2_factor_is_one(self):
        assert bm_generalized_moment_direct(Z(0, 1)).value == 1
        assert bm_generalized_moment_direct(Z(2, 2, 0, 0, 0, 0)).value == 1

    def test_trapezoid_hand_value(self):
        # sum_i w_i B~_{theta_i} = B_1 / 2 for the trapezoid rule
        s = load_scheme("builtin:trapezoid")
        assert scheme_generalized_moment_direct(s, Z(0, 0, 2, 0, 0, 0)).value == F(1, 4)

    def test_endpoint_times_cubic(self):
        # E[B_1 int B^3] = int 3 u^2 du
        assert bm_generalized_moment_direct(Z(1, 0, 0, 0, 1, 0)).value == 1


class TestCrossValidation:
    @pytest.mark.parametrize("scheme", [None, "trapezoid", "midpoint", "midpoint-bridge"])
    @pytest.mark.parametrize("mu", [1, 2, 3])
    def test_exact_agreement(self, scheme, mu):
        s = None if scheme is None else load_scheme(f"builtin:{scheme}")
        for z in enumerate_indices(mu):
            cv = cross_validate(z, s)
            assert cv.exact_equal, (str(z), cv.direct, cv.polynomial)
            assert cv.diff == 0
