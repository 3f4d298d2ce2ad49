import math

import numpy as np
import pytest
from scipy import integrate

from covmatch.covariance import load_scheme
from covmatch.errors import InputError
from covmatch.sampling import RandomStream
from covmatch.trotter import (
    PhysicalParams,
    PotentialSpec,
    SpatialGrid,
    estimate_convergence_order,
    free_particle_kernel,
    gauss_hermite_tensor,
    parse_potential,
    reference_harmonic_kernel,
    short_time_kernel,
    standard_discretization_mc,
    trotter_compose,
)

MEHLER_00 = 1 / math.sqrt(2 * math.pi * math.sinh(1.0))


class TestKernels:
    def test_free_kernel_normalized(self):
        p = PhysicalParams(0.7)
        val, _ = integrate.quad(lambda y: free_particle_kernel(0.3, y, p), -np.inf, np.inf)
        assert val == pytest.approx(1.0, rel=1e-10)

    def test_mehler_origin(self):
        assert reference_harmonic_kernel(0, 0, 1.0, 1.0) == pytest.approx(MEHLER_00, rel=1e-14)
        assert MEHLER_00 == pytest.approx(0.36800520, abs=1e-8)

    def test_mehler_small_omega_limit(self):
        p = PhysicalParams(1.3)
        for x, xp in [(0, 0), (0.4, -1.1)]:
            assert reference_harmonic_kernel(x, xp, 1.3, 1e-7) == pytest.approx(
                free_particle_kernel(x, xp, p), rel=1e-10
            )

    def test_mehler_semigroup(self):
        # int rho(x, y; b1) rho(y, x'; b2) dy = rho(x, x'; b1 + b2)
        val, _ = integrate.quad(
            lambda y: reference_harmonic_kernel(0.2, y, 0.4, 1.5) * reference_harmonic_kernel(y, -0.3, 0.6, 1.5),
            -np.inf, np.inf,
        )
        assert val == pytest.approx(reference_harmonic_kernel(0.2, -0.3, 1.0, 1.5), rel=1e-9)

    def test_gauss_hermite(self):
        nodes, w = gauss_hermite_tensor(2, 6)
        assert w.sum() == pytest.approx(1.0)
        assert (w * nodes[:, 0] ** 2 * nodes[:, 1] ** 4).sum() == pytest.approx(3.0)

    def test_constant_potential(self):
        p = PhysicalParams(0.5)
        got = short_time_kernel(load_scheme("builtin:midpoint-bridge"), PotentialSpec.constant(2.0), 0.1, 0.4, p)
        assert got == pytest.approx(math.exp(-1.0) * free_particle_kernel(0.1, 0.4, p), rel=1e-13)


class TestParsing:
    def test_potentials(self):
        assert parse_potential("harmonic:omega=2").omega == 2
        assert parse_potential("free")(np.array([3.0]))[0] == 0
        assert parse_potential("quartic:a=2")(np.array([1.0]))[0] == pytest.approx(2.0)
        with pytest.raises(InputError):
            parse_potential("cubic:b=1")

    def test_table_potential(self, tmp_path):
        path = tmp_path / "v.csv"
        path.write_text("x,v\n-1,1\n0,0\n1,1\n")
        v = parse_potential(f"table:{path}")
        assert v(np.array([0.5]))[0] == pytest.approx(0.5)

    def test_grid(self):
        g = SpatialGrid.parse("-2:2:5")
        np.testing.assert_allclose(g.points, [-2, -1, 0, 1, 2])
        np.testing.assert_allclose(g.weights, [0.5, 1, 1, 1, 0.5])
        with pytest.raises(InputError):
            SpatialGrid.parse("1:0:5")


class TestComposition:
    def test_free_chapman_kolmogorov(self):
        p = PhysicalParams(1.0)
        res = trotter_compose(load_scheme("builtin:trapezoid"), PotentialSpec.constant(0.0), p, 7)
        assert res.at(0.0, 0.5) == pytest.approx(float(free_particle_kernel(0.0, 0.5, p)), rel=1e-9)

    def test_constant_shift(self):
        p = PhysicalParams(1.0)
        res = trotter_compose(load_scheme("builtin:midpoint"), PotentialSpec.constant(0.5), p, 3)
        assert res.at(0, 0) == pytest.approx(math.exp(-0.5) * float(free_particle_kernel(0, 0, p)), rel=1e-9)

    def test_domination_and_boundary(self):
        res = trotter_compose(load_scheme("builtin:trapezoid"), PotentialSpec.harmonic(1.0), PhysicalParams(1.0), 7)
        assert res.dominated(0.0)
        assert not res.boundary_warning

    def test_boundary_warning_on_narrow_grid(self):
        res = trotter_compose(
            load_scheme("builtin:trapezoid"), PotentialSpec.constant(0.0), PhysicalParams(1.0), 3,
            grid=SpatialGrid(-1.0, 1.0, 64),
        )
        assert res.boundary_warning

    def test_trapezoid_close_to_mehler(self):
        res = trotter_compose(load_scheme("builtin:trapezoid"), PotentialSpec.harmonic(1.0), PhysicalParams(1.0), 31)
        assert abs(res.at(0, 0) - MEHLER_00) < 1e-4


class TestOrderFit:
    def test_synthetic_slope(self):
        fit = estimate_convergence_order([(n, 0.7 / (n + 1) ** 2) for n in (3, 7, 15, 31, 63)])
        assert fit.slope == pytest.approx(-2.0, abs=1e-12)

    def test_excludes_zero_errors(self):
        pts = [(n, 1 / (n + 1)) for n in (1, 3, 7, 15)] + [(31, 0.0)]
        fit = estimate_convergence_order(pts)
        assert fit.slope == pytest.approx(-1.0) and fit.excluded == ((31, 0.0),)

    def test_needs_points(self):
        with pytest.raises(InputError):
            estimate_convergence_order([(1, 0.1), (3, 0.01)])


class TestStandardDiscretization:
    def test_constant_potential_exact(self):
        est = standard_discretization_mc(
            load_scheme("builtin:midpoint-bridge"), PotentialSpec.constant(0.3), 0, 0, PhysicalParams(1.0),
            3, 1000, RandomStream(0),
        )
        assert est.mean == pytest.approx(math.exp(-0.3), rel=1e-14)
        assert est.stderr == pytest.approx(0.0, abs=1e-15)

    def test_harmonic_ratio(self):
        ratio = MEHLER_00 / float(free_particle_kernel(0, 0, PhysicalParams(1.0)))
        est = standard_discretization_mc(
            load_scheme("builtin:trapezoid"), PotentialSpec.harmonic(1.0), 0, 0, PhysicalParams(1.0),
            8, 200_000, RandomStream(2), streams=4, threads=4,
        )
        assert abs(est.mean - ratio) < 3 * est.stderr + 1e-4
