import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from ldzeta import kernel as K
from ldzeta.errors import BudgetError, ConfigError

SPEC = K.KernelSpec()
SMALL = K.KernelSpec(Delta=1.4, a=2.1, order=2)


@pytest.fixture(scope="module")
def kern():
    return K.cached_kernel(SPEC)


@pytest.fixture(scope="module")
def small_poly():
    return K.d_poly(SMALL, 2.0, +1)


class TestSpec:
    def test_default_exponents(self):
        assert (SPEC.a, SPEC.b_exp, SPEC.c_exp) == (2.5, 5.0, 7.5)

    def test_ordering_enforced(self):
        with pytest.raises(ConfigError):
            K.KernelSpec(a=2.0, b=3.0, c=3.0)
        with pytest.raises(ConfigError):
            K.KernelSpec(Delta=1.0)
        with pytest.raises(ConfigError):
            K.KernelSpec(family="gaussian")

    def test_overspill(self):
        with pytest.raises(ConfigError):
            K.KernelSpec(Delta=1.1, a=1.5).check_overspill()

    def test_intervals_nest(self):
        lo_p, hi_p = SPEC.interval(+1)
        lo_m, hi_m = SPEC.interval(-1)
        assert lo_p < 0 < lo_m < hi_m < 1 / SPEC.Delta < hi_p


class TestIrwinHall:
    def test_small_centres(self):
        # density of U1 + U2 at 1 is 1; of four uniforms at 2 is 2/3
        assert K.irwin_hall_center(2) == 1
        assert K.irwin_hall_center(4) == Fraction(2, 3)

    @pytest.mark.parametrize("x", [0.3, 1.7, 2.5])
    def test_density_integrates_by_quadrature(self, x):
        # cdf increments of the 3-uniform density against direct quadrature of the pieces
        total = float(mpmath.quad(lambda y: K.irwin_hall_density(y, 3), [0, 1, 2, 3]))
        assert total == pytest.approx(1.0, abs=1e-12)
        assert float(K.irwin_hall_density(x, 3)) >= 0


class TestKernel:
    def test_normalization(self, kern):
        assert kern.norm_exact
        assert kern.normalization_error() < 1e-10

    def test_normalization_by_scipy(self, kern):
        # independent adaptive quadrature of the density over the core
        val, _ = integrate.quad(lambda u: float(kern.phi(u)), 0, 400, limit=400)
        assert 2 * val == pytest.approx(1.0, abs=1e-10)

    def test_even(self, kern):
        u = np.linspace(0, 300, 1001)
        assert np.array_equal(kern.phi(u), kern.phi(-u))

    def test_nonnegative(self, kern):
        assert np.all(kern.phi(np.linspace(-500, 500, 4001)) >= 0)

    def test_transform_support(self, kern):
        assert abs(kern.fourier_quadrature([1.5])[0]) < 1e-10
        assert kern.phi_hat([1.5])[0] == 0.0
        assert K.support_check(kern)["certified"]

    def test_transform_inside_support(self, kern):
        # both routes agree where the transform is not negligible
        xi = [0.0, 0.05, 0.1]
        assert np.allclose(kern.fourier_quadrature(xi), kern.phi_hat(xi), atol=1e-10)

    def test_parseval(self, kern):
        rep = K.parseval_check(kern)
        assert rep["passed"] and rep["rel_diff"] < 1e-8

    def test_tail_envelope_dominates(self, kern):
        d = np.array([50.0, 200.0, 1000.0])
        lt, flag = kern.log_upper_tail(d)
        assert not flag.any()
        assert np.all(lt <= kern.log_tail_envelope(d) - kern.log_norm + 1e-12)

    def test_negative_tail_rejected(self, kern):
        with pytest.raises(ConfigError):
            kern.log_upper_tail([-1.0])

    def test_coarse_grid_rejected(self):
        from ldzeta.errors import PrecisionError

        with pytest.raises(PrecisionError):
            K.build_kernel(K.KernelSpec(grid_step=0.5))


class TestH:
    def test_interior_lower_bound(self):
        x = 0.5 / SPEC.Delta
        bound = -SPEC.Delta ** (SPEC.c_exp - SPEC.b_exp - 1)
        hp = K.h_pm([x], SPEC, +1)
        assert hp.log_1mh[0] <= bound
        assert 1 - math.exp(bound) > 0 and hp.h[0] > 0

    def test_far_upper_bound(self):
        x = 10 / SPEC.Delta
        assert K.h_pm([x], SPEC, +1).log_h[0] <= -SPEC.Delta ** (SPEC.c_exp - SPEC.a - 1)

    def test_against_mpmath_reference(self):
        # transition points, where neither log h nor log(1-h) is extreme
        lo, hi = SPEC.interval(+1)
        for x in (lo, hi, hi + 3 / SPEC.scale):
            ref = K.h_reference(x, SPEC, +1, dps=30)
            assert K.h_pm([x], SPEC, +1).h[0] == pytest.approx(float(ref), rel=1e-10)

    def test_edge_value_half(self):
        lo, _ = SPEC.interval(-1)
        assert K.h_pm([lo], SPEC, -1).h[0] == pytest.approx(0.5, abs=1e-12)

    def test_transition_shrinks_with_delta(self):
        widths = [K.transition_measure(SPEC.with_delta(D)) for D in (3.0, 4.0, 5.0)]
        assert all(b < a for a, b in zip(widths, widths[1:]))


@settings(max_examples=40, deadline=None)
@given(x=st.floats(-2.0, 2.0))
def test_nesting_everywhere(x):
    hp, hm = K.h_pm([x], SPEC, +1), K.h_pm([x], SPEC, -1)
    assert 0.0 <= hm.h[0] <= hp.h[0] <= 1.0
    # the complement ordering, resolved in log space near one
    assert hp.log_1mh[0] <= hm.log_1mh[0] + 1e-12


class TestPolynomial:
    def test_degree_rule(self, small_poly):
        assert small_poly.degree == math.ceil(100 * 2.0 * SMALL.scale)
        assert len(small_poly.coefficients) == small_poly.degree

    def test_gate(self):
        with pytest.raises(BudgetError):
            K.d_poly(SPEC, 2.0, +1)

    def test_real_valued(self, small_poly):
        assert all(isinstance(c, mpmath.mpf) for c in small_poly.coefficients)
        assert isinstance(small_poly(0.7), mpmath.mpf)

    def test_remainder_bound(self, small_poly):
        rep = K.remainder_check(small_poly, SMALL, n_points=9)
        assert rep["passed"]

    def test_coefficient_bound(self, small_poly):
        assert K.coefficient_bound_check(small_poly, SMALL)["passed"]

    def test_series_route_matches_moments(self, small_poly):
        # first coefficients from the x-side series agree with the Fourier moments
        series = K.taylor_coefficients(SMALL, +1, 12, dps=small_poly.dps)
        with mpmath.workdps(small_poly.dps):
            for a, b in zip(series.coefficients, small_poly.coefficients[:12]):
                assert abs(a - b) <= mpmath.mpf(10) ** -25 * max(1, abs(b))

    @pytest.mark.parametrize("sign", [+1, -1])
    def test_default_coefficients_bounded(self, sign):
        poly = K.taylor_coefficients(SPEC, sign, 200, dps=30)
        assert K.coefficient_bound_check(poly, SPEC)["violations"] == 0

    def test_bad_radius(self):
        with pytest.raises(ConfigError):
            K.d_poly(SMALL, 1.0, +1)


class TestSandwich:
    def test_certified_default(self):
        rep = K.verify_sandwich(SPEC)
        assert rep.n_points == 10_000
        assert rep.total_violations == 0
        assert set(rep.violations) == set(K.INEQUALITIES)

    def test_certification_scan(self):
        rows = {r["Delta"]: r["certified"] for r in K.certification_scan(SPEC, [2, 3, 4, 5, 6])}
        assert rows == {2.0: False, 3.0: True, 4.0: True, 5.0: True, 6.0: False}

    def test_table_columns(self):
        tab = K.sandwich_table(SPEC, grid=np.linspace(-0.1, 0.4, 50))
        assert np.all(tab["h_minus"] <= tab["h_plus"])
        assert np.all(tab["D_plus_sq_upper"] >= tab["h_plus"] ** 2)


class TestIngham:
    def test_scales_sum(self):
        assert K.kernel_scales("ingham", 200).sum() == pytest.approx(2.0)

    def test_far_tail_needs_enough_factors(self):
        assert not K.tail_requirements(K.KernelSpec(family="ingham", order=50))["far"]["ok"]
        assert K.tail_requirements(K.KernelSpec(family="ingham", order=100))["far"]["ok"]

    def test_normalization_by_quadrature(self):
        kern = K.cached_kernel(K.KernelSpec(family="ingham", order=100))
        assert not kern.norm_exact
        assert kern.normalization_error() < 1e-12
