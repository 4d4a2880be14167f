import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ldzeta import dirichlet as dz
from ldzeta.errors import BudgetError, ConfigError
from ldzeta.params import ladder_from_cutoffs
from ldzeta.primes import PrimeTable, primes_between, primes_up_to


@pytest.fixture(scope="module")
def table():
    return PrimeTable(20_000)


class TestZeta:
    def test_basel(self):
        N = 2_000_000
        partial = dz.zeta_eval(2.0, 0.0, N=N)
        # tail of sum n^{-2} past N is 1/N - 1/(2N^2) + ...
        assert (partial + 1 / N - 1 / (2 * N * N)).real == pytest.approx(math.pi**2 / 6, abs=1e-12)
        assert partial.real == pytest.approx(1.644934, abs=1e-6)

    def test_real_at_zero_height(self):
        assert dz.zeta_eval(0.5, 0.0, N=1234).imag == 0.0

    def test_conjugation(self):
        t = np.array([1e4 + 0.3, 15_000.7])
        a = dz.zeta_eval(0.5, t, N=10_000)
        b = dz.zeta_eval(0.5, -t, N=10_000)
        assert np.array_equal(a, np.conj(b))

    def test_euler_maclaurin_against_mpmath(self):
        for t in (14.134725, 1000.5, 12_345.6):
            em = dz.zeta_euler_maclaurin(0.5, t)
            ref = complex(mpmath.zeta(mpmath.mpc(0.5, t)))
            assert abs(em - ref) <= 1e-6 * max(1.0, abs(ref))

    def test_direct_vs_euler_maclaurin(self):
        # the partial sum differs from zeta by the boundary term; the rest is below 1e-3 relative
        rng = np.random.default_rng(0)
        for t in rng.uniform(1e4, 2e4, 5):
            N = dz.zeta_cutoff(1e4)
            direct = dz.zeta_eval(0.5, t, N=N)
            em = dz.zeta_euler_maclaurin(0.5, t)
            bt = dz.partial_sum_boundary_term(0.5, t, N)
            assert abs(direct - em) <= abs(bt) + 1e-3 * abs(em)
            # removing the boundary term brings the partial sum closer to zeta
            assert abs(direct - bt - em) < abs(direct - em)

    def test_pole(self):
        with pytest.raises(ConfigError):
            dz.zeta_euler_maclaurin(1.0, 0.0)

    def test_budget(self):
        with pytest.raises(BudgetError):
            dz.zeta_cutoff(1e8)


class TestPrimeSums:
    def lad(self):
        return ladder_from_cutoffs(3, [100, 1000], t=20.0)

    def test_zero_height(self, table):
        lad = self.lad()
        ps = primes_between(3, 100).astype(float)
        sig = lad.sigma
        assert dz.s_ell(0.0, 1, lad, table)[0] == pytest.approx(np.sum(ps**-sig + ps ** (-2 * sig) / 2), rel=1e-13)

    def test_empty_range(self, table):
        lad = ladder_from_cutoffs(24, [28.5], t=20.0)
        assert dz.s_ell(5.0, 1, lad, table)[0] == 0.0

    def test_phase_wrap(self, table):
        lad = ladder_from_cutoffs(3, [6], t=20.0)
        tau = 2 * math.pi / math.log(5)
        sig = lad.sigma
        assert dz.s_ell(tau, 1, lad, table)[0] == pytest.approx(5**-sig + 5 ** (-2 * sig) / 2, rel=1e-12)

    def test_level_zero(self, table):
        assert dz.s_tilde([1.0, 2.0], 0, self.lad(), table).tolist() == [0, 0]


@settings(max_examples=25, deadline=None)
@given(tau=st.floats(-1e6, 1e6), sigma=st.floats(0.5, 2))
def test_real_part_of_s_tilde(tau, sigma):
    tab = PrimeTable(2000)
    lad = ladder_from_cutoffs(3, [100, 1000], t=20.0)
    st_ = dz.s_tilde(tau, 2, lad, tab, sigma)
    assert abs(st_.real[0] - dz.s_ell(tau, 2, lad, tab, sigma)[0]) < 1e-12


class TestM0:
    def test_no_primes(self, table):
        assert dz.m0_eval([0.0, 3.0], 0.5, table, 1.5).tolist() == [1, 1]

    def test_tau_zero(self, table):
        assert dz.m0_eval(0.0, 1.0, table, 3)[0] == pytest.approx(1 / 3, abs=1e-15)

    @pytest.mark.parametrize("T0", [5, 13, 30])
    def test_product_vs_mobius(self, table, T0):
        tau = np.random.default_rng(T0).uniform(1e4, 2e4, 1000)
        ps = table.between(0, T0)
        gap = np.abs(dz.m0_product(tau, 0.55, ps) - dz.m0_mobius_sum(tau, 0.55, ps))
        assert gap.max() < 1e-10
        dz.m0_eval(tau, 0.55, table, T0, check=True)

    @pytest.mark.parametrize("T", [1e5, 1e6])
    def test_product_vs_mobius_high(self, table, T):
        # both forms round tau * log m independently; the gap grows like tau * eps
        tau = np.random.default_rng(1).uniform(T, 2 * T, 1000)
        ps = table.between(0, 30)
        gap = np.abs(dz.m0_product(tau, 0.55, ps) - dz.m0_mobius_sum(tau, 0.55, ps))
        assert gap.max() < 1e-14 * 2 * T

    def test_cap(self):
        with pytest.raises(BudgetError):
            dz.smooth_squarefree(list(range(30)), cap=1000)


class TestSupport:
    def test_hand_enumeration(self):
        sup = dz.enumerate_support([5, 7], cap=2)
        assert sup.as_dict() == {1: 1, 5: -1, 7: -1, 35: 1}

    def test_zero_cap(self):
        assert dz.enumerate_support([5, 7], cap=0).as_dict() == {1: 1}

    def test_cap_one(self):
        assert dz.enumerate_support([5, 7], cap=1).as_dict() == {1: 1, 5: -1, 7: -1}

    def test_trivial_eval(self):
        sup = dz.enumerate_support([], cap=3)
        assert dz.mollifier_eval([0.0, 7.0], sup, 0.5) == pytest.approx([1.0, 1.0])

    def test_rational_value(self):
        val = dz.mollifier_eval(0.0, dz.enumerate_support([5, 7], cap=2), 1.0)[0]
        assert val.real == pytest.approx(float(Fraction(24, 35)), abs=1e-15)

    def test_uncapped_is_euler_product(self):
        ps = primes_between(10, 60)
        sup = dz.enumerate_support(ps, cap=ps.size)
        val = dz.mollifier_eval(0.0, sup, 0.6)[0]
        assert abs(val - np.prod(1 - ps.astype(float) ** -0.6)) < 1e-12

    def test_support_invariants(self, table):
        lad = ladder_from_cutoffs(10, [40], t=20.0)
        sup = dz.mollifier_support(1, lad, table)
        ps = set(primes_between(10, 40).tolist())
        for m, mob in sup.entries:
            factors = [p for p in ps if m % p == 0]
            assert math.prod(factors) == m  # squarefree over the interval
            assert mob == (-1) ** len(factors)
            assert len(factors) <= lad.mu_cap(1)

    def test_entry_cap(self):
        with pytest.raises(BudgetError):
            dz.enumerate_support(primes_up_to(200), cap=10, max_entries=1000)


@settings(max_examples=20, deadline=None)
@given(cap=st.integers(0, 6), tau=st.floats(0, 1e5), sigma=st.floats(0.5, 1.0))
def test_capped_recursion_matches_enumeration(cap, tau, sigma):
    ps = primes_between(10, 50)
    direct = dz.mollifier_eval(tau, dz.enumerate_support(ps, cap), sigma)
    rec = dz.capped_mollifier(tau, ps, cap, sigma)
    assert abs(direct[0] - rec[0]) < 1e-12 * (1 + tau / 1e3)


class TestResidual:
    def test_empty_interval(self, table):
        lad = ladder_from_cutoffs(24, [28.5], t=20.0)
        rep = dz.molli_residual(np.array([0.0, 10.0]), 1, lad, table)
        assert np.allclose(rep.residual, 0.0, atol=1e-15) and rep.violations == 0

    def test_tau_zero_direct(self, table):
        lad = ladder_from_cutoffs(100, [300], t=20.0)
        rep = dz.molli_residual(np.array([0.0]), 1, lad, table)
        ps = primes_between(100, 300).astype(float)
        sig = lad.sigma
        direct = abs(np.prod(1 - ps**-sig)) - math.exp(-np.sum(ps**-sig + ps ** (-2 * sig) / 2))
        assert rep.residual[0] == pytest.approx(direct, abs=1e-13)
        assert abs(rep.residual[0]) <= rep.envelope[0]

    def test_random_heights(self, table):
        lad = ladder_from_cutoffs(100, [1000], t=math.log(math.log(1e6)))
        tau = dz.sample_tau(1e6, 100, seed=1)
        rep = dz.molli_residual(tau, 1, lad, table)
        assert rep.checked > 0 and rep.violations == 0


class TestMeanValue:
    def test_unit_coefficient(self):
        rep = dz.mean_value_check([1.0], 1e4, 200, seed=1)
        assert rep["mc"] == pytest.approx(1.0, abs=1e-12) and rep["se"] == pytest.approx(0.0, abs=1e-12)

    def test_single_support(self):
        coeffs = np.zeros(7, dtype=complex)
        coeffs[6] = 0.3 - 0.4j
        rep = dz.mean_value_check(coeffs, 1e4, 300, seed=1)
        assert rep["mc"] == pytest.approx(0.25, abs=1e-12)

    def test_flat_coefficients(self):
        rep = dz.mean_value_check(np.ones(100), 1e6, 3000, seed=2)
        assert rep["rhs"] == 100.0 and rep["passed"]

    def test_too_long(self):
        with pytest.raises(ConfigError):
            dz.mean_value_check(np.ones(200), 1000, 100, seed=1)


class TestGoodEvent:
    def lad(self):
        return ladder_from_cutoffs(10, [100, 1000], t=20.0)

    def test_tail_certain(self):
        est = dz.empirical_tail(0.5, -1e10, 1e4, 200, seed=1)
        assert est.p_hat == 1.0

    def test_half_at_zero(self):
        est = dz.empirical_tail(0.5, 0.0, 1e5, 2000, seed=3)
        assert abs(est.p_hat - 0.5) < 5 * est.std_err

    def test_window_failure_identified(self, table):
        lad = self.lad()
        tau = np.linspace(1e4, 1e4 + 50, 400)
        rep = dz.good_event(tau, 0.0, lad, table)
        m2 = np.exp(-2 * rep.m0_log)
        high = np.flatnonzero(m2 > lad.first_barrier()[1])
        assert high.size > 0
        i = high[0]
        assert not rep.verdict[i] and rep.failing_clause(i) == "first window"

    def test_verdict_is_conjunction(self, table):
        lad = self.lad()
        rep = dz.good_event(dz.sample_tau(1e5, 500, seed=4), -5.0, lad, table)
        expected = rep.window_ok & rep.barrier_ok.all(axis=1) & rep.exceed
        assert np.array_equal(rep.verdict, expected)
        for i in np.flatnonzero(rep.verdict):
            assert rep.failing_clause(i) is None

    def test_small_n(self):
        with pytest.raises(ConfigError):
            dz.empirical_tail(0.5, 0.0, 1e4, 50, seed=1)


class TestExperiments:
    def test_moment_k0(self):
        rep = dz.moments_experiment(1e4, 0.0, 200, seed=1)
        assert rep["moment"] == 1.0

    def test_inverse_truncation_decreasing(self):
        rep = dz.inverse_truncation_check(1e4, [10, 100, 1000], 300, seed=2, sigma=0.7)
        assert rep["decreasing"]

    def test_mollification_sweep(self, table):
        lad = ladder_from_cutoffs(100, [1000], t=math.log(math.log(1e5)))
        rep = dz.mollification_check(lad, 300, seed=1, T=1e5, table=table)
        assert rep["finite"] and rep["nonincreasing"]

    def test_mollification_small_n_reports_se(self, table):
        lad = ladder_from_cutoffs(100, [1000], t=math.log(math.log(1e5)))
        rep = dz.mollification_check(lad, 100, seed=1, T=1e5, table=table)
        assert all(r["se"] > 0 for r in rep["rows"])

    def test_tau_sampling_reproducible(self):
        a, b = dz.sample_tau(1e5, 5000, 3), dz.sample_tau(1e5, 5000, 3, workers=2)
        assert np.array_equal(a, b) and a.min() >= 1e5 and a.max() <= 2e5
