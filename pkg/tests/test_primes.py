import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ldzeta.constants import euler_gamma
from ldzeta.errors import BudgetError, ConfigError
from ldzeta.params import ladder_from_cutoffs
from ldzeta.primes import (
    PrimeTable,
    mertens_product,
    mobius_up_to,
    prime_power_sum,
    primes_between,
    primes_up_to,
    variance_analytic,
    variance_vl,
)


def trial_division_primes(n):
    out = []
    for k in range(2, n + 1):
        if all(k % d for d in range(2, math.isqrt(k) + 1)):
            out.append(k)
    return out


def test_small_primes():
    assert primes_up_to(10).tolist() == [2, 3, 5, 7]
    assert primes_up_to(2).tolist() == [2]
    assert primes_up_to(1).size == 0


def test_pi_100_against_trial_division():
    assert primes_up_to(100).size == len(trial_division_primes(100)) == 25


def test_segmented_sieve_matches_trial_division_across_segments():
    # crosses the first segment boundary, with a brute-force oracle on a window
    ps = primes_up_to(2_200_000)
    lo, hi = 2_097_000, 2_098_500
    window = ps[(ps > lo) & (ps <= hi)].tolist()
    oracle = [k for k in range(lo + 1, hi + 1) if all(k % d for d in range(2, math.isqrt(k) + 1))]
    assert window == oracle
    assert ps.size == 162_662  # pi(2.2e6), frozen from an independent prime-counting run
    assert np.all(np.diff(ps) > 0)


def test_budget_env(monkeypatch):
    monkeypatch.setenv("LDZETA_SIEVE_LIMIT", "1000")
    with pytest.raises(BudgetError):
        primes_up_to(1001)


def test_reversed_interval():
    with pytest.raises(ConfigError):
        primes_between(10, 5)


def test_table_bounds():
    tab = PrimeTable(100)
    assert tab.between(3, 10).tolist() == [5, 7]
    with pytest.raises(BudgetError):
        tab.between(3, 101)


class TestPrimePowerSum:
    def test_empty(self):
        assert prime_power_sum(24, 28, [(1, 1)]) == 0.0

    def test_two_terms(self):
        assert prime_power_sum(1, 3, [(1, 1)]) == pytest.approx(1 / 2 + 1 / 3, abs=1e-15)

    def test_against_loop(self):
        sigma = 0.55429
        oracle = 0.0
        for p in trial_division_primes(100):
            if p > 3:
                oracle += 0.5 * p ** (-2 * sigma) + 0.125 * p ** (-4 * sigma)
        got = prime_power_sum(3, 100, [(0.5, 2 * sigma), (0.125, 4 * sigma)])
        assert got == pytest.approx(oracle, rel=1e-13)


@settings(max_examples=50, deadline=None)
@given(a=st.integers(0, 5000), b=st.integers(0, 5000), c=st.integers(0, 5000), s=st.floats(0.3, 2))
def test_prime_power_sum_additive(a, b, c, s):
    lo, mid, hi = sorted((a, b, c))
    terms = [(0.5, 2 * s), (0.125, 4 * s)]
    whole = prime_power_sum(lo, hi, terms)
    parts = prime_power_sum(lo, mid, terms) + prime_power_sum(mid, hi, terms)
    assert whole == pytest.approx(parts, abs=1e-12)


class TestVariance:
    def test_empty_level(self):
        lad = ladder_from_cutoffs(3, [3.5])
        assert variance_vl(1, lad).value == 0.0

    def test_large_sigma_vanishes(self):
        lad = ladder_from_cutoffs(3, [1e4])
        assert variance_vl(1, lad, sigma=40.0).value < 1e-50

    def test_exact_vs_analytic(self):
        lad = ladder_from_cutoffs(3, [1e4], delta=1.0)
        sigma = 0.5543
        rep = variance_vl(1, lad, sigma=sigma)
        oracle = math.fsum(0.5 * p ** (-2 * sigma) + 0.125 * p ** (-4 * sigma)
                           for p in trial_division_primes(10_000) if p > 3)
        assert rep.value == pytest.approx(oracle, rel=1e-12)
        assert rep.analytic == pytest.approx(variance_analytic(1, lad))
        # raw difference is reported, not bounded; it is modest at this scale
        assert abs(rep.difference) < 1.0
        assert not rep.surrogate

    def test_surrogate_past_budget(self):
        lad = ladder_from_cutoffs(10, [1e3])
        rep = variance_vl(1, lad, table=PrimeTable(500))
        assert rep.surrogate and rep.value == rep.analytic

    @pytest.mark.parametrize("T0", [3, 10, 100])
    def test_increasing_and_below_half_gap(self, T0):
        lad = ladder_from_cutoffs(T0, [1e3, 1e4, 1e5])
        for sigma in (None, 0.5):
            vals = [variance_vl(ell, lad, sigma=sigma).value for ell in range(1, 4)]
            assert all(b > a for a, b in zip(vals, vals[1:]))
            for ell, v in zip(range(1, 4), vals):
                assert v < 0.5 * (lad.level(ell) - lad.t0)


class TestMertens:
    def test_x2(self):
        assert mertens_product(2) == pytest.approx(math.log(2) / 2, abs=1e-15)

    def test_1e6_near_exp_minus_gamma(self):
        target = math.exp(-euler_gamma())
        v6 = mertens_product(10**6)
        assert abs(v6 - target) < 1e-3
        assert abs(v6 - target) < abs(mertens_product(10**3) - target)


def test_mobius_small():
    assert mobius_up_to(12).tolist() == [0, 1, -1, -1, 0, -1, 1, -1, 0, 0, 1, -1, 0]
