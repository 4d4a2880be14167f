import math

import pytest
from hypothesis import given, settings, strategies as st

from ldzeta.errors import ConfigError, DomainError, InfeasibleError
from ldzeta.params import (
    LadderConfig,
    build_ladder,
    derive_exponent,
    exponent_condition_gap,
    iterated_log,
    ladder_from_cutoffs,
    toy_ladder,
    validation_report,
)


def explicit(t0, levels, t=None, alpha=1.0, s=2.0, delta=1.0):
    return build_ladder(LadderConfig(t=t, alpha=alpha, delta=delta, s_exponent=s,
                                     explicit_t0=t0, explicit_levels=tuple(levels)))


class TestIteratedLog:
    def test_zero_iterations(self):
        assert iterated_log(5.0, 0) == 5.0

    def test_log_e(self):
        assert iterated_log(math.e, 1) == pytest.approx(1.0, abs=1e-15)

    def test_double_log(self):
        assert iterated_log(math.e**math.e, 2) == pytest.approx(1.0, abs=1e-14)

    def test_nonpositive_raises(self):
        with pytest.raises(DomainError):
            iterated_log(0.5, 2)


class TestFromT:
    def test_depth_at_1e8(self):
        # log log 1e8 ~ 2.91 > e while log log log 1e8 ~ 1.07 < e
        assert iterated_log(1e8, 2) == pytest.approx(2.9135, abs=1e-4)
        assert iterated_log(1e8, 3) == pytest.approx(1.0694, abs=1e-4)
        lad = build_ladder(LadderConfig(T=1e8, s_exponent=2.0))
        assert lad.L == 1

    def test_sigma_at_1e8_in_the_flat_limit(self):
        # t_L -> t as the exponent shrinks, so log T_L -> log T
        lad = build_ladder(LadderConfig(T=1e8, delta=1.0, s_exponent=1e-9))
        assert lad.sigma == pytest.approx(0.5 + 1 / math.log(1e8), abs=1e-8)
        assert lad.sigma == pytest.approx(0.55429, abs=1e-5)

    def test_derived_exponent_infeasible_at_desk_T(self):
        with pytest.raises(InfeasibleError):
            build_ladder(LadderConfig(T=1e8))

    def test_T_above_desk_limit(self):
        with pytest.raises(ConfigError):
            build_ladder(LadderConfig(T=1e20, s_exponent=1.0))

    @pytest.mark.parametrize("T", [1e6, 1e8, 1e12, 1e15])
    def test_depth_window(self, T):
        try:
            lad = build_ladder(LadderConfig(T=T, s_exponent=0.01))
        except ConfigError:
            pytest.skip("no level at this T")
        L = lad.L
        assert math.e < iterated_log(T, L + 1) <= math.e**2
        assert 1 < iterated_log(T, L + 2) <= math.e


class TestFromT_tMode:
    def test_derived_exponent_satisfies_condition(self):
        lad = build_ladder(LadderConfig(t=1e6))
        assert "exponent derived" in lad.notes
        assert exponent_condition_gap(lad.s, lad.t, lad.L, lad.alpha) > 0
        # smallest on the growing branch: a touch less breaks it
        assert exponent_condition_gap(lad.s * (1 - 1e-6), lad.t, lad.L, lad.alpha) <= 1e-3

    def test_nonpositive_scale(self):
        with pytest.raises(InfeasibleError):
            derive_exponent(1.5, 2, 1.0)


class TestExplicit:
    def test_mu_unit_gaps(self):
        lad = explicit(1.0, [2.0, 3.0], alpha=1.0)
        assert lad.mu(1) == 100.0 and lad.mu(2) == 100.0

    def test_nonincreasing_rejected(self):
        with pytest.raises(ConfigError):
            explicit(1.0, [3.0, 2.0])

    def test_levels_past_t_rejected(self):
        with pytest.raises(ConfigError):
            explicit(1.0, [2.0, 3.0], t=2.5)

    def test_cutoffs_roundtrip(self):
        lad = ladder_from_cutoffs(100, [1000, 1e5])
        assert lad.T0 == pytest.approx(100, rel=1e-12)
        assert lad.cutoff(2) == pytest.approx(1e5, rel=1e-10)

    def test_index_checks(self):
        lad = explicit(1.0, [2.0])
        with pytest.raises(DomainError):
            lad.mu(0)
        with pytest.raises(DomainError):
            lad.level(2)

    def test_bad_alpha(self):
        with pytest.raises(ConfigError):
            LadderConfig(t=10, alpha=0)


class TestSlopeAndBarriers:
    def lad(self, alpha=1.0, s=2.0):
        return explicit(1.0, [5.0, 9.0], t=10.0, alpha=alpha, s=s)

    def test_slope_zero_at_alpha_t(self):
        lad = self.lad()
        assert lad.slope(lad.alpha * lad.t) == 0.0

    def test_slope_alpha_after_cancellation(self):
        lad = self.lad(alpha=2.0)
        z = lad.alpha * lad.t - lad.alpha * (lad.levels[-1] - lad.t0)
        assert lad.slope(z) == pytest.approx(lad.alpha, abs=1e-14)

    def test_slope_hand_value(self):
        assert self.lad(alpha=2.0).slope(3.0) == pytest.approx(2.125, abs=1e-15)

    def test_barrier_width(self):
        lad = self.lad()
        lo, hi = lad.barrier(1, 0.5)
        B, C = lad.upper_barrier_constant, lad.lower_barrier_constant
        assert hi - lo == pytest.approx((B + C) * math.log(10.0), rel=1e-14)

    def test_barrier_at_zero_slope(self):
        lad = self.lad()
        lo, hi = lad.barrier(2, lad.alpha * lad.t)
        w = math.log(math.log(10.0))
        assert lo == pytest.approx(-lad.lower_barrier_constant * w)
        assert hi == pytest.approx(lad.upper_barrier_constant * w)

    def test_toy_barrier_by_hand(self):
        # t=10, t0=1, t_L=9, alpha=1, s=2, level 1 at t_1=5, base z=1
        lad = self.lad()
        m = (10 - 1) / (9 - 1)
        B = 1 * 2 + 1 / 1
        lo, hi = lad.barrier(1, 1.0)
        assert lo == pytest.approx(m * 4 - 100 * math.log(10))
        assert hi == pytest.approx(m * 4 + B * math.log(10))

    def test_barrier_requires_positive_width(self):
        lad = explicit(0.1, [0.5, 0.8, 0.9], t=2.0)
        with pytest.raises(DomainError):
            lad.barrier(2, 0.0)


class TestFirstBarrier:
    def lad(self, t0, alpha):
        return explicit(t0, [t0 + 1], alpha=alpha)

    def test_unit(self):
        lo, hi = self.lad(1.0, 1.0).first_barrier()
        assert lo == pytest.approx(math.exp(-2)) and hi == pytest.approx(1.0)

    def test_t0_4(self):
        lo, hi = self.lad(4.0, 0.5).first_barrier()
        assert lo == pytest.approx(math.exp(-4)) and hi == pytest.approx(1.0)


class TestToyLadder:
    def test_default_levels(self):
        lad = toy_ladder()
        assert lad.L == 3 and lad.t0 == 1.5
        assert lad.levels[0] == pytest.approx(20 - 2 * math.log(20))

    def test_validation_report_keys(self):
        rep = validation_report(toy_ladder())
        assert {"exponent_condition", "short_mollifier", "levels_increasing"} <= set(rep)
        assert rep["levels_increasing"]["holds"]


@settings(max_examples=60, deadline=None)
@given(t=st.floats(20, 1e12), alpha=st.floats(0.1, 3), delta=st.floats(0.1, 5))
def test_t_mode_invariants(t, alpha, delta):
    try:
        lad = build_ladder(LadderConfig(t=t, alpha=alpha, delta=delta))
    except InfeasibleError:
        return
    seq = lad.all_levels
    assert all(b > a for a, b in zip(seq, seq[1:])) and seq[-1] < t
    # the offset delta e^{-t_L} underflows double precision once t_L is large
    assert lad.sigma > 0.5 or lad.levels[-1] - math.log(lad.delta) > 36
    for ell in range(1, lad.L + 1):
        assert lad.mu(ell) > 0 and lad.nu(ell) > 0 and lad.log_Delta(ell) > -math.inf


@settings(max_examples=40, deadline=None)
@given(t=st.floats(1e3, 1e9), z1=st.floats(-50, 50), z2=st.floats(-50, 50))
def test_slope_affine_decreasing(t, z1, z2):
    lad = toy_ladder(t=t)
    if abs(z1 - z2) < 1e-6:
        return
    m1, m2 = lad.slope(z1), lad.slope(z2)
    assert (m1 - m2) * (z1 - z2) < 0
    mid = lad.slope(0.5 * (z1 + z2))
    assert mid == pytest.approx(0.5 * (m1 + m2), rel=1e-9, abs=1e-9)
    # exact value of the slope at the typical start
    expected = lad.alpha * (lad.t - lad.t0) / (lad.levels[-1] - lad.t0)
    assert lad.slope(lad.alpha * lad.t0) == pytest.approx(expected, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(d1=st.floats(0.1, 5), gap=st.floats(1, 20))
def test_sigma_decreasing_in_top_level(d1, gap):
    a = explicit(1.0, [2.0, 2.0 + gap], delta=d1)
    b = explicit(1.0, [2.0, 3.0 + gap], delta=d1)
    assert b.sigma < a.sigma


def test_short_mollifier_length_on_derived_ladder():
    lad = build_ladder(LadderConfig(t=1e8))
    rep = validation_report(lad)
    assert rep["exponent_condition"]["holds"]
    assert rep["short_mollifier"]["holds"]
