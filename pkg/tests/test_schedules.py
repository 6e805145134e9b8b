from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fmab.errors import ConfigError
from fmab.schedules import (
    BEYOND_HORIZON,
    FKind,
    GKind,
    Schedule,
    eval_f,
    eval_g,
    fed1_condition,
    fed2_condition,
    phase_stats,
    phase_threshold_fed1,
    phase_threshold_fed2,
)

E = math.e


# ---------------------------------------------------------------- oracles


def oracle_f(kind: str, kappa: float, T: float, q: int) -> int:
    """Pull schedule written out from its definition, one case per kind."""
    if kind == "constant":
        return int(kappa)
    if kind == "ceil_log":
        return math.ceil(kappa * math.log(T))
    if kind == "pow2":
        return 2**q
    return math.ceil(2**q * math.log(T))


def oracle_g(kind: str, lam: float, T: float, q: int) -> int:
    if kind == "once":
        return math.ceil(lam) if q == 1 else 0
    return oracle_f(kind, lam, T, q)


def oracle_stats(f_kind, kappa, g_kind, lam, T, p):
    """``F(p)``, ``M(p)`` and ``eta_p`` as exact fractions by direct double summation."""
    f = [oracle_f(f_kind, kappa, T, q) for q in range(1, p + 1)]
    g = [oracle_g(g_kind, lam, T, q) for q in range(1, p + 1)]
    F = [sum(f[:q]) for q in range(p + 1)]  # F[0] = 0
    M = sum(g)
    eta = sum(Fraction(g[q - 1], F[p] - F[q - 1]) for q in range(1, p + 1)) / Fraction(M) ** 2
    return F[p], M, eta


F_CASES = [("constant", 1), ("constant", 7), ("ceil_log", 1.0), ("ceil_log", 2.5), ("pow2", 1), ("ceil_pow2_log", 1)]
G_CASES = [("constant", 3), ("ceil_log", 0.5), ("pow2", 1), ("ceil_pow2_log", 1), ("once", 5)]
FED2_GRID = list(itertools.product(F_CASES, G_CASES, [1, 3, 8], [1e4, 2e5]))
FED1_GRID = list(itertools.product(F_CASES, [1, 3, 8], [1, 5, 12], [1e4, 2e5]))


def test_grid_has_at_least_200_cases():
    assert len(FED2_GRID) + len(FED1_GRID) >= 200


@pytest.mark.parametrize("fc,gc,p,T", FED2_GRID)
def test_fed2_stats_match_double_sum(fc, gc, p, T):
    sigma, sigma_c = 0.5, 0.03
    s = Schedule(fc[0], T, fc[1], gc[0], gc[1])
    F, M, eta = oracle_stats(fc[0], fc[1], gc[0], gc[1], T, p)
    st_ = phase_stats(s, p, sigma, sigma_c)
    assert st_.F_p == F
    assert st_.M_p == M
    assert st_.eta_p == pytest.approx(float(eta), rel=1e-12, abs=0)
    b2 = math.sqrt(6 * sigma**2 * float(eta) * math.log(T)) + math.sqrt(6 * sigma_c**2 * math.log(T) / M)
    assert st_.B_p2 == pytest.approx(b2, rel=1e-12, abs=0)
    assert st_.B_p1 is None


@pytest.mark.parametrize("fc,p,M,T", FED1_GRID)
def test_fed1_stats_match_direct_sum(fc, p, M, T):
    s = Schedule(fc[0], T, fc[1])
    F = sum(oracle_f(fc[0], fc[1], T, q) for q in range(1, p + 1))
    st_ = phase_stats(s, p, 0.5, n_clients=M)
    assert st_.F_p == F and st_.M_p == M
    assert st_.eta_p == pytest.approx(float(Fraction(1, M * F)), rel=1e-12, abs=0)
    assert st_.B_p1 == pytest.approx(math.sqrt(6 * 0.25 * math.log(T) / (M * F)), rel=1e-12, abs=0)
    assert st_.B_p2 is None


@pytest.mark.parametrize("kind", [k.value for k in FKind])
def test_cumulative_f_to_phase_40(kind):
    s = Schedule(kind, 1e5, 3)
    direct = 0
    for p in range(1, 41):
        direct += oracle_f(kind, 3, 1e5, p)
        assert s.cumulative_f(p) == direct
        assert eval_f(s, p) == oracle_f(kind, 3, 1e5, p)


@pytest.mark.parametrize("kind", [k.value for k in GKind if k is not GKind.NONE])
def test_cumulative_g_to_phase_40(kind):
    s = Schedule("constant", 1e5, 1, kind, 2)
    direct = 0
    for p in range(1, 41):
        direct += oracle_g(kind, 2, 1e5, p)
        assert s.cumulative_g(p) == direct
        assert eval_g(s, p) == oracle_g(kind, 2, 1e5, p)


# ---------------------------------------------------------------- documented examples


def test_eval_examples():
    assert eval_f(Schedule("constant", 1e5, 100), 7) == 100
    assert eval_f(Schedule("pow2", 1e5), 1) == 2
    assert eval_f(Schedule("ceil_log", E**3, 10), 1) == 30
    assert eval_g(Schedule("constant", 1e5, 1, "pow2"), 3) == 8
    assert eval_g(Schedule("constant", 1e5, 1, "constant", 5), 9) == 5
    assert eval_g(Schedule("constant", E**2, 1, "ceil_log", 1), 4) == 2


def test_eta_example_two_groups():
    s = Schedule("constant", 1e4, 10, "pow2")
    st_ = phase_stats(s, 2, 1.0)
    assert (st_.F_p, st_.M_p) == (20, 6)
    assert st_.eta_p == pytest.approx(1 / 72, rel=1e-15)


def test_fed1_radius_unit_example():
    st_ = phase_stats(Schedule("constant", E, 1), 1, 1.0, n_clients=6)
    assert st_.B_p1 == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize("M,f,p", [(1, 1, 1), (6, 10, 3), (40, 123, 17)])
def test_single_group_degenerates_to_fed1(M, f, p):
    fed2 = phase_stats(Schedule("constant", 2e5, f, "once", M), p, 0.5, sigma_c=0.0)
    fed1 = phase_stats(Schedule("constant", 2e5, f), p, 0.5, n_clients=M)
    assert fed2.eta_p == pytest.approx(1 / (M * fed2.F_p), rel=1e-12)
    assert fed2.B_p2 == pytest.approx(fed1.B_p1, rel=1e-12)


def test_errors():
    with pytest.raises(ConfigError):
        eval_f(Schedule("pow2", 1e4), 0)
    with pytest.raises(ConfigError):
        Schedule("pow2", 1.5)
    with pytest.raises(ConfigError, match="Fed1-UCB schedule"):
        eval_g(Schedule("pow2", 1e4), 1)
    with pytest.raises(ConfigError):
        Schedule("constant", 1e4, 2.5)
    with pytest.raises(ConfigError):
        phase_stats(Schedule("pow2", 1e4, 1, "constant", 0), 1, 0.5)  # M_1 = 0
    with pytest.raises(ConfigError):
        phase_stats(Schedule("pow2", 1e4, 1, "pow2"), 1, 0.5, n_clients=3)


# ---------------------------------------------------------------- thresholds


def test_fed1_threshold_constructed_equality():
    assert phase_threshold_fed1(1, Schedule("constant", E, 1), math.sqrt(1 / 96), 1.0) == 1


def test_fed1_threshold_ceil_log_row():
    T = 1e6
    s = Schedule("ceil_log", T, 10)
    p = phase_threshold_fed1(5, s, 0.5, 0.02)
    f = math.ceil(10 * math.log(T))  # 139
    # exact closed form for a constant integer f
    assert p == math.ceil(96 * 0.25 * math.log(T) / (5 * f * 0.02**2))
    # the ceiling-free expression 96 sigma^2 ln T / (M kappa ln T Delta^2) gives 1200; the integer f can only make p smaller
    assert p <= 1200 and p >= 0.99 * 1200


def test_fed1_threshold_halves_when_m_doubles():
    s = Schedule("constant", 1e9, 7)
    for M in (1, 3, 8):
        a = phase_threshold_fed1(M, s, 0.5, 0.02)
        b = phase_threshold_fed1(2 * M, s, 0.5, 0.02)
        assert b == math.ceil(a / 2) or b == math.ceil(a / 2) - 1 or b == a // 2


def test_fed2_threshold_pinned():
    s = Schedule("constant", 1e6, 100, "pow2")
    assert phase_threshold_fed2(s, 0.5, 0.02, 0.02) == 13


def test_fed2_threshold_matches_fed1_when_no_client_sampling():
    for M, f, gap in [(5, 123, 0.02), (1, 10, 0.1), (17, 3, 0.05)]:
        fed2 = phase_threshold_fed2(Schedule("constant", 2e5, f, "once", M), 0.5, 0.0, gap)
        fed1 = phase_threshold_fed1(M, Schedule("constant", 2e5, f), 0.5, gap)
        assert fed2 == fed1


def test_threshold_beyond_horizon():
    s = Schedule("constant", 1000, 100, "pow2")
    assert phase_threshold_fed2(s, 0.5, 0.02, 0.001, n_arms=10) == BEYOND_HORIZON
    assert phase_threshold_fed1(1, Schedule("constant", 1000, 100), 0.5, 0.001, n_arms=10) == BEYOND_HORIZON


def _fitting_phases(s, n_arms, cap=400):
    used, p = 0, 0
    while p < cap and used + n_arms * eval_f(s, p + 1) <= s.horizon:
        p += 1
        used += n_arms * eval_f(s, p)
    return p


def _linear_scan_fed2(s, sigma, sigma_c, gap, limit):
    for p in range(1, limit + 1):
        if s.cumulative_g(p) >= 1 and fed2_condition(phase_stats(s, p, sigma, sigma_c), sigma, sigma_c, s.log_t, gap):
            return p
    return BEYOND_HORIZON


schedules = st.builds(
    Schedule,
    f_kind=st.sampled_from(["constant", "ceil_log", "pow2", "ceil_pow2_log"]),
    horizon=st.sampled_from([1e3, 1e4, 2e5, 1e6]),
    kappa=st.integers(1, 50).map(float),
    g_kind=st.sampled_from(["constant", "ceil_log", "pow2", "ceil_pow2_log", "once"]),
    lam=st.integers(1, 20).map(float),
)


@settings(max_examples=150, deadline=None)
@given(s=schedules, sigma=st.floats(0.05, 1.0), sigma_c=st.floats(0.0, 0.2), gap=st.floats(0.01, 0.5))
def test_fed2_threshold_equals_linear_scan(s, sigma, sigma_c, gap):
    p = phase_threshold_fed2(s, sigma, sigma_c, gap, n_arms=5)
    limit = _fitting_phases(s, 5)
    want = _linear_scan_fed2(s, sigma, sigma_c, gap, limit)
    if limit < 400 or want is not BEYOND_HORIZON:
        assert p == want


@settings(max_examples=100, deadline=None)
@given(s=schedules, sigma=st.floats(0.05, 1.0), sigma_c=st.floats(0.0, 0.2), gap=st.floats(0.01, 0.5))
def test_threshold_predicate_boundary(s, sigma, sigma_c, gap):
    p = phase_threshold_fed2(s, sigma, sigma_c, gap)
    if p is BEYOND_HORIZON:
        return
    cond = lambda q: fed2_condition(phase_stats(s, q, sigma, sigma_c), sigma, sigma_c, s.log_t, gap)  # noqa: E731
    assert cond(p)
    if p > 1:
        assert not cond(p - 1)


@settings(max_examples=100, deadline=None)
@given(
    f_kind=st.sampled_from(["constant", "ceil_log", "pow2"]),
    kappa=st.integers(1, 30),
    M=st.integers(1, 50),
    g1=st.floats(0.005, 0.3),
    g2=st.floats(0.005, 0.3),
)
def test_threshold_non_increasing_in_gap(f_kind, kappa, M, g1, g2):
    lo, hi = sorted((g1, g2))
    s1 = Schedule(f_kind, 1e6, kappa)
    assert phase_threshold_fed1(M, s1, 0.5, hi) <= phase_threshold_fed1(M, s1, 0.5, lo)
    s2 = Schedule(f_kind, 1e6, kappa, "pow2")
    assert phase_threshold_fed2(s2, 0.5, 0.02, hi) <= phase_threshold_fed2(s2, 0.5, 0.02, lo)


@settings(max_examples=100, deadline=None)
@given(s=schedules, sigma=st.floats(0.05, 1.0), sigma_c=st.floats(0.0, 0.2))
def test_radii_strictly_decreasing(s, sigma, sigma_c):
    b = [phase_stats(s, p, sigma, sigma_c).B_p2 for p in range(1, 13)]
    assert np.all(np.diff(b) < 0)
    s1 = Schedule(s.f_kind, s.horizon, s.kappa)
    b1 = [phase_stats(s1, p, sigma, n_clients=4).B_p1 for p in range(1, 13)]
    assert np.all(np.diff(b1) < 0)


@settings(max_examples=100, deadline=None)
@given(s=schedules)
def test_f_increasing_m_non_decreasing(s):
    F = [s.cumulative_f(p) for p in range(0, 20)]
    M = [s.cumulative_g(p) for p in range(0, 20)]
    assert np.all(np.diff(F) > 0)
    assert np.all(np.diff(M) >= 0)


def test_fed1_condition_is_eq10():
    assert fed1_condition(5, 1200 * 139, 0.5, math.log(1e6), 0.02)
    assert not fed1_condition(5, 1000 * 139, 0.5, math.log(1e6), 0.02)
