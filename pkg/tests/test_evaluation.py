from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import match
from oracles import kendall_bruteforce, t_two_sided_quad
from leaguecast.dataset import Outcome
from leaguecast.evaluation import (
    betainc,
    brier_score,
    kendall_tau,
    make_record,
    mean_brier,
    paired_records_test,
    paired_t_test,
    significance_code,
    t_cdf,
    t_ppf,
)
from leaguecast.probit import OutcomeForecast


# --------------------------------------------------------------------------
# Brier


def test_brier_perfect():
    assert brier_score((1.0, 0.0, 0.0), Outcome.HOME_WIN) == 0.0


@pytest.mark.parametrize("outcome", list(Outcome))
def test_brier_uniform(outcome):
    assert brier_score((1 / 3, 1 / 3, 1 / 3), outcome) == pytest.approx(2 / 9, abs=1e-15)


def test_brier_hand_example():
    assert brier_score(OutcomeForecast(0.5, 0.3, 0.2), Outcome.DRAW) == pytest.approx(0.26, abs=1e-15)


def test_brier_worst_case():
    assert brier_score((0.0, 0.0, 1.0), Outcome.HOME_WIN) == pytest.approx(2 / 3)


def test_mean_brier():
    assert mean_brier([0.0, 0.0]) == 0.0
    assert mean_brier([0.0, 2 / 3]) == pytest.approx(1 / 3)
    with pytest.raises(ValueError):
        mean_brier([])


def test_make_record_uses_home_outcome():
    rec = make_record(match("A", "B", 0, 2), "x", OutcomeForecast(0.2, 0.3, 0.5))
    assert rec.outcome is Outcome.AWAY_WIN
    assert rec.score == pytest.approx((0.04 + 0.09 + 0.25) / 3)


# --------------------------------------------------------------------------
# Kendall


def test_kendall_identity_and_reversal():
    items = list(range(5))
    assert kendall_tau(items, items) == 1.0
    assert kendall_tau(items[::-1], items) == -1.0


def test_kendall_hand_example():
    assert kendall_tau([1, 2, 3], [2, 1, 3]) == pytest.approx(1 / 3)


def test_kendall_large_against_bruteforce():
    rng = np.random.default_rng(0)
    items = [f"t{i}" for i in range(1000)]
    perm = [items[i] for i in rng.permutation(1000)]
    assert kendall_tau(perm, items) == pytest.approx(kendall_bruteforce(perm, items), abs=1e-15)
    assert kendall_tau(items, items) == 1.0
    assert kendall_tau(items[::-1], items) == -1.0


@settings(max_examples=100, deadline=None)
@given(st.permutations(list(range(12))))
def test_kendall_matches_bruteforce(perm):
    ref = list(range(12))
    assert kendall_tau(perm, ref) == pytest.approx(kendall_bruteforce(perm, ref), abs=1e-15)
    assert kendall_tau(perm, ref) == pytest.approx(kendall_tau(ref, perm), abs=1e-15)


def test_kendall_rejects_mismatched_sets():
    with pytest.raises(ValueError):
        kendall_tau(["a", "b"], ["a", "c"])


def test_kendall_league_one_fixture():
    from league_one_2023 import OFFICIAL, TIME_COLLEY_RANKING, TM_MASSEY_RANKING

    # Exact values from the pair-enumeration oracle: 61/138 and 1/3.
    assert kendall_tau(TM_MASSEY_RANKING, OFFICIAL) == pytest.approx(61 / 138, abs=1e-15)
    assert kendall_tau(TIME_COLLEY_RANKING, OFFICIAL) == pytest.approx(1 / 3, abs=1e-15)
    assert kendall_tau(TM_MASSEY_RANKING, OFFICIAL) == pytest.approx(kendall_bruteforce(TM_MASSEY_RANKING, OFFICIAL))


# --------------------------------------------------------------------------
# Student t


def test_paired_t_example():
    res = paired_t_test([1.0, 2.0, 3.0], [0.0, 0.0, 0.0])
    assert res.t == pytest.approx(2 * math.sqrt(3), abs=1e-12)
    assert res.df == 2
    assert abs(res.t - 3.4641) < 1e-3
    assert abs(res.p_value - 0.0742) < 5e-4
    assert res.p_value == pytest.approx(t_two_sided_quad(res.t, 2), abs=1e-10)
    assert res.significance == "*"


@pytest.mark.parametrize("df", [1, 2, 5, 30, 200])
@pytest.mark.parametrize("t", [0.1, 1.0, 2.5, 6.0])
def test_t_tail_against_quadrature(t, df):
    assert 2 * (1 - t_cdf(t, df)) == pytest.approx(t_two_sided_quad(t, df), rel=1e-8, abs=1e-12)


def test_t_ppf_inverts_cdf():
    for df in (2, 10, 100):
        for q in (0.025, 0.5, 0.975):
            assert t_cdf(t_ppf(q, df), df) == pytest.approx(q, abs=1e-10)
    assert t_ppf(0.975, 2) == pytest.approx(4.302652729911275, abs=1e-8)


def test_betainc_symmetry():
    assert betainc(2.0, 3.0, 0.3) == pytest.approx(1 - betainc(3.0, 2.0, 0.7), abs=1e-14)
    assert betainc(1.0, 1.0, 0.42) == pytest.approx(0.42, abs=1e-14)


def test_paired_t_degenerate():
    res = paired_t_test([0.2, 0.3], [0.2, 0.3])
    assert res.degenerate and res.p_value == 1.0 and res.mean_diff == 0.0
    assert math.isnan(res.t)


def test_paired_t_confidence_interval_contains_mean():
    rng = np.random.default_rng(1)
    a, b = rng.random(50), rng.random(50)
    res = paired_t_test(a, b)
    lo, hi = res.confidence_interval(0.95)
    assert lo < res.mean_diff < hi
    # The interval excludes zero exactly when p < 0.05.
    assert (lo > 0 or hi < 0) == (res.p_value < 0.05)


def test_paired_records_require_alignment():
    m1, m2 = match("A", "B", 1, 0), match("B", "A", 1, 0, 7)
    f = OutcomeForecast(0.5, 0.3, 0.2)
    with pytest.raises(ValueError, match="aligned"):
        paired_records_test([make_record(m1, "x", f)], [make_record(m2, "y", f)])


def test_significance_codes():
    assert [significance_code(p) for p in (0.005, 0.03, 0.07, 0.2)] == ["***", "**", "*", ""]
