"""Brier scores, Kendall's tau and paired t-tests."""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass

from .dataset import Outcome
from .probit import OutcomeForecast


@dataclass(frozen=True)
class BrierRecord:
    match_id: str
    league: str
    season: int
    model: str
    p_win: float
    p_draw: float
    p_loss: float
    outcome: Outcome
    score: float
    substituted: bool = False


def brier_score(forecast: OutcomeForecast | Sequence[float], outcome: Outcome) -> float:
    """Mean squared error over the three outcomes; 0 is perfect, 2/3 the worst."""
    p = forecast.as_tuple() if isinstance(forecast, OutcomeForecast) else tuple(forecast)
    w, d, l = Outcome(outcome).indicators
    return ((p[0] - w) ** 2 + (p[1] - d) ** 2 + (p[2] - l) ** 2) / 3.0


def make_record(match, model: str, forecast: OutcomeForecast, substituted: bool = False) -> BrierRecord:
    outcome = match.outcome
    return BrierRecord(match.match_id, match.league, match.season, model,
                       forecast.p_win, forecast.p_draw, forecast.p_loss, outcome,
                       brier_score(forecast, outcome), substituted)


def mean_brier(records: Sequence[BrierRecord | float]) -> float:
    if not records:
        raise ValueError("mean Brier score of no records")
    scores = [r.score if isinstance(r, BrierRecord) else float(r) for r in records]
    return math.fsum(scores) / len(scores)


# --------------------------------------------------------------------------
# Kendall's tau


def _count_inversions(seq: list[int]) -> int:
    """Number of pairs i < j with seq[i] > seq[j], by merge sort."""
    n = len(seq)
    if n < 2:
        return 0
    buf = list(seq)
    tmp = [0] * n
    inversions = 0
    width = 1
    while width < n:
        for lo in range(0, n, 2 * width):
            mid = min(lo + width, n)
            hi = min(lo + 2 * width, n)
            i, j, k = lo, mid, lo
            while i < mid and j < hi:
                if buf[i] <= buf[j]:
                    tmp[k] = buf[i]
                    i += 1
                else:
                    tmp[k] = buf[j]
                    inversions += mid - i
                    j += 1
                k += 1
            tmp[k:k + mid - i] = buf[i:mid]
            k += mid - i
            tmp[k:k + hi - j] = buf[j:hi]
        buf, tmp = tmp, buf
        width *= 2
    return inversions


def kendall_tau(predicted: Sequence, actual: Sequence) -> float:
    """(n_c - n_d) / (n_c + n_d) between two tie-free rankings.

    Each argument lists the same items from first place to last.
    """
    if len(predicted) != len(actual) or set(predicted) != set(actual):
        raise ValueError("rankings must order the same items")
    if len(set(predicted)) != len(predicted):
        raise ValueError("rankings must not repeat items")
    n = len(predicted)
    if n < 2:
        raise ValueError("Kendall's tau needs at least two items")
    position = {item: i for i, item in enumerate(actual)}
    discordant = _count_inversions([position[item] for item in predicted])
    pairs = n * (n - 1) // 2
    return (pairs - 2 * discordant) / pairs


# --------------------------------------------------------------------------
# Student t distribution via the regularized incomplete beta function


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for I_x(a, b) by the modified Lentz method."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > tiny else tiny)
    h = d
    for m in range(1, 10_000):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-15:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x == 0.0 or x == 1.0:
        return x
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_sf_two_sided(t: float, df: float) -> float:
    """P(|T| >= |t|) for Student's t with ``df`` degrees of freedom."""
    if math.isinf(t):
        return 0.0
    t2 = t * t
    if t2 < df:
        # I_x(a, b) = 1 - I_{1-x}(b, a); forming 1 - x directly keeps precision near t = 0.
        return 1.0 - betainc(0.5, df / 2.0, t2 / (df + t2))
    return betainc(df / 2.0, 0.5, df / (df + t2))


def t_cdf(t: float, df: float) -> float:
    tail = 0.5 * t_sf_two_sided(t, df)
    return 1.0 - tail if t >= 0 else tail


def t_ppf(q: float, df: float) -> float:
    """Quantile of Student's t by bisection on :func:`t_cdf`."""
    if not 0.0 < q < 1.0:
        raise ValueError("q must lie in (0, 1)")
    lo, hi = -1.0, 1.0
    while t_cdf(lo, df) > q:
        lo *= 2.0
    while t_cdf(hi, df) < q:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if t_cdf(mid, df) < q:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-12 * max(1.0, abs(mid)):
            break
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class PairedTestResult:
    mean_diff: float
    t: float
    df: int
    p_value: float
    n: int
    std_err: float
    degenerate: bool = False

    def confidence_interval(self, level: float = 0.95) -> tuple[float, float]:
        if self.degenerate or self.n < 2:
            return (self.mean_diff, self.mean_diff)
        half = t_ppf(0.5 + level / 2.0, self.df) * self.std_err
        return (self.mean_diff - half, self.mean_diff + half)

    @property
    def significance(self) -> str:
        return significance_code(self.p_value)


def significance_code(p: float) -> str:
    """``***`` p < 0.01, ``**`` p < 0.05, ``*`` p < 0.1, empty otherwise."""
    if p < 0.01:
        return "***"
    if p < 0.05:
        return "**"
    if p < 0.1:
        return "*"
    return ""


def paired_t_test(scores_a: Sequence[float], scores_b: Sequence[float]) -> PairedTestResult:
    """Two-sided paired t-test on a - b.

    Constant differences make t undefined; the result then has p = 1 and
    ``degenerate=True``.
    """
    if len(scores_a) != len(scores_b):
        raise ValueError(f"score lists differ in length: {len(scores_a)} vs {len(scores_b)}")
    n = len(scores_a)
    if n < 2:
        raise ValueError("paired t-test needs at least two pairs")
    diffs = [float(a) - float(b) for a, b in zip(scores_a, scores_b)]
    mean = math.fsum(diffs) / n
    var = math.fsum((d - mean) ** 2 for d in diffs) / (n - 1)
    if var <= (1e-15 * max(1.0, abs(mean))) ** 2:
        return PairedTestResult(mean, math.nan, n - 1, 1.0, n, 0.0, True)
    se = math.sqrt(var / n)
    t = mean / se
    return PairedTestResult(mean, t, n - 1, min(1.0, t_sf_two_sided(t, n - 1)), n, se)


def paired_records_test(records_a: Sequence[BrierRecord], records_b: Sequence[BrierRecord]) -> PairedTestResult:
    """Paired test on Brier records that must cover the same matches."""
    a = {r.match_id: r.score for r in records_a}
    b = {r.match_id: r.score for r in records_b}
    if a.keys() != b.keys():
        only_a = sorted(a.keys() - b.keys())[:3]
        only_b = sorted(b.keys() - a.keys())[:3]
        raise ValueError(f"record sets are not aligned (e.g. only in a: {only_a}, only in b: {only_b})")
    ids = sorted(a)
    return paired_t_test([a[i] for i in ids], [b[i] for i in ids])
