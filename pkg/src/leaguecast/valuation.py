"""Odds and market-value transforms."""

from __future__ import annotations

import math
from collections import defaultdict
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from .dataset import MatchRecord, MatchStore, OddsTriple
from .errors import DataError

LAMBDA_GRID = np.round(np.arange(-300, 301) * 0.01, 2)


@dataclass(frozen=True)
class ImpliedProbabilities:
    p_win: float
    p_draw: float
    p_loss: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.p_win, self.p_draw, self.p_loss)


def implied_probabilities(odds: OddsTriple | Sequence[float]) -> ImpliedProbabilities:
    """Normalize reciprocal decimal odds so they sum to one."""
    triple = (odds.home, odds.draw, odds.away) if isinstance(odds, OddsTriple) else tuple(odds)
    if len(triple) != 3:
        raise ValueError("need three decimal odds")
    if any(not o > 1.0 for o in triple):
        raise ValueError(f"decimal odds must exceed 1, got {triple}")
    inv = [1.0 / o for o in triple]
    total = sum(inv)
    return ImpliedProbabilities(inv[0] / total, inv[1] / total, inv[2] / total)


def overround(odds: OddsTriple | Sequence[float]) -> float:
    triple = (odds.home, odds.draw, odds.away) if isinstance(odds, OddsTriple) else tuple(odds)
    return sum(1.0 / o for o in triple) - 1.0


def log_lineup_value(value: float | None) -> float:
    if value is None or not value > 0:
        raise ValueError(f"lineup value must be positive, got {value}")
    return math.log(value)


# --------------------------------------------------------------------------
# Box-Cox


def boxcox(x, lmbda: float):
    x = np.asarray(x, dtype=float)
    if lmbda == 0:
        return np.log(x)
    return np.expm1(lmbda * np.log(x)) / lmbda


def boxcox_profile_loglik(x, lmbda: float) -> float:
    """Profile log-likelihood of lambda with mean and variance concentrated out."""
    x = np.asarray(x, dtype=float)
    logx = np.log(x)
    # Rescaling by the geometric mean shifts the curve by a constant and keeps
    # x**lambda in range for |lambda| up to 3.
    z = boxcox(np.exp(logx - logx.mean()), lmbda)
    n = x.size
    var = z.var()
    return -0.5 * n * math.log(var) + (lmbda - 1.0) * logx.sum() - n * lmbda * logx.mean()


@dataclass(frozen=True)
class BoxCoxTransform:
    lmbda: float
    fit_min: float
    fit_max: float

    def transform(self, x):
        return boxcox(x, self.lmbda)

    def scale(self, x):
        """Transform then min-max scale with the fitted extremes."""
        y = self.transform(x)
        return (y - self.fit_min) / (self.fit_max - self.fit_min)


def fit_boxcox(values: Iterable[float]) -> BoxCoxTransform:
    """Choose lambda on the grid -3..3 (step 0.01) maximizing the profile likelihood."""
    x = np.asarray(list(values), dtype=float)
    if x.size < 3:
        raise ValueError("Box-Cox needs at least three values")
    if np.any(~np.isfinite(x)) or np.any(x <= 0):
        raise ValueError("Box-Cox needs strictly positive finite values")
    if np.all(x == x[0]):
        raise ValueError("all values equal; Box-Cox is degenerate")
    ll = np.array([boxcox_profile_loglik(x, lm) for lm in LAMBDA_GRID])
    lmbda = float(LAMBDA_GRID[int(np.argmax(ll))])
    y = boxcox(x, lmbda)
    return BoxCoxTransform(lmbda, float(y.min()), float(y.max()))


def scale_to_unit(values: Iterable[float]) -> list[float]:
    x = np.asarray(list(values), dtype=float)
    if x.size < 2:
        raise ValueError("need at least two values to scale")
    lo, hi = x.min(), x.max()
    if not hi > lo:
        raise ValueError("cannot scale values with max == min")
    out = (x - lo) / (hi - lo)
    out[x == lo] = 0.0
    out[x == hi] = 1.0
    return out.tolist()


def skewness(x) -> float:
    x = np.asarray(x, dtype=float)
    d = x - x.mean()
    return float((d**3).mean() / (d**2).mean() ** 1.5)


# --------------------------------------------------------------------------
# Team market vectors


def team_values(matches: Iterable[MatchRecord]) -> dict[str, list[float]]:
    """Every lineup value recorded for each team."""
    values: dict[str, list[float]] = defaultdict(list)
    for m in matches:
        if m.home_lineup_value is not None:
            values[m.home_team].append(m.home_lineup_value)
        if m.away_lineup_value is not None:
            values[m.away_team].append(m.away_lineup_value)
    return dict(values)


def market_vector(values: Mapping[str, Sequence[float]], teams: Iterable[str] | None = None) -> dict[str, float]:
    """Mean value per team, Box-Cox transformed, then scaled to [0, 1] across the teams.

    Two teams cannot support a Box-Cox fit; they are scaled directly, which
    any monotone transform would give anyway.
    """
    teams = sorted(values) if teams is None else sorted(set(teams))
    missing = [t for t in teams if not values.get(t)]
    if missing:
        raise DataError(f"no lineup values for teams {missing}")
    means = np.array([np.mean(values[t]) for t in teams])
    if np.all(means == means[0]):
        raise DataError("all teams share one market value; scaling is degenerate")
    if len(teams) < 3:
        scaled = scale_to_unit(means)
    else:
        scaled = scale_to_unit(fit_boxcox(means).transform(means))
    return dict(zip(teams, scaled))


def season_market_vector(
    store: MatchStore | Iterable[MatchRecord], league: str, season: int
) -> dict[str, float]:
    """Scaled market value of every team in one league-season."""
    ms = [m for m in store if m.league == league and m.season == season]
    if not ms:
        raise DataError(f"no matches for {league} {season}")
    teams = {t for m in ms for t in (m.home_team, m.away_team)}
    return market_vector(team_values(ms), teams)


# --------------------------------------------------------------------------
# Transform comparison diagnostic

TRANSFORMS = {
    "identity": lambda x: x,
    "log": np.log,
    "sqrt": np.sqrt,
    "power_0.25": lambda x: x**0.25,
}


def compare_transforms(values: Iterable[float]) -> list[dict]:
    """Skewness of team values under several transforms, Box-Cox included.

    Reported for inspection only; no selection rule is applied.
    """
    x = np.asarray(list(values), dtype=float)
    rows = [{"transform": name, "lambda": None, "skewness": skewness(fn(x))}
            for name, fn in TRANSFORMS.items()]
    bc = fit_boxcox(x)
    rows.append({"transform": "boxcox", "lambda": bc.lmbda, "skewness": skewness(bc.transform(x))})
    return rows
