"""Colley and Massey ratings, their weighted variants, and ranking helpers."""

from __future__ import annotations

import csv
import io
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field, replace
from datetime import date

import numpy as np

from .dataset import MatchRecord
from .errors import RatingError

COLLEY_PRIOR = 0.5


@dataclass(frozen=True)
class RatingVector:
    method: str
    ratings: dict[str, float]
    home_advantage: float | None = None
    metadata: dict = field(default_factory=dict)

    def __getitem__(self, team: str) -> float:
        return self.ratings[team]

    def __contains__(self, team: str) -> bool:
        return team in self.ratings

    def __len__(self) -> int:
        return len(self.ratings)

    @property
    def teams(self) -> list[str]:
        return sorted(self.ratings)

    def subset(self, teams: Iterable[str]) -> RatingVector:
        teams = list(teams)
        missing = sorted(t for t in teams if t not in self.ratings)
        if missing:
            raise RatingError(f"teams not rated by {self.method}: {missing}")
        return replace(self, ratings={t: self.ratings[t] for t in teams})


def time_weight(t_k: date, t_0: date, t_f: date) -> float:
    """exp((t_k - t_0) / (t_f - t_0)); later matches count up to e times more."""
    if not t_0 <= t_k <= t_f:
        raise ValueError(f"match date {t_k} outside [{t_0}, {t_f}]")
    span = (t_f - t_0).days
    if span == 0:
        return 1.0
    return math.exp((t_k - t_0).days / span)


def time_weights(matches: Sequence[MatchRecord]) -> list[float]:
    """Per-match weights using the earliest and latest dates of the whole set."""
    if not matches:
        return []
    t_0 = min(m.date for m in matches)
    t_f = max(m.date for m in matches)
    return [time_weight(m.date, t_0, t_f) for m in matches]


def _check_weights(matches: Sequence[MatchRecord], weights) -> np.ndarray:
    if weights is None:
        return np.ones(len(matches))
    w = np.asarray(weights, dtype=float)
    if w.shape != (len(matches),):
        raise ValueError(f"got {w.size} weights for {len(matches)} matches")
    if not np.all(np.isfinite(w)) or np.any(w <= 0):
        raise ValueError("weights must be finite and positive")
    return w


def _team_index(matches: Sequence[MatchRecord], teams: Iterable[str] | None) -> list[str]:
    names = {t for m in matches for t in (m.home_team, m.away_team)}
    if teams is not None:
        names.update(teams)
    return sorted(names)


# --------------------------------------------------------------------------
# Colley


@dataclass
class ColleySystem:
    teams: list[str]
    matrix: np.ndarray
    rhs: np.ndarray
    wins: np.ndarray
    losses: np.ndarray
    games: np.ndarray


def colley_system(
    matches: Sequence[MatchRecord],
    weights: Sequence[float] | None = None,
    *,
    teams: Iterable[str] | None = None,
    draws: str = "drop",
) -> ColleySystem:
    """Assemble ``C r = b`` with (2 + t_i) on the diagonal and b_i = 1 + (w_i - l_i)/2.

    With ``draws="drop"`` drawn matches are ignored. With ``"half"`` a draw
    counts as half a win and half a loss for each side, which adds to t_i but
    leaves b unchanged.
    """
    if draws not in ("drop", "half"):
        raise ValueError("draws must be 'drop' or 'half'")
    w = _check_weights(matches, weights)
    names = _team_index(matches, teams)
    if not names:
        raise ValueError("no teams to rate")
    index = {t: i for i, t in enumerate(names)}
    n = len(names)

    home = np.array([index[m.home_team] for m in matches], dtype=int)
    away = np.array([index[m.away_team] for m in matches], dtype=int)
    margin = np.array([m.margin for m in matches], dtype=float)
    if draws == "drop":
        keep = margin != 0
        home, away, margin, w = home[keep], away[keep], margin[keep], w[keep]

    win = np.zeros(n)
    loss = np.zeros(n)
    home_score = np.where(margin > 0, 1.0, np.where(margin < 0, 0.0, 0.5))
    np.add.at(win, home, w * home_score)
    np.add.at(win, away, w * (1.0 - home_score))
    np.add.at(loss, home, w * (1.0 - home_score))
    np.add.at(loss, away, w * home_score)

    games = np.zeros(n)
    np.add.at(games, home, w)
    np.add.at(games, away, w)
    C = np.diag(2.0 + games)
    np.add.at(C, (home, away), -w)
    np.add.at(C, (away, home), -w)
    b = 1.0 + (win - loss) / 2.0
    return ColleySystem(names, C, b, win, loss, games)


def colley_rate(
    matches: Sequence[MatchRecord],
    weights: Sequence[float] | None = None,
    *,
    teams: Iterable[str] | None = None,
    draws: str = "drop",
    method: str = "colley",
) -> RatingVector:
    """Colley ratings; pass ``weights`` (e.g. from :func:`time_weights`) for the weighted form.

    Teams listed in ``teams`` but absent from ``matches`` get the prior 0.5.
    """
    system = colley_system(matches, weights, teams=teams, draws=draws)
    r = np.linalg.solve(system.matrix, system.rhs)
    meta = {"draws": draws, "weighted": weights is not None, "n_matches": len(matches)}
    if matches:
        meta["cutoff"] = max(m.date for m in matches).isoformat()
    return RatingVector(method, dict(zip(system.teams, r.tolist())), None, meta)


# --------------------------------------------------------------------------
# Massey


def connected_components(matches: Sequence[MatchRecord]) -> list[list[str]]:
    """Components of the undirected match graph, each sorted, largest first."""
    parent: dict[str, str] = {}

    def find(x: str) -> str:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for m in matches:
        for t in (m.home_team, m.away_team):
            parent.setdefault(t, t)
        a, b = find(m.home_team), find(m.away_team)
        if a != b:
            parent[max(a, b)] = min(a, b)
    groups: dict[str, list[str]] = {}
    for t in parent:
        groups.setdefault(find(t), []).append(t)
    return sorted((sorted(g) for g in groups.values()), key=lambda g: (-len(g), g[0]))


@dataclass
class MasseySystem:
    teams: list[str]
    matrix: np.ndarray  # normal matrix X^T W X, team block then optional home column
    rhs: np.ndarray
    home_advantage: bool


def massey_system(
    matches: Sequence[MatchRecord],
    weights: Sequence[float] | None = None,
    *,
    home_advantage: bool = False,
) -> MasseySystem:
    """Normal equations for margins y_k = r_home - r_away (+ r_h when enabled).

    Team i of every game is the home side, so the venue indicator x_k is +1
    throughout; the home column then holds H_i = home games - away games,
    G_h = total weight and p_h = summed margins.
    """
    w = _check_weights(matches, weights)
    names = _team_index(matches, None)
    index = {t: i for i, t in enumerate(names)}
    n = len(names)
    size = n + 1 if home_advantage else n

    home = np.array([index[m.home_team] for m in matches], dtype=int)
    away = np.array([index[m.away_team] for m in matches], dtype=int)
    y = np.array([m.margin for m in matches], dtype=float)

    M = np.zeros((size, size))
    p = np.zeros(size)
    np.add.at(M, (home, home), w)
    np.add.at(M, (away, away), w)
    np.add.at(M, (home, away), -w)
    np.add.at(M, (away, home), -w)
    np.add.at(p, home, w * y)
    np.add.at(p, away, -w * y)
    if home_advantage:
        h = n
        np.add.at(M, (home, h), w)
        np.add.at(M, (h, home), w)
        np.add.at(M, (away, h), -w)
        np.add.at(M, (h, away), -w)
        M[h, h] = w.sum()
        p[h] = (w * y).sum()
    return MasseySystem(names, M, p, home_advantage)


def massey_rate(
    matches: Sequence[MatchRecord],
    weights: Sequence[float] | None = None,
    *,
    home_advantage: bool = False,
    teams: Iterable[str] | None = None,
    method: str = "massey",
) -> RatingVector:
    """Massey least-squares ratings made unique by a sum-to-zero last row.

    Teams in ``teams`` that never played in ``matches`` get 0, the mean of
    the constrained solution.
    """
    names = _team_index(matches, None)
    if len(names) < 2:
        raise RatingError("Massey needs at least two teams with matches")
    components = connected_components(matches)
    if len(components) > 1:
        listing = "; ".join("{" + ", ".join(c) + "}" for c in components)
        raise RatingError(f"match graph is disconnected into {len(components)} components: {listing}")

    system = massey_system(matches, weights, home_advantage=home_advantage)
    M = system.matrix.copy()
    p = system.rhs.copy()
    n = len(names)
    M[n - 1, :] = 0.0
    M[n - 1, :n] = 1.0
    p[n - 1] = 0.0
    # Relative threshold: the matrix scales with total match weight.
    sv = np.linalg.svd(M, compute_uv=False)
    if sv[-1] <= sv[0] * 1e-12:
        raise RatingError("Massey system is singular after the sum-to-zero replacement")
    r = np.linalg.solve(M, p)

    ratings = dict(zip(names, r[:n].tolist()))
    for t in teams or ():
        ratings.setdefault(t, 0.0)
    meta = {"weighted": weights is not None, "n_matches": len(matches)}
    if matches:
        meta["cutoff"] = max(m.date for m in matches).isoformat()
    r_h = float(r[n]) if home_advantage else None
    return RatingVector(method, dict(sorted(ratings.items())), r_h, meta)


# --------------------------------------------------------------------------
# Market combination and ranking


def combine_with_market(
    r_hat: RatingVector,
    market: Mapping[str, float],
    *,
    mix: float = 1.0,
    method: str = "tm_massey",
) -> RatingVector:
    """Final rating r = r_hat + mix * market; ``mix=1`` is the plain sum."""
    missing = sorted(t for t in r_hat.ratings if t not in market)
    if missing:
        raise RatingError(f"no market value for teams {missing}")
    combined = {t: r + mix * float(market[t]) for t, r in r_hat.ratings.items()}
    meta = dict(r_hat.metadata)
    meta.update({
        "base_method": r_hat.method,
        "base": dict(r_hat.ratings),
        "market": {t: float(market[t]) for t in r_hat.ratings},
        "mix": mix,
    })
    return RatingVector(method, combined, r_hat.home_advantage, meta)


def rank_teams(r: RatingVector | Mapping[str, float], league_membership: Mapping[str, str]) -> dict[str, list[str]]:
    """Order each league's teams by rating, highest first; ties go to the smaller team id."""
    ratings = r.ratings if isinstance(r, RatingVector) else r
    missing = sorted(t for t in league_membership if t not in ratings)
    if missing:
        raise RatingError(f"teams without ratings: {missing}")
    leagues: dict[str, list[str]] = {}
    for team, league in league_membership.items():
        leagues.setdefault(league, []).append(team)
    return {
        league: sorted(teams, key=lambda t: (-ratings[t], t))
        for league, teams in sorted(leagues.items())
    }


def ratings_to_csv(r: RatingVector, league_membership: Mapping[str, str]) -> str:
    """CSV ``team,rating,rank,league,method``; one block per league in rank order."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["team", "rating", "rank", "league", "method"])
    for league, order in rank_teams(r, league_membership).items():
        for rank, team in enumerate(order, start=1):
            writer.writerow([team, repr(float(r.ratings[team])), rank, league, r.method])
    return buf.getvalue()
