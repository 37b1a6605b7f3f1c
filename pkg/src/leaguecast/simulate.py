"""Synthetic league pyramids with known outcome probabilities.

Goals are Poisson with log-rate ``base + home + (s_home - s_away) / 2`` for
the home side and ``base - (s_home - s_away) / 2`` for the visitors, so the
exact win/draw/loss probabilities of every fixture are available as ground
truth. Odds are those probabilities with a proportional margin, and lineup
values are log-normal around ``exp(value_base + value_slope * strength)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date, timedelta

import numpy as np
from scipy.stats import poisson

from .dataset import MatchRecord, OddsTriple, final_table, make_match_id

MAX_GOALS = 20


@dataclass
class SimulationConfig:
    tiers: int = 1
    teams_per_tier: int = 10
    seasons: int = 3
    start_year: int = 2010
    base_rate: float = 0.25
    home_advantage: float = 0.25
    strength_sd: float = 0.45
    tier_gap: float = 0.5
    drift_sd: float = 0.1
    promoted: int = 2
    margin: float = 0.05
    value_base: float = 15.5
    value_slope: float = 1.5
    value_noise: float = 0.2
    with_odds: bool = True
    with_values: bool = True
    dominant: dict[str, float] = field(default_factory=dict)
    seed: int = 0


@dataclass
class Simulation:
    matches: list[MatchRecord]
    truth: dict[str, tuple[float, float, float]]  # match_id -> (home win, draw, away win)
    strengths: dict[tuple[int, str], float]  # (season, team) -> strength


def outcome_probabilities(home_rate: float, away_rate: float) -> tuple[float, float, float]:
    goals = np.arange(MAX_GOALS + 1)
    ph = poisson.pmf(goals, home_rate)
    pa = poisson.pmf(goals, away_rate)
    joint = np.outer(ph, pa)
    total = joint.sum()
    home_win = np.tril(joint, -1).sum() / total
    draw = np.trace(joint) / total
    return float(home_win), float(draw), float(1.0 - home_win - draw)


def round_robin(teams: list[str]) -> list[list[tuple[str, str]]]:
    """Double round robin by the circle method: one list of pairings per round."""
    ts = list(teams)
    if len(ts) % 2:
        ts.append(None)
    n = len(ts)
    rounds = []
    for r in range(n - 1):
        pairs = []
        for i in range(n // 2):
            a, b = ts[i], ts[n - 1 - i]
            if a is not None and b is not None:
                pairs.append((a, b) if (r + i) % 2 == 0 else (b, a))
        rounds.append(pairs)
        ts = [ts[0], ts[-1]] + ts[1:-1]
    return rounds + [[(b, a) for a, b in rnd] for rnd in rounds]


def simulate(config: SimulationConfig | None = None, **overrides) -> Simulation:
    cfg = config or SimulationConfig()
    if overrides:
        cfg = SimulationConfig(**{**cfg.__dict__, **overrides})
    rng = np.random.default_rng(cfg.seed)

    tiers: list[list[str]] = []
    strength: dict[str, float] = {}
    for tier in range(cfg.tiers):
        names = [f"T{tier + 1}-{i:02d}" for i in range(cfg.teams_per_tier)]
        tiers.append(names)
        for name in names:
            strength[name] = -cfg.tier_gap * tier + rng.normal(0.0, cfg.strength_sd)
    for name, boost in cfg.dominant.items():
        strength[name] = strength.get(name, 0.0) + boost

    matches: list[MatchRecord] = []
    truth: dict[str, tuple[float, float, float]] = {}
    history: dict[tuple[int, str], float] = {}
    for s in range(cfg.seasons):
        year = cfg.start_year + s
        for tier, names in enumerate(tiers):
            league = f"L{tier + 1}"
            kickoff = date(year, 8, 10)
            for rnd, pairs in enumerate(round_robin(sorted(names))):
                day = kickoff + timedelta(days=7 * rnd)
                for home, away in pairs:
                    m, p = _play(rng, cfg, league, year, day, home, away, strength)
                    matches.append(m)
                    truth[m.match_id] = p
            for name in names:
                history[(year, name)] = strength[name]
        tiers = _promote(tiers, matches, year, cfg.promoted)
        for name in strength:
            strength[name] += rng.normal(0.0, cfg.drift_sd)
    matches.sort(key=lambda m: (m.date, m.match_id))
    return Simulation(matches, truth, history)


def _play(rng, cfg, league, year, day, home, away, strength):
    diff = strength[home] - strength[away]
    home_rate = float(np.exp(cfg.base_rate + cfg.home_advantage + diff / 2))
    away_rate = float(np.exp(cfg.base_rate - diff / 2))
    probs = outcome_probabilities(home_rate, away_rate)
    hg = int(rng.poisson(home_rate))
    ag = int(rng.poisson(away_rate))
    odds = None
    if cfg.with_odds:
        odds = OddsTriple(*_book(probs, cfg.margin))
    hv = av = None
    if cfg.with_values:
        hv = float(np.exp(cfg.value_base + cfg.value_slope * strength[home] + rng.normal(0, cfg.value_noise)))
        av = float(np.exp(cfg.value_base + cfg.value_slope * strength[away] + rng.normal(0, cfg.value_noise)))
    mid = make_match_id(league, year, day, home, away)
    return MatchRecord(mid, league, year, day, home, away, hg, ag, odds, hv, av), probs


def _book(probs, margin, max_q=1 / 1.001):
    """Decimal odds whose reciprocals are the probabilities scaled by 1 + margin.

    A near-certain favourite would get odds below 1; its reciprocal is capped
    and the excess booksum is spread over the other outcomes.
    """
    q = np.asarray(probs) * (1.0 + margin)
    top = int(np.argmax(q))
    if q[top] > max_q:
        rest = [i for i in range(3) if i != top]
        q[rest] *= (1.0 + margin - max_q) / q[rest].sum()
        q[top] = max_q
    return tuple(float(1.0 / x) for x in q)


def _promote(tiers, matches, year, k):
    if len(tiers) < 2 or k <= 0:
        return tiers
    orders = []
    for tier, names in enumerate(tiers):
        league = f"L{tier + 1}"
        orders.append(final_table([m for m in matches if m.league == league and m.season == year]))
    new = [list(order) for order in orders]
    for upper in range(len(tiers) - 1):
        down = orders[upper][-k:]
        up = orders[upper + 1][:k]
        new[upper] = [t for t in new[upper] if t not in down] + up
        new[upper + 1] = down + [t for t in new[upper + 1] if t not in up]
    return [sorted(names) for names in new]
