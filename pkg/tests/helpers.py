"""Small builders shared by the tests."""

from __future__ import annotations

from datetime import date, timedelta

import numpy as np

from leaguecast.dataset import MatchRecord, OddsTriple, make_match_id
from leaguecast.probit import DRAW, LOSS, WIN

BASE_DAY = date(2020, 8, 15)


def match(home, away, hg, ag, day=0, *, league="L1", season=2020, odds=None, values=None):
    """A match ``day`` days after the season's opening weekend."""
    when = BASE_DAY.replace(year=season) + timedelta(days=day) if isinstance(day, int) else day
    mid = make_match_id(league, season, when, home, away)
    hv, av = values if values is not None else (None, None)
    return MatchRecord(mid, league, season, when, home, away, hg, ag,
                       OddsTriple(*odds) if odds is not None else None, hv, av)


def random_matches(rng, n_teams, n_matches, *, season=2020, league="L1", draws=True, max_goals=4):
    teams = [f"T{i}" for i in range(n_teams)]
    out = []
    for k in range(n_matches):
        i, j = rng.choice(n_teams, size=2, replace=False)
        hg, ag = int(rng.integers(0, max_goals + 1)), int(rng.integers(0, max_goals + 1))
        if not draws and hg == ag:
            hg += 1
        out.append(match(teams[i], teams[j], hg, ag, day=k, season=season, league=league))
    return out


def simulate_probit(rng, n, beta, cuts):
    """Ordered-probit draws with standard normal covariates."""
    X = rng.normal(size=(n, len(beta)))
    latent = X @ np.asarray(beta) + rng.normal(size=n)
    y = np.where(latent < cuts[0], LOSS, np.where(latent < cuts[1], DRAW, WIN))
    return X, y
