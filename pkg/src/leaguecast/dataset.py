"""Match records, CSV ingestion, the in-memory store and experiment config."""

from __future__ import annotations

import csv
import enum
import hashlib
import io
import math
from collections import defaultdict
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import asdict, dataclass, field
from datetime import date, datetime
from pathlib import Path

import yaml

from .errors import DataError

MATCH_COLUMNS = (
    "league",
    "season",
    "date",
    "home_team",
    "away_team",
    "home_goals",
    "away_goals",
    "odds_home",
    "odds_draw",
    "odds_away",
    "home_lineup_value",
    "away_lineup_value",
)
REQUIRED_COLUMNS = ("date", "home_team", "away_team", "home_goals", "away_goals")
STORE_COLUMNS = ("match_id",) + MATCH_COLUMNS

# Season Y runs from July of Y to the end of August of Y+1 (the 2019-20
# season finished in August 2020).
SEASON_START = (7, 1)
SEASON_END = (8, 31)


class Outcome(enum.IntEnum):
    """Result from the home team's point of view, ordered loss < draw < win."""

    AWAY_WIN = 0
    DRAW = 1
    HOME_WIN = 2

    @classmethod
    def from_goals(cls, home_goals: int, away_goals: int) -> Outcome:
        if home_goals > away_goals:
            return cls.HOME_WIN
        if home_goals < away_goals:
            return cls.AWAY_WIN
        return cls.DRAW

    @property
    def indicators(self) -> tuple[int, int, int]:
        """(w, d, l) indicator triple for the home team."""
        return (
            int(self is Outcome.HOME_WIN),
            int(self is Outcome.DRAW),
            int(self is Outcome.AWAY_WIN),
        )


@dataclass(frozen=True)
class OddsTriple:
    """Decimal odds for home win, draw and away win."""

    home: float
    draw: float
    away: float

    def __post_init__(self):
        for name in ("home", "draw", "away"):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 1.0:
                raise ValueError(f"decimal odds must be > 1, got {name}={value}")
        if self.booksum < 1.0 - 1e-12:
            raise ValueError(f"reciprocal odds sum to {self.booksum:.6f} < 1; corrupt book")

    @property
    def booksum(self) -> float:
        return 1.0 / self.home + 1.0 / self.draw + 1.0 / self.away


@dataclass(frozen=True)
class MatchRecord:
    match_id: str
    league: str
    season: int
    date: date
    home_team: str
    away_team: str
    home_goals: int
    away_goals: int
    odds: OddsTriple | None = None
    home_lineup_value: float | None = None
    away_lineup_value: float | None = None

    def __post_init__(self):
        if self.home_team == self.away_team:
            raise ValueError(f"home and away team are both {self.home_team!r}")
        if self.home_goals < 0 or self.away_goals < 0:
            raise ValueError("goals must be non-negative")
        for value in (self.home_lineup_value, self.away_lineup_value):
            if value is not None and not value > 0:
                raise ValueError(f"lineup value must be positive, got {value}")

    @property
    def outcome(self) -> Outcome:
        return Outcome.from_goals(self.home_goals, self.away_goals)

    @property
    def margin(self) -> int:
        return self.home_goals - self.away_goals

    @property
    def has_values(self) -> bool:
        return self.home_lineup_value is not None and self.away_lineup_value is not None

    def involves(self, teams: Iterable[str]) -> bool:
        teams = teams if isinstance(teams, (set, frozenset)) else set(teams)
        return self.home_team in teams or self.away_team in teams


def make_match_id(league: str, season: int, day: date, home: str, away: str) -> str:
    return f"{league}:{season}:{day.isoformat()}:{home}:{away}"


def season_window(season: int) -> tuple[date, date]:
    return date(season, *SEASON_START), date(season + 1, *SEASON_END)


def sort_key(match: MatchRecord) -> tuple[date, str]:
    return (match.date, match.match_id)


# --------------------------------------------------------------------------
# CSV ingestion


def _parse_float(text: str, *, path, line: int, column: str) -> float | None:
    if text == "":
        return None
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"not a number: {text!r}", path=path, line=line, column=column) from None
    if not math.isfinite(value):
        raise DataError(f"not a finite number: {text!r}", path=path, line=line, column=column)
    return value


def _parse_int(text: str, *, path, line: int, column: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise DataError(f"not an integer: {text!r}", path=path, line=line, column=column) from None
    if value < 0:
        raise DataError(f"negative value {value}", path=path, line=line, column=column)
    return value


def ingest_matches(
    path: str | Path,
    league: str | None = None,
    season: int | None = None,
    *,
    column_map: Mapping[str, str] | None = None,
    date_format: str = "%Y-%m-%d",
) -> list[MatchRecord]:
    """Read one match CSV file into records sorted by (date, match_id).

    ``league`` and ``season`` declare which league-season the file holds; a
    row may leave those cells empty, but a non-empty cell that disagrees is
    an error. When they are ``None`` every row must carry them.

    ``column_map`` maps canonical column names to the raw header names of
    the file (e.g. ``{"odds_home": "B365H"}``) so raw Football-Data exports
    can be read without rewriting them.
    """
    path = Path(path)
    column_map = dict(column_map or {})
    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError("missing header row", path=path, line=1) from None
        header = [h.strip() for h in header]
        position = {name: i for i, name in enumerate(header)}

        def col(name: str) -> int | None:
            return position.get(column_map.get(name, name))

        missing = [name for name in REQUIRED_COLUMNS if col(name) is None]
        if missing:
            raise DataError(
                f"header lacks required columns {missing}; found {header}", path=path, line=1
            )
        idx = {name: col(name) for name in STORE_COLUMNS}

        records: list[MatchRecord] = []
        seen: dict[str, int] = {}
        for lineno, row in enumerate(reader, start=2):
            if not row or all(cell.strip() == "" for cell in row):
                continue
            if len(row) != len(header):
                raise DataError(
                    f"expected {len(header)} fields, got {len(row)}", path=path, line=lineno
                )

            def cell(name: str) -> str:
                i = idx[name]
                return "" if i is None else row[i].strip()

            rec = _parse_row(cell, path=path, line=lineno, league=league, season=season,
                             date_format=date_format)
            if rec.match_id in seen:
                raise DataError(
                    f"duplicate match_id {rec.match_id!r} (first seen on line {seen[rec.match_id]})",
                    path=path, line=lineno, column="match_id",
                )
            seen[rec.match_id] = lineno
            records.append(rec)
    records.sort(key=sort_key)
    return records


def _parse_row(cell, *, path, line, league, season, date_format) -> MatchRecord:
    row_league = cell("league")
    if row_league and league is not None and row_league != league:
        raise DataError(f"league {row_league!r} differs from declared {league!r}",
                        path=path, line=line, column="league")
    lg = row_league or league
    if not lg:
        raise DataError("league missing", path=path, line=line, column="league")

    row_season = cell("season")
    ss = _parse_int(row_season, path=path, line=line, column="season") if row_season else None
    if ss is not None and season is not None and ss != season:
        raise DataError(f"season {ss} differs from declared {season}",
                        path=path, line=line, column="season")
    ss = ss if ss is not None else season
    if ss is None:
        raise DataError("season missing", path=path, line=line, column="season")

    try:
        day = datetime.strptime(cell("date"), date_format).date()
    except ValueError:
        raise DataError(f"unparseable date {cell('date')!r}", path=path, line=line,
                        column="date") from None
    lo, hi = season_window(ss)
    if not lo <= day <= hi:
        raise DataError(f"date {day} outside season {ss} window {lo}..{hi}",
                        path=path, line=line, column="date")

    home, away = cell("home_team"), cell("away_team")
    if not home or not away:
        raise DataError("team name missing", path=path, line=line, column="home_team")
    if home == away:
        raise DataError(f"team {home!r} plays itself", path=path, line=line, column="away_team")

    hg = _parse_int(cell("home_goals"), path=path, line=line, column="home_goals")
    ag = _parse_int(cell("away_goals"), path=path, line=line, column="away_goals")

    raw_odds = [
        _parse_float(cell(c), path=path, line=line, column=c)
        for c in ("odds_home", "odds_draw", "odds_away")
    ]
    odds = None
    if all(o is not None for o in raw_odds):
        try:
            odds = OddsTriple(*raw_odds)
        except ValueError as exc:
            raise DataError(str(exc), path=path, line=line, column="odds_home") from None

    values = []
    for c in ("home_lineup_value", "away_lineup_value"):
        v = _parse_float(cell(c), path=path, line=line, column=c)
        if v is not None and v <= 0:
            raise DataError(f"lineup value must be positive, got {v}", path=path, line=line, column=c)
        values.append(v)

    match_id = cell("match_id") or make_match_id(lg, ss, day, home, away)
    return MatchRecord(match_id, lg, ss, day, home, away, hg, ag, odds, values[0], values[1])


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def match_row(m: MatchRecord) -> list[str]:
    odds = m.odds
    return [
        m.match_id, m.league, str(m.season), m.date.isoformat(), m.home_team, m.away_team,
        str(m.home_goals), str(m.away_goals),
        _fmt(odds.home if odds else None), _fmt(odds.draw if odds else None),
        _fmt(odds.away if odds else None),
        _fmt(m.home_lineup_value), _fmt(m.away_lineup_value),
    ]


def matches_to_csv(matches: Iterable[MatchRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(STORE_COLUMNS)
    for m in matches:
        writer.writerow(match_row(m))
    return buf.getvalue()


def write_matches(matches: Iterable[MatchRecord], path: str | Path) -> str:
    """Write records in the store CSV layout; return the sha256 of the bytes written."""
    text = matches_to_csv(matches)
    data = text.encode("utf-8")
    Path(path).write_bytes(data)
    return hashlib.sha256(data).hexdigest()


# --------------------------------------------------------------------------
# Store


class MatchStore:
    """Immutable collection of matches ordered by (date, match_id)."""

    def __init__(self, matches: Iterable[MatchRecord] = ()):
        ordered = sorted(matches, key=sort_key)
        ids = set()
        for m in ordered:
            if m.match_id in ids:
                raise DataError(f"duplicate match_id {m.match_id!r}")
            ids.add(m.match_id)
        self._matches = tuple(ordered)
        self._leagues = frozenset(m.league for m in ordered)

    def __len__(self) -> int:
        return len(self._matches)

    def __iter__(self):
        return iter(self._matches)

    @property
    def matches(self) -> tuple[MatchRecord, ...]:
        return self._matches

    @property
    def leagues(self) -> list[str]:
        return sorted(self._leagues)

    @property
    def teams(self) -> set[str]:
        return {t for m in self._matches for t in (m.home_team, m.away_team)}

    def seasons(self, league: str | None = None) -> list[int]:
        return sorted({m.season for m in self._matches if league is None or m.league == league})

    def checksum(self) -> str:
        return hashlib.sha256(matches_to_csv(self._matches).encode("utf-8")).hexdigest()

    @classmethod
    def from_files(cls, paths: Iterable[str | Path], **kwargs) -> MatchStore:
        """Ingest several files, naming both files when a match id repeats."""
        seen: dict[str, Path] = {}
        matches = []
        for path in paths:
            path = Path(path)
            league, season = _declared_from_name(path)
            for m in ingest_matches(path, league, season, **kwargs):
                if m.match_id in seen:
                    raise DataError(f"duplicate match_id {m.match_id!r} in {seen[m.match_id]} and {path}",
                                    path=path, column="match_id")
                seen[m.match_id] = path
                matches.append(m)
        return cls(matches)

    @classmethod
    def load(cls, path: str | Path) -> MatchStore:
        return cls(ingest_matches(path))

    def save(self, path: str | Path) -> str:
        """Write the store CSV plus a ``.sha256`` sidecar; return the digest."""
        digest = write_matches(self._matches, path)
        Path(f"{path}.sha256").write_text(f"{digest}  {Path(path).name}\n")
        return digest


def _declared_from_name(path: Path) -> tuple[str | None, int | None]:
    # Files named <league>_<season>.csv declare their league-season.
    stem = path.stem
    league, sep, season = stem.rpartition("_")
    if sep and league and season.isdigit():
        return league, int(season)
    return None, None


def query_matches(
    store: MatchStore,
    leagues: Iterable[str] | None = None,
    season_range: tuple[int, int] | None = None,
    before_date: date | None = None,
    exclude_teams: Iterable[str] | None = None,
    seasons: Iterable[int] | None = None,
) -> list[MatchRecord]:
    """Filter the store; the result keeps (date, match_id) order.

    ``before_date`` is exclusive and ``season_range`` inclusive. A match is
    dropped by ``exclude_teams`` when either side is excluded.
    """
    league_set = None
    if leagues is not None:
        league_set = set(leagues)
        unknown = sorted(league_set - set(store.leagues))
        if unknown:
            raise DataError(f"unknown league code(s) {unknown}; known: {store.leagues}")
    excluded = frozenset(exclude_teams or ())
    season_set = set(seasons) if seasons is not None else None
    out = []
    for m in store.matches:
        if league_set is not None and m.league not in league_set:
            continue
        if season_range is not None and not season_range[0] <= m.season <= season_range[1]:
            continue
        if season_set is not None and m.season not in season_set:
            continue
        if before_date is not None and m.date >= before_date:
            continue
        if excluded and m.involves(excluded):
            continue
        out.append(m)
    return out


def league_table(matches: Iterable[MatchRecord]) -> dict[str, dict[str, int]]:
    """Points (3/1/0), goal difference and goals for, per team."""
    table: dict[str, dict[str, int]] = {}
    for m in matches:
        for team, gf, ga in ((m.home_team, m.home_goals, m.away_goals),
                             (m.away_team, m.away_goals, m.home_goals)):
            row = table.setdefault(team, {"played": 0, "points": 0, "gd": 0, "gf": 0})
            row["played"] += 1
            row["points"] += 3 if gf > ga else 1 if gf == ga else 0
            row["gd"] += gf - ga
            row["gf"] += gf
    return table


def final_table(matches: Iterable[MatchRecord]) -> list[str]:
    """Teams in finishing order: points, then goal difference, goals for, team id."""
    table = league_table(matches)
    return sorted(table, key=lambda t: (-table[t]["points"], -table[t]["gd"], -table[t]["gf"], t))


@dataclass
class LeagueSummary:
    league: str
    matches: int
    teams: int
    mean_home_goals: float
    mean_away_goals: float
    mean_odds_home: float
    mean_odds_draw: float
    mean_odds_away: float
    mean_lineup_value: float
    draw_rate: float
    odds_present: int
    values_present: int


def _mean(xs: Sequence[float]) -> float:
    return sum(xs) / len(xs) if xs else float("nan")


def dataset_summary(store: MatchStore | Iterable[MatchRecord]) -> list[LeagueSummary]:
    """Per-league counts and means; means skip missing cells."""
    by_league: dict[str, list[MatchRecord]] = defaultdict(list)
    for m in store:
        by_league[m.league].append(m)
    rows = []
    for league in sorted(by_league):
        ms = by_league[league]
        odds = [m.odds for m in ms if m.odds is not None]
        values = [v for m in ms for v in (m.home_lineup_value, m.away_lineup_value) if v is not None]
        rows.append(LeagueSummary(
            league=league,
            matches=len(ms),
            teams=len({t for m in ms for t in (m.home_team, m.away_team)}),
            mean_home_goals=_mean([m.home_goals for m in ms]),
            mean_away_goals=_mean([m.away_goals for m in ms]),
            mean_odds_home=_mean([o.home for o in odds]),
            mean_odds_draw=_mean([o.draw for o in odds]),
            mean_odds_away=_mean([o.away for o in odds]),
            mean_lineup_value=_mean(values),
            draw_rate=_mean([float(m.home_goals == m.away_goals) for m in ms]),
            odds_present=len(odds),
            values_present=len(values),
        ))
    return rows


def summary_totals(store: MatchStore | Iterable[MatchRecord]) -> dict[str, int]:
    ms = list(store)
    return {"matches": len(ms), "teams": len({t for m in ms for t in (m.home_team, m.away_team)})}


# --------------------------------------------------------------------------
# Experiment configuration


@dataclass
class LeagueSpec:
    code: str
    tier: int = 1
    country: str = "default"


ALL_MODELS = (
    "null",
    "colley",
    "massey",
    "time_colley",
    "tm_massey",
    "tm_regression",
    "betting_odds",
)


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce an experiment.

    ``seasons`` is the inclusive range of *evaluated* seasons; ``None`` means
    every season in the store with enough history for the protocol.
    """

    leagues: list[LeagueSpec] = field(default_factory=list)
    seasons: tuple[int, int] | None = None
    split_fraction: float = 0.8
    excluded_teams: list[str] = field(default_factory=list)
    rng_seed: int = 20240701
    models: list[str] = field(default_factory=lambda: list(ALL_MODELS))
    colley_draws: str = "drop"
    market_mix: float = 1.0
    column_map: dict[str, str] = field(default_factory=dict)
    date_format: str = "%Y-%m-%d"

    def __post_init__(self):
        self.leagues = [lg if isinstance(lg, LeagueSpec) else LeagueSpec(**lg) for lg in self.leagues]
        if self.seasons is not None:
            first, last = (int(s) for s in self.seasons)
            if first > last:
                raise ValueError(f"empty season range {first}..{last}")
            self.seasons = (first, last)
        if not 0.0 < self.split_fraction < 1.0:
            raise ValueError(f"split_fraction must lie in (0, 1), got {self.split_fraction}")
        if not 0 <= int(self.rng_seed) < 2**64:
            raise ValueError("rng_seed must be a 64-bit unsigned integer")
        unknown = sorted(set(self.models) - set(ALL_MODELS))
        if unknown:
            raise ValueError(f"unknown models {unknown}; valid: {list(ALL_MODELS)}")
        if self.colley_draws not in ("drop", "half"):
            raise ValueError("colley_draws must be 'drop' or 'half'")
        self.excluded_teams = sorted(set(self.excluded_teams))

    @property
    def league_codes(self) -> list[str]:
        return [lg.code for lg in self.leagues]

    def country_of(self, league: str) -> str:
        for lg in self.leagues:
            if lg.code == league:
                return lg.country
        return "default"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["seasons"] = list(self.seasons) if self.seasons is not None else None
        return d

    @classmethod
    def from_dict(cls, data: Mapping) -> ExperimentConfig:
        known = set(cls.__dataclass_fields__)
        extra = sorted(set(data) - known)
        if extra:
            raise ValueError(f"unknown config keys {extra}")
        return cls(**dict(data))

    def validate_against(self, store: MatchStore) -> None:
        """Check league codes and excluded teams against ingested data."""
        unknown = sorted(set(self.league_codes) - set(store.leagues))
        if unknown:
            raise DataError(f"configured leagues {unknown} not in store")
        missing = sorted(set(self.excluded_teams) - store.teams)
        if missing:
            raise DataError(f"excluded teams {missing} never appear in the store")


def load_config(path: str | Path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    return ExperimentConfig.from_dict(data)


def dump_config(config: ExperimentConfig) -> str:
    return yaml.safe_dump(config.to_dict(), sort_keys=True)
