"""Experiment protocols: end-of-season ranking, in-season and out-of-season
Brier backtests, and the dominant-team exclusion comparison."""

from __future__ import annotations

import csv
import io
import json
import math
import zlib
from collections import Counter, defaultdict
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path

from . import __version__
from .dataset import (
    ALL_MODELS,
    ExperimentConfig,
    MatchRecord,
    MatchStore,
    final_table,
    query_matches,
)
from .errors import DataError, FitError, InsufficientHistoryError, RatingError
from .evaluation import (
    BrierRecord,
    kendall_tau,
    make_record,
    mean_brier,
    paired_t_test,
    significance_code,
)
from .probit import (
    DesignRows,
    OutcomeForecast,
    ProbitModel,
    ProbitRow,
    build_null_rows,
    build_rating_rows,
    build_tm_rows,
    fit_ordered_probit,
    predict_outcome,
    tm_covariates,
)
from .ratings import (
    RatingVector,
    colley_rate,
    combine_with_market,
    massey_rate,
    rank_teams,
    time_weights,
)
from .valuation import implied_probabilities, market_vector, team_values

PROTOCOLS = ("eos", "in_season", "out_of_season")
RATING_MODELS = ("colley", "massey", "time_colley", "tm_massey")
EOS_MODELS = RATING_MODELS
MODEL_LABELS = {
    "null": "Null",
    "colley": "Colley",
    "massey": "Massey",
    "time_colley": "Time-weighted Colley",
    "tm_massey": "T.M.-weighted Massey",
    "tm_regression": "T.M. Regression",
    "betting_odds": "Betting Odds",
}
COMPARISONS = (
    ("colley", "null"),
    ("massey", "colley"),
    ("time_colley", "colley"),
    ("tm_massey", "massey"),
    ("tm_regression", "tm_massey"),
    ("betting_odds", "tm_regression"),
    ("betting_odds", "null"),
)
MIN_SEASON_MATCHES = 10


class LeakageError(AssertionError):
    """A forecast was trained on a match dated on or after the match it predicts."""


@dataclass(frozen=True)
class MetricCell:
    league: str
    season: int | str  # "all" marks the average over evaluated seasons
    model: str
    metric: str
    value: float
    n: int


@dataclass
class BacktestReport:
    protocol: str
    cells: list[MetricCell] = field(default_factory=list)
    records: list[BrierRecord] = field(default_factory=list)
    counts: dict[str, int] = field(default_factory=dict)
    absent: list[tuple[str, int, str, str]] = field(default_factory=list)
    config: dict = field(default_factory=dict)
    leagues: list[str] = field(default_factory=list)
    models: list[str] = field(default_factory=list)

    @property
    def metric(self) -> str:
        return "kendall_tau" if self.protocol == "eos" else "brier"

    def season_cells(self) -> list[MetricCell]:
        return [c for c in self.cells if c.season != "all"]

    def summary(self) -> dict[tuple[str, str], MetricCell]:
        return {(c.league, c.model): c for c in self.cells if c.season == "all"}

    def value(self, league: str, model: str) -> float | None:
        cell = self.summary().get((league, model))
        return None if cell is None else cell.value

    def records_for(self, model: str, league: str | None = None) -> list[BrierRecord]:
        return [r for r in self.records if r.model == model and (league is None or r.league == league)]

    def match_counts(self) -> dict[str, int]:
        ids: dict[str, set[str]] = defaultdict(set)
        for r in self.records:
            ids[r.league].add(r.match_id)
        return {lg: len(s) for lg, s in sorted(ids.items())}


# --------------------------------------------------------------------------
# Helpers


def _seed_for(base: int, league: str, season: int) -> int:
    return (int(base) * 1_000_003 + zlib.crc32(league.encode()) * 7919 + season) % 2**63


def _check_leakage(train: Iterable[MatchRecord], match: MatchRecord, counts: Counter) -> None:
    latest = max((m.date for m in train), default=None)
    counts["leakage_checks"] += 1
    if latest is not None and latest >= match.date:
        raise LeakageError(f"training data dated {latest} used to predict {match.match_id} on {match.date}")


def in_season_split(matches: Sequence[MatchRecord], fraction: float) -> int:
    """Index of the first test match for a chronological train/test split.

    The boundary is ceil(fraction * n). Fixtures sharing a date with the last
    training match move into training so that no training match is dated on
    the same day as a test match; if that would leave no test matches they
    move into the test set instead.
    """
    n = len(matches)
    cut = min(max(math.ceil(fraction * n), 1), n - 1)
    boundary_day = matches[cut - 1].date
    if matches[cut].date != boundary_day:
        return cut
    forward = cut
    while forward < n and matches[forward].date == boundary_day:
        forward += 1
    if forward < n:
        return forward
    back = cut
    while back > 0 and matches[back - 1].date == boundary_day:
        back -= 1
    return back


def _leagues(store: MatchStore, config: ExperimentConfig) -> list[str]:
    return config.league_codes or store.leagues


def _groups(leagues: Sequence[str], config: ExperimentConfig) -> dict[str, list[str]]:
    groups: dict[str, list[str]] = defaultdict(list)
    for lg in leagues:
        groups[config.country_of(lg)].append(lg)
    return dict(groups)


def _evaluated_seasons(store, config, league, required_prior: int, protocol: str) -> list[int]:
    seasons = store.seasons(league)
    feasible = [s for s in seasons if sum(1 for p in seasons if p < s) >= required_prior]
    if config.seasons is None:
        return feasible
    first, last = config.seasons
    wanted = list(range(first, last + 1))
    absent = [s for s in wanted if s not in seasons]
    if absent:
        raise DataError(f"season(s) {absent} of league {league} are not in the store")
    infeasible = [s for s in wanted if s not in feasible]
    if infeasible:
        raise InsufficientHistoryError(
            f"{protocol}: league {league} season(s) {infeasible} need {required_prior} prior season(s)",
            earliest_feasible=feasible[0] if feasible else None,
        )
    return wanted


def _safe_market(values: dict[str, list[float]], teams: Iterable[str]) -> dict[str, float]:
    """Market vector over the teams that do have values; empty when it cannot be formed."""
    have = sorted(t for t in set(teams) if values.get(t))
    if len(have) < 2:
        return {}
    try:
        return market_vector(values, have)
    except (DataError, ValueError):
        return {}


def rating_vectors(
    train: Sequence[MatchRecord],
    teams: Iterable[str],
    config: ExperimentConfig,
    models: Iterable[str] = RATING_MODELS,
) -> dict[str, RatingVector]:
    """Base rating vectors (before any market combination) for the rating models."""
    teams = sorted(set(teams))
    out = {}
    weights = time_weights(train) if train else None
    for model in models:
        if model == "colley":
            out[model] = colley_rate(train, teams=teams, draws=config.colley_draws)
        elif model == "time_colley":
            out[model] = colley_rate(train, weights, teams=teams, draws=config.colley_draws,
                                     method="time_colley")
        elif model == "massey":
            out[model] = massey_rate(train, teams=teams)
        elif model == "tm_massey":
            out[model] = massey_rate(train, weights, home_advantage=True, teams=teams,
                                     method="tm_massey_base")
    return out


def _combine(base: RatingVector, market: dict[str, float], mix: float) -> RatingVector:
    teams = [t for t in base.teams if t in market]
    return combine_with_market(base.subset(teams), market, mix=mix)


def _finish_cells(report: BacktestReport, per_season: dict[tuple[str, int, str], list[float]]):
    """Season cells from raw values plus per-league averages over seasons."""
    metric = report.metric
    cells = []
    by_league_model: dict[tuple[str, str], list[float]] = defaultdict(list)
    for (league, season, model), values in sorted(per_season.items()):
        if metric == "brier":
            value = mean_brier(values)
            n = len(values)
        else:
            value, n = values
        cells.append(MetricCell(league, season, model, metric, value, n))
        by_league_model[(league, model)].append(value)
    for (league, model), values in sorted(by_league_model.items()):
        cells.append(MetricCell(league, "all", model, metric, math.fsum(values) / len(values), len(values)))
    report.cells = cells


# --------------------------------------------------------------------------
# End-of-season ranking


def run_eos_ranking(store: MatchStore, config: ExperimentConfig) -> BacktestReport:
    """Rate on everything before season Y, rank each league's season-Y teams,
    and compare with the final table by Kendall's tau."""
    leagues = _leagues(store, config)
    models = [m for m in EOS_MODELS if m in config.models]
    report = BacktestReport("eos", config=config.to_dict(), leagues=leagues, models=models)
    counts: Counter = Counter()
    per_season: dict = {}
    for country, group in sorted(_groups(leagues, config).items()):
        seasons = sorted({s for lg in group for s in _evaluated_seasons(store, config, lg, 1, "eos")})
        for season in seasons:
            current = query_matches(store, leagues=group, seasons=[season])
            start = min(m.date for m in current)
            train = query_matches(store, leagues=group, before_date=start)
            membership = {}
            for lg in group:
                for m in current:
                    if m.league == lg:
                        membership[m.home_team] = lg
                        membership[m.away_team] = lg
            if not train:
                raise InsufficientHistoryError(f"eos: no matches before season {season} in {group}")
            try:
                bases = rating_vectors(train, membership, config, models)
            except RatingError as exc:
                # Tiers only become linked once a promotion has happened; seasons
                # picked by default are skipped until then, requested ones fail.
                if config.seasons is not None:
                    raise
                for lg in group:
                    report.absent.append((lg, season, "*", str(exc)))
                counts["disconnected_seasons"] += 1
                continue
            counts["rating_systems"] += 1
            for lg in group:
                lg_matches = [m for m in current if m.league == lg]
                if not lg_matches:
                    continue
                actual = final_table(lg_matches)
                if len(actual) < 2:
                    continue
                for model in models:
                    vec = bases[model]
                    if model == "tm_massey":
                        market = _safe_market(team_values(lg_matches), actual)
                        if set(market) != set(actual):
                            report.absent.append((lg, season, model, "missing market values"))
                            counts["tm_massey_absent_cells"] += 1
                            continue
                        vec = _combine(vec.subset(actual), market, config.market_mix)
                    predicted = rank_teams(vec.subset(actual), {t: lg for t in actual})[lg]
                    per_season[(lg, season, model)] = (kendall_tau(predicted, actual), len(actual))
    _finish_cells(report, per_season)
    report.counts = dict(sorted(counts.items()))
    return report


# --------------------------------------------------------------------------
# Brier protocols


@dataclass
class _Forecasters:
    """Everything fitted for one evaluated league-season."""

    null: ProbitModel
    tm_reg: ProbitModel | None
    ratings: dict[str, RatingVector]
    rating_probits: dict[str, ProbitModel]


def _fit_or_none(rows, counts: Counter, label: str) -> ProbitModel | None:
    try:
        return fit_ordered_probit(rows)
    except FitError:
        counts[f"{label}_fit_failed"] += 1
        return None


def _rating_probit_rows(model, train, vec, market_by_season, config, counts):
    """Rating-differential rows for training matches; TM-Massey adds the season's market vector."""
    if model != "tm_massey":
        return build_rating_rows(train, vec)
    by_season = defaultdict(list)
    for m in train:
        by_season[(m.league, m.season)].append(m)
    usable = []
    for key, ms in sorted(by_season.items()):
        market = market_by_season.get(key, {})
        combined = _combine(vec, market, config.market_mix) if market else None
        for m in ms:
            if combined is not None and m.home_team in combined and m.away_team in combined:
                usable.append((m, combined))
            else:
                counts["tm_massey_train_skipped"] += 1
    rows = [ProbitRow((c[m.home_team] - c[m.away_team],), int(m.outcome), m.match_id, True)
            for m, c in usable]
    return DesignRows(rows)


def _forecast_matches(
    report: BacktestReport,
    test: Sequence[MatchRecord],
    fc: _Forecasters,
    test_ratings: dict[str, RatingVector],
    trains: Sequence[Sequence[MatchRecord]],
    counts: Counter,
    per_season: dict,
):
    models = report.models
    for m in test:
        for train in trains:
            _check_leakage(train, m, counts)
        null_fc = predict_outcome(fc.null, (1.0,))
        forecasts: dict[str, tuple[OutcomeForecast, bool]] = {"null": (null_fc, False)}

        cov = tm_covariates(m)
        if fc.tm_reg is not None and cov is not None:
            forecasts["tm_regression"] = (predict_outcome(fc.tm_reg, cov), False)
        else:
            forecasts["tm_regression"] = (null_fc, True)

        for model in RATING_MODELS:
            vec = test_ratings.get(model)
            probit = fc.rating_probits.get(model)
            if vec is not None and probit is not None and m.home_team in vec and m.away_team in vec:
                forecasts[model] = (predict_outcome(probit, (vec[m.home_team] - vec[m.away_team],)), False)
            else:
                forecasts[model] = (null_fc, True)

        if m.odds is not None:
            p = implied_probabilities(m.odds)
            forecasts["betting_odds"] = (OutcomeForecast(p.p_win, p.p_draw, p.p_loss), False)
        else:
            counts["betting_odds_missing"] += 1

        for model in models:
            if model not in forecasts:
                continue
            forecast, substituted = forecasts[model]
            if substituted:
                counts[f"{model}_substituted"] += 1
            rec = make_record(m, model, forecast, substituted)
            report.records.append(rec)
            per_season.setdefault((m.league, m.season, model), []).append(rec)


def _fit_baselines(prior: Sequence[MatchRecord], seed: int, counts: Counter, league: str, season: int):
    null_rows = build_null_rows(prior, seed)
    try:
        null = fit_ordered_probit(null_rows, names=("home",))
    except FitError as exc:
        raise InsufficientHistoryError(
            f"cannot fit the Null model for {league} {season} from {len(prior)} prior matches: {exc}"
        ) from exc
    tm_rows = build_tm_rows(prior, seed)
    counts["tm_regression_train_skipped"] += len(tm_rows.skipped)
    tm_reg = _fit_or_none(tm_rows, counts, "tm_regression") if len(tm_rows) else None
    if tm_reg is None:
        counts["tm_regression_unavailable_cells"] += 1
    return null, tm_reg


def run_in_season(store: MatchStore, config: ExperimentConfig) -> BacktestReport:
    """Train on the first part of each league-season, forecast the rest."""
    leagues = _leagues(store, config)
    models = [m for m in ALL_MODELS if m in config.models]
    report = BacktestReport("in_season", config=config.to_dict(), leagues=leagues, models=models)
    counts: Counter = Counter()
    per_season: dict = {}
    for lg in leagues:
        for season in _evaluated_seasons(store, config, lg, 1, "in_season"):
            ms = query_matches(store, leagues=[lg], seasons=[season])
            if len(ms) < MIN_SEASON_MATCHES:
                report.absent.append((lg, season, "*", f"only {len(ms)} matches"))
                counts["absent_cells"] += 1
                continue
            cut = in_season_split(ms, config.split_fraction)
            train, test = ms[:cut], ms[cut:]
            prior = query_matches(store, leagues=[lg], before_date=ms[0].date)
            null, tm_reg = _fit_baselines(prior, _seed_for(config.rng_seed, lg, season), counts, lg, season)

            teams = {t for m in ms for t in (m.home_team, m.away_team)}
            bases = rating_vectors(train, teams, config, RATING_MODELS)
            market = _safe_market(team_values(train), teams)
            vecs = dict(bases)
            if "tm_massey" in bases:
                vecs["tm_massey"] = _combine(bases["tm_massey"], market, config.market_mix) if market else None
            probits = {}
            for model, vec in vecs.items():
                if vec is None:
                    continue
                rows = build_rating_rows([m for m in train if m.home_team in vec and m.away_team in vec], vec)
                probit = _fit_or_none(rows, counts, model)
                if probit is not None:
                    probits[model] = probit
            fc = _Forecasters(null, tm_reg, vecs, probits)
            _forecast_matches(report, test, fc, {k: v for k, v in vecs.items() if v is not None},
                              (train, prior), counts, per_season)
    _finish_cells(report, per_season)
    report.records.sort(key=lambda r: (r.model, r.match_id))
    report.counts = dict(sorted(counts.items()))
    return report


def run_out_of_season(store: MatchStore, config: ExperimentConfig) -> BacktestReport:
    """Train on every match before season Y, forecast all of season Y."""
    leagues = _leagues(store, config)
    models = [m for m in ALL_MODELS if m in config.models]
    report = BacktestReport("out_of_season", config=config.to_dict(), leagues=leagues, models=models)
    counts: Counter = Counter()
    per_season: dict = {}
    cache: dict[tuple[str, int], tuple] = {}
    groups = _groups(leagues, config)
    for country, group in sorted(groups.items()):
        for lg in group:
            for season in _evaluated_seasons(store, config, lg, 2, "out_of_season"):
                key = (country, season)
                if key not in cache:
                    current = query_matches(store, leagues=group, seasons=[season])
                    start = min(m.date for m in current)
                    train = query_matches(store, leagues=group, before_date=start)
                    teams = {t for m in train + current for t in (m.home_team, m.away_team)}
                    cache[key] = (train, rating_vectors(train, teams, config, RATING_MODELS))
                    counts["rating_systems"] += 1
                train, bases = cache[key]
                test = query_matches(store, leagues=[lg], seasons=[season])
                if len(test) < MIN_SEASON_MATCHES:
                    report.absent.append((lg, season, "*", f"only {len(test)} matches"))
                    counts["absent_cells"] += 1
                    continue
                prior = [m for m in train if m.league == lg]
                null, tm_reg = _fit_baselines(prior, _seed_for(config.rng_seed, lg, season), counts, lg, season)

                market_by_season = {
                    (lg, s): _safe_market(team_values(ms), {t for m in ms for t in (m.home_team, m.away_team)})
                    for s, ms in _by_season(prior).items()
                }
                probits = {}
                for model, vec in bases.items():
                    rows = _rating_probit_rows(model, prior, vec, market_by_season, config, counts)
                    probit = _fit_or_none(rows, counts, model)
                    if probit is not None:
                        probits[model] = probit
                test_vecs = {k: v for k, v in bases.items() if k != "tm_massey"}
                if "tm_massey" in bases:
                    teams = {t for m in test for t in (m.home_team, m.away_team)}
                    market = _safe_market(team_values(test), teams)
                    if market:
                        test_vecs["tm_massey"] = _combine(bases["tm_massey"], market, config.market_mix)
                fc = _Forecasters(null, tm_reg, test_vecs, probits)
                _forecast_matches(report, test, fc, test_vecs, (train, prior), counts, per_season)
    _finish_cells(report, per_season)
    report.records.sort(key=lambda r: (r.model, r.match_id))
    report.counts = dict(sorted(counts.items()))
    return report


def _by_season(matches: Iterable[MatchRecord]) -> dict[int, list[MatchRecord]]:
    out: dict[int, list[MatchRecord]] = defaultdict(list)
    for m in matches:
        out[m.season].append(m)
    return dict(sorted(out.items()))


RUNNERS = {
    "eos": run_eos_ranking,
    "in_season": run_in_season,
    "out_of_season": run_out_of_season,
}


def run_protocol(store: MatchStore, config: ExperimentConfig, protocol: str) -> BacktestReport:
    try:
        runner = RUNNERS[protocol]
    except KeyError:
        raise ValueError(f"unknown protocol {protocol!r}; valid: {sorted(RUNNERS)}") from None
    return runner(store, config)


# --------------------------------------------------------------------------
# Pairwise comparisons and exclusion


@dataclass(frozen=True)
class Comparison:
    league: str
    model_a: str
    model_b: str
    mean_diff: float
    t: float
    df: int
    p_value: float
    n: int
    ci_low: float
    ci_high: float
    degenerate: bool

    @property
    def significance(self) -> str:
        return significance_code(self.p_value)


def compare_models(report: BacktestReport, model_a: str, model_b: str, league: str) -> Comparison | None:
    """Paired t-test of per-game Brier scores (a - b) over the matches both models scored."""
    a = {r.match_id: r.score for r in report.records_for(model_a, league)}
    b = {r.match_id: r.score for r in report.records_for(model_b, league)}
    ids = sorted(a.keys() & b.keys())
    if len(ids) < 2:
        return None
    res = paired_t_test([a[i] for i in ids], [b[i] for i in ids])
    lo, hi = res.confidence_interval(0.95)
    return Comparison(league, model_a, model_b, res.mean_diff, res.t, res.df, res.p_value, res.n,
                      lo, hi, res.degenerate)


def comparison_table(report: BacktestReport, pairs: Sequence[tuple[str, str]] = COMPARISONS) -> list[Comparison]:
    out = []
    for a, b in pairs:
        if a not in report.models or b not in report.models:
            continue
        for lg in report.leagues:
            c = compare_models(report, a, b, lg)
            if c is not None:
                out.append(c)
    return out


def exclude_teams(store: MatchStore, excluded: Iterable[str]) -> MatchStore:
    excluded = frozenset(excluded)
    return MatchStore(m for m in store if not m.involves(excluded))


@dataclass
class ExclusionResult:
    before: BacktestReport
    after: BacktestReport
    excluded: list[str]

    def differences(self) -> list[tuple[str, Comparison]]:
        """Model - Null comparisons, tagged "before" or "after"."""
        out = []
        for phase, report in (("before", self.before), ("after", self.after)):
            for model in report.models:
                if model == "null":
                    continue
                for lg in report.leagues:
                    c = compare_models(report, model, "null", lg)
                    if c is not None:
                        out.append((phase, c))
        return out


def run_exclusion(
    store: MatchStore,
    config: ExperimentConfig,
    excluded: Iterable[str] | None = None,
    protocol: str = "out_of_season",
) -> ExclusionResult:
    """Run a Brier protocol on the full store and on the store without ``excluded`` teams."""
    if protocol == "eos":
        raise ValueError("the exclusion comparison needs a Brier protocol")
    excluded = sorted(set(config.excluded_teams if excluded is None else excluded))
    unknown = sorted(set(excluded) - store.teams)
    if unknown:
        raise DataError(f"excluded teams {unknown} never appear in the store")
    before = run_protocol(store, config, protocol)
    reduced = exclude_teams(store, excluded)
    after_cfg = ExperimentConfig.from_dict({**config.to_dict(), "excluded_teams": excluded})
    after = run_protocol(reduced, _lenient(after_cfg, reduced), protocol)
    after.config = after_cfg.to_dict()
    return ExclusionResult(before, after, excluded)


def _lenient(config: ExperimentConfig, store: MatchStore) -> ExperimentConfig:
    # Leagues emptied by the exclusion are dropped; their cells become absent.
    codes = [lg for lg in config.league_codes if lg in store.leagues]
    if codes == config.league_codes:
        return config
    d = config.to_dict()
    d["leagues"] = [lg for lg in d["leagues"] if lg["code"] in codes]
    return ExperimentConfig.from_dict(d)


# --------------------------------------------------------------------------
# Emission


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(float(x))
    return str(x)


def metrics_csv(report: BacktestReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["league", "season", "model", "metric", "value", "n"])
    for c in report.cells:
        w.writerow([c.league, c.season, c.model, c.metric, _fmt(float(c.value)), c.n])
    return buf.getvalue()


def read_metrics_csv(text_or_path) -> list[MetricCell]:
    text = Path(text_or_path).read_text() if isinstance(text_or_path, Path) else text_or_path
    cells = []
    for row in csv.DictReader(io.StringIO(text)):
        season = row["season"]
        cells.append(MetricCell(row["league"], season if season == "all" else int(season), row["model"],
                                row["metric"], float(row["value"]), int(row["n"])))
    return cells


def records_csv(records: Sequence[BrierRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["match_id", "league", "season", "model", "p_win", "p_draw", "p_loss", "outcome",
                "brier", "substituted"])
    for r in records:
        w.writerow([r.match_id, r.league, r.season, r.model, _fmt(r.p_win), _fmt(r.p_draw),
                    _fmt(r.p_loss), r.outcome.name, _fmt(r.score), int(r.substituted)])
    return buf.getvalue()


def read_records_csv(path) -> list[BrierRecord]:
    from .dataset import Outcome

    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(BrierRecord(row["match_id"], row["league"], int(row["season"]), row["model"],
                                   float(row["p_win"]), float(row["p_draw"]), float(row["p_loss"]),
                                   Outcome[row["outcome"]], float(row["brier"]), row["substituted"] == "1"))
    return out


def comparisons_csv(comparisons: Sequence[Comparison], phase: str | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    head = ["league", "comparison", "mean_diff", "t", "df", "p_value", "n", "ci_low", "ci_high", "significance"]
    w.writerow((["phase"] if phase is not None else []) + head)
    for c in comparisons:
        row = [c.league, f"{c.model_a} - {c.model_b}", _fmt(c.mean_diff), _fmt(float(c.t)), c.df,
               _fmt(c.p_value), c.n, _fmt(c.ci_low), _fmt(c.ci_high), c.significance]
        w.writerow(([phase] if phase is not None else []) + row)
    return buf.getvalue()


def _md_table(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    lines += ["| " + " | ".join(r) + " |" for r in rows]
    return "\n".join(lines) + "\n"


def report_markdown(report: BacktestReport) -> str:
    summary = report.summary()
    title = {
        "eos": "Average Kendall's tau of end-of-season ranking predictions",
        "in_season": "Average in-season Brier score",
        "out_of_season": "Average out-of-season Brier score",
    }[report.protocol]
    seasons = sorted({c.season for c in report.season_cells()})
    span = f" ({seasons[0]}-{seasons[-1]})" if seasons else ""
    rows = []
    for model in report.models:
        row = [MODEL_LABELS.get(model, model)]
        for lg in report.leagues:
            cell = summary.get((lg, model))
            row.append("-" if cell is None else f"{cell.value:.4f}")
        rows.append(row)
    out = f"## {title}{span}\n\n" + _md_table([""] + list(report.leagues), rows)
    if report.protocol != "eos":
        comps = comparison_table(report)
        if comps:
            by = {(c.model_a, c.model_b, c.league): c for c in comps}
            rows = []
            for a, b in COMPARISONS:
                if a not in report.models or b not in report.models:
                    continue
                row = [f"{MODEL_LABELS[a]} - {MODEL_LABELS[b]}"]
                for lg in report.leagues:
                    c = by.get((a, b, lg))
                    row.append("-" if c is None else f"{c.mean_diff:.4f}{c.significance}")
                rows.append(row)
            out += ("\n## Paired t-tests on per-game Brier score\n\n"
                    + _md_table([""] + list(report.leagues), rows)
                    + "\n`***` p < 0.01, `**` p < 0.05, `*` p < 0.1\n")
    if report.counts:
        out += "\n## Counts\n\n" + _md_table(["count", "value"], [[k, str(v)] for k, v in report.counts.items()])
    return out


def exclusion_markdown(result: ExclusionResult) -> str:
    diffs = result.differences()
    by = {(phase, c.model_a, c.league): c for phase, c in diffs}
    models = [m for m in result.before.models if m != "null"]
    header = ["league"] + [f"{MODEL_LABELS[m]} {p}" for m in models for p in ("before", "after")]
    rows = []
    for lg in result.before.leagues:
        row = [lg]
        for m in models:
            for p in ("before", "after"):
                c = by.get((p, m, lg))
                row.append("-" if c is None else f"{c.mean_diff:.4f}{c.significance}")
        rows.append(row)
    excluded = ", ".join(result.excluded) or "(none)"
    return (f"## Brier difference versus Null before and after excluding {excluded}\n\n"
            + _md_table(header, rows))


def manifest(report_or_result, config: ExperimentConfig, store: MatchStore, command: str) -> dict:
    return {
        "artifact": "leaguecast",
        "version": __version__,
        "command": command,
        "config": config.to_dict(),
        "store_sha256": store.checksum(),
        "n_matches": len(store),
    }


def _write(path: Path, text: str) -> None:
    path.write_bytes(text.encode("utf-8"))


def emit_report(report: BacktestReport, out_dir: str | Path, formats: Sequence[str] = ("csv", "markdown")) -> list[Path]:
    """Write a report's CSV and/or markdown files; returns the paths written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    unknown = set(formats) - {"csv", "markdown"}
    if unknown:
        raise ValueError(f"unknown formats {sorted(unknown)}")
    if "csv" in formats:
        written.append(out / "metrics.csv")
        _write(written[-1], metrics_csv(report))
        if report.records:
            written.append(out / "records.csv")
            _write(written[-1], records_csv(report.records))
            written.append(out / "ttests.csv")
            _write(written[-1], comparisons_csv(comparison_table(report)))
        written.append(out / "counts.json")
        _write(written[-1], json.dumps({"counts": report.counts, "absent": [list(a) for a in report.absent]},
                                       indent=2, sort_keys=True) + "\n")
    if "markdown" in formats:
        written.append(out / "report.md")
        _write(written[-1], report_markdown(report))
    return written


def emit_exclusion(result: ExclusionResult, out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    written = emit_report(result.before, out / "before") + emit_report(result.after, out / "after")
    buf = io.StringIO()
    diffs = result.differences()
    text = comparisons_csv([c for p, c in diffs if p == "before"], "before")
    text += "".join(comparisons_csv([c for p, c in diffs if p == "after"], "after").splitlines(True)[1:])
    buf.write(text)
    _write(out / "exclusion.csv", buf.getvalue())
    _write(out / "exclusion.md", exclusion_markdown(result))
    return written + [out / "exclusion.csv", out / "exclusion.md"]


def write_manifest(path: str | Path, data: dict) -> None:
    _write(Path(path), json.dumps(data, indent=2, sort_keys=True) + "\n")


def earliest_training_date(matches: Sequence[MatchRecord]) -> date | None:
    return min((m.date for m in matches), default=None)
