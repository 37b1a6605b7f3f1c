"""Command-line entry point.

Exit codes: 0 on success, 2 for usage or data errors, 3 when an experiment
is infeasible with the available history. Data goes to stdout, diagnostics
to stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
from datetime import date, datetime
from pathlib import Path

from . import __version__
from .backtest import (
    COMPARISONS,
    comparisons_csv,
    BacktestReport,
    comparison_table,
    emit_exclusion,
    emit_report,
    manifest,
    read_records_csv,
    records_csv,
    run_exclusion,
    run_protocol,
    write_manifest,
)
from .dataset import (
    ExperimentConfig,
    LeagueSpec,
    MatchStore,
    dataset_summary,
    dump_config,
    load_config,
    query_matches,
    summary_totals,
)
from .errors import DataError, FitError, InsufficientHistoryError, RatingError
from .ratings import colley_rate, combine_with_market, massey_rate, ratings_to_csv, time_weights
from .valuation import compare_transforms, market_vector, team_values

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3

STORE_NAME = "store.csv"
RATE_METHODS = ("colley", "time-colley", "massey", "tm-massey")
CLI_PROTOCOLS = ("eos", "in-season", "out-of-season", "exclusion")


class UsageError(Exception):
    pass


def _err(msg: str) -> None:
    print(f"leaguecast: {msg}", file=sys.stderr)


# --------------------------------------------------------------------------
# Shared loading


def _load_config(args) -> ExperimentConfig:
    config = load_config(args.config) if args.config else ExperimentConfig()
    d = config.to_dict()
    if getattr(args, "seed", None) is not None:
        d["rng_seed"] = args.seed
    if getattr(args, "leagues", None):
        codes = [c for c in args.leagues.split(",") if c]
        known = {lg["code"]: lg for lg in d["leagues"]}
        d["leagues"] = [known.get(c, {"code": c, "tier": 1, "country": "default"}) for c in codes]
    if getattr(args, "seasons", None):
        d["seasons"] = _parse_season_range(args.seasons)
    if getattr(args, "models", None):
        d["models"] = [m for m in args.models.split(",") if m]
    if getattr(args, "exclude_file", None):
        d["excluded_teams"] = _read_team_list(args.exclude_file)
    return ExperimentConfig.from_dict(d)


def _parse_season_range(text: str) -> list[int]:
    first, _, last = text.partition("-")
    try:
        return [int(first), int(last or first)]
    except ValueError:
        raise UsageError(f"--seasons expects YEAR or FIRST-LAST, got {text!r}") from None


def _read_team_list(path) -> list[str]:
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read exclusion file: {exc}") from None
    return [s.strip() for s in lines if s.strip() and not s.lstrip().startswith("#")]


def _raw_files(data_dir: Path) -> list[Path]:
    return sorted(p for p in data_dir.glob("*.csv") if p.name != STORE_NAME)


def _load_store(args, config: ExperimentConfig) -> MatchStore:
    """A consolidated store file if one exists, otherwise the raw CSVs of the directory."""
    if args.data_dir is None:
        raise UsageError("--data-dir is required")
    data_dir = Path(args.data_dir)
    if data_dir.is_file():
        return MatchStore.load(data_dir)
    if not data_dir.is_dir():
        raise UsageError(f"data directory {data_dir} does not exist")
    if (data_dir / STORE_NAME).exists():
        return MatchStore.load(data_dir / STORE_NAME)
    files = _raw_files(data_dir)
    if not files:
        raise DataError(f"no CSV files in {data_dir}")
    return MatchStore.from_files(files, column_map=config.column_map, date_format=config.date_format)


def _complete_config(config: ExperimentConfig, store: MatchStore) -> ExperimentConfig:
    """Fill in every store league when the config names none, then validate."""
    if not config.leagues:
        d = config.to_dict()
        d["leagues"] = [LeagueSpec(code).__dict__ for code in store.leagues]
        config = ExperimentConfig.from_dict(d)
    config.validate_against(store)
    return config


def _summary_text(store: MatchStore) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    rows = dataset_summary(store)
    seasons = {lg: store.seasons(lg) for lg in store.leagues}
    w.writerow(["league", "seasons", "teams", "matches", "mean_home_goals", "mean_away_goals",
                "draw_rate", "mean_odds_home", "mean_odds_draw", "mean_odds_away", "mean_lineup_value",
                "odds_present", "values_present"])
    for s in rows:
        span = seasons[s.league]
        w.writerow([s.league, f"{span[0]}-{span[-1]}", s.teams, s.matches,
                    _num(s.mean_home_goals), _num(s.mean_away_goals), _num(s.draw_rate),
                    _num(s.mean_odds_home), _num(s.mean_odds_draw), _num(s.mean_odds_away),
                    _num(s.mean_lineup_value), s.odds_present, s.values_present])
    totals = summary_totals(store)
    w.writerow(["TOTAL", "", totals["teams"], totals["matches"]] + [""] * 9)
    return buf.getvalue()


def _num(x) -> str:
    return "" if x is None or x != x else f"{x:.6g}"


# --------------------------------------------------------------------------
# Subcommands


def cmd_ingest(args) -> int:
    config = _load_config(args)
    if args.data_dir is None:
        raise UsageError("--data-dir is required")
    files = _raw_files(Path(args.data_dir))
    if not files:
        raise DataError(f"no CSV files in {args.data_dir}")
    store = MatchStore.from_files(files, column_map=config.column_map, date_format=config.date_format)
    out = Path(args.out_dir or args.data_dir)
    out.mkdir(parents=True, exist_ok=True)
    digest = store.save(out / STORE_NAME)
    _err(f"wrote {len(store)} matches to {out / STORE_NAME} (sha256 {digest[:12]})")
    sys.stdout.write(_summary_text(store))
    return EXIT_OK


def cmd_summary(args) -> int:
    config = _load_config(args)
    store = _load_store(args, config)
    sys.stdout.write(_summary_text(store))
    if args.transforms:
        values = [v for m in store for v in (m.home_lineup_value, m.away_lineup_value) if v is not None]
        if len(values) < 3:
            raise DataError("not enough lineup values to compare transforms")
        w = csv.writer(sys.stdout, lineterminator="\n")
        rows = compare_transforms(values)
        w.writerow(list(rows[0]))
        for r in rows:
            w.writerow([f"{v:.6g}" if isinstance(v, float) else v for v in r.values()])
    return EXIT_OK


def _parse_date(text: str) -> date:
    try:
        return datetime.strptime(text, "%Y-%m-%d").date()
    except ValueError:
        raise UsageError(f"dates must be YYYY-MM-DD, got {text!r}") from None


def cmd_rate(args) -> int:
    if args.method not in RATE_METHODS:
        raise UsageError(f"unknown method {args.method!r}; valid methods: {', '.join(RATE_METHODS)}")
    config = _load_config(args)
    store = _load_store(args, config)
    config = _complete_config(config, store)
    leagues = config.league_codes
    cutoff = _parse_date(args.cutoff) if args.cutoff else None
    train = query_matches(store, leagues=leagues, before_date=cutoff)

    # Ranked teams: those of the requested season, else the latest season with training data.
    all_matches = query_matches(store, leagues=leagues)
    if args.season is not None:
        season = args.season
    elif train:
        season = max(m.season for m in train)
    else:
        season = min(m.season for m in all_matches)
    current = [m for m in all_matches if m.season == season]
    if not current:
        raise DataError(f"season {season} is not in the store")
    membership = {}
    for m in current:
        membership[m.home_team] = m.league
        membership[m.away_team] = m.league
    teams = sorted(membership)

    if args.method == "colley":
        r = colley_rate(train, teams=teams, draws=config.colley_draws)
    elif args.method == "time-colley":
        r = colley_rate(train, time_weights(train) if train else None, teams=teams,
                        draws=config.colley_draws, method="time_colley")
    elif args.method == "massey":
        r = massey_rate(train, teams=teams)
    else:
        base = massey_rate(train, time_weights(train) if train else None, home_advantage=True, teams=teams)
        market = {}
        for lg in sorted(set(membership.values())):
            lg_matches = [m for m in current if m.league == lg]
            lg_teams = sorted(t for t, l in membership.items() if l == lg)
            vals = team_values(lg_matches)
            lacking = [t for t in lg_teams if not vals.get(t)]
            if lacking:
                raise DataError(f"tm-massey needs lineup values; missing for {lacking} in {lg} {season}")
            market.update(market_vector(vals, lg_teams))
        r = combine_with_market(base.subset(teams), market, mix=config.market_mix)

    text = ratings_to_csv(r.subset(teams), membership)
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        lines = text.splitlines(keepends=True)
        header, body = lines[0], lines[1:]
        for lg in sorted(set(membership.values())):
            rows = [ln for ln in body if ln.rstrip("\n").split(",")[3] == lg]
            (out / f"ratings_{lg}_{args.method}.csv").write_text(header + "".join(rows), encoding="utf-8")
        _err(f"wrote ratings for {len(teams)} teams to {out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _protocol(name: str) -> str:
    return name.replace("-", "_")


def cmd_forecast(args) -> int:
    config = _load_config(args)
    store = _load_store(args, config)
    config = _complete_config(config, store)
    protocol = _protocol(args.protocol or "out-of-season")
    if protocol not in ("in_season", "out_of_season"):
        raise UsageError("forecast supports --protocol in-season or out-of-season")
    if args.method:
        d = config.to_dict()
        d["models"] = [args.method.replace("-", "_")]
        config = ExperimentConfig.from_dict(d)
    report = run_protocol(store, config, protocol)
    sys.stdout.write(records_csv(report.records))
    return EXIT_OK


def cmd_backtest(args) -> int:
    config = _load_config(args)
    store = _load_store(args, config)
    config = _complete_config(config, store)
    if args.protocol is None:
        raise UsageError(f"--protocol is required; valid: {', '.join(CLI_PROTOCOLS)}")
    if args.protocol not in CLI_PROTOCOLS:
        raise UsageError(f"unknown protocol {args.protocol!r}; valid: {', '.join(CLI_PROTOCOLS)}")
    out = Path(args.out_dir or "report")
    out.mkdir(parents=True, exist_ok=True)
    command = f"backtest --protocol {args.protocol}"
    if args.protocol == "exclusion":
        base = _protocol(args.base_protocol)
        result = run_exclusion(store, config, protocol=base)
        written = emit_exclusion(result, out)
        command += f" --base-protocol {args.base_protocol}"
    else:
        report = run_protocol(store, config, _protocol(args.protocol))
        written = emit_report(report, out)
    info = manifest(None, config, store, command)
    info["outputs"] = sorted(str(p.relative_to(out)) for p in written)
    write_manifest(out / "manifest.json", info)
    (out / "config.yaml").write_text(dump_config(config), encoding="utf-8")
    for p in written:
        print(p)
    return EXIT_OK


def cmd_compare(args) -> int:
    """Paired t-tests between models from a backtest's per-game records."""
    records_path = Path(args.report) / "records.csv" if Path(args.report).is_dir() else Path(args.report)
    if not records_path.exists():
        raise DataError(f"no records file at {records_path}")
    records = read_records_csv(records_path)
    report = BacktestReport("compare", records=records,
                            leagues=sorted({r.league for r in records}),
                            models=sorted({r.model for r in records}))
    pairs = COMPARISONS
    if args.pair:
        pairs = [tuple(p.split(":", 1)) for p in args.pair]
        bad = [p for p in pairs if len(p) != 2]
        if bad:
            raise UsageError("--pair expects MODEL_A:MODEL_B")
    sys.stdout.write(comparisons_csv(comparison_table(report, pairs)))
    return EXIT_OK


def cmd_simulate(args) -> int:
    """Write a synthetic pyramid as per-league-season CSV files (for demos and tests)."""
    from .dataset import write_matches
    from .simulate import simulate

    sim = simulate(tiers=args.tiers, teams_per_tier=args.teams, seasons=args.n_seasons,
                   seed=args.seed if args.seed is not None else 0)
    out = Path(args.out_dir or "synthetic")
    out.mkdir(parents=True, exist_ok=True)
    groups: dict[tuple[str, int], list] = {}
    for m in sim.matches:
        groups.setdefault((m.league, m.season), []).append(m)
    for (lg, season), ms in sorted(groups.items()):
        write_matches(ms, out / f"{lg}_{season}.csv")
    _err(f"wrote {len(sim.matches)} matches in {len(groups)} files to {out}")
    return EXIT_OK


# --------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML experiment config")
    common.add_argument("--data-dir", help="directory of match CSVs or of an ingested store.csv")
    common.add_argument("--out-dir", help="output directory")
    common.add_argument("--seed", type=int, help="override rng_seed")
    common.add_argument("--leagues", help="comma-separated league codes (overrides config)")
    common.add_argument("--seasons", help="evaluated seasons, YEAR or FIRST-LAST")
    common.add_argument("--exclude-file", help="file listing excluded teams, one per line")

    parser = argparse.ArgumentParser(prog="leaguecast", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="validate CSVs and write a consolidated store")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("summary", parents=[common], help="per-league dataset summary")
    p.add_argument("--transforms", action="store_true", help="also compare lineup-value transforms")
    p.set_defaults(func=cmd_summary)

    p = sub.add_parser("rate", parents=[common], help="rate teams and print ranked ratings")
    p.add_argument("--method", required=True, help=f"one of {', '.join(RATE_METHODS)}")
    p.add_argument("--cutoff", help="use matches strictly before this date (YYYY-MM-DD)")
    p.add_argument("--season", type=int, help="season whose teams are ranked")
    p.set_defaults(func=cmd_rate)

    p = sub.add_parser("forecast", parents=[common], help="per-match forecasts and Brier scores")
    p.add_argument("--protocol", choices=("in-season", "out-of-season"), default="out-of-season")
    p.add_argument("--method", help="restrict to one model, e.g. massey or betting-odds")
    p.add_argument("--models", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser("backtest", parents=[common], help="run an experiment protocol and write reports")
    p.add_argument("--protocol", help=f"one of {', '.join(CLI_PROTOCOLS)}")
    p.add_argument("--base-protocol", choices=("in-season", "out-of-season"), default="out-of-season",
                   help="protocol used by the exclusion comparison")
    p.add_argument("--models", help="comma-separated model names (overrides config)")
    p.set_defaults(func=cmd_backtest)

    p = sub.add_parser("compare", parents=[common], help="paired t-tests from a backtest's records")
    p.add_argument("--report", required=True, help="backtest output directory or records.csv")
    p.add_argument("--pair", action="append", help="MODEL_A:MODEL_B (repeatable)")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("simulate", parents=[common], help="write a synthetic league pyramid")
    p.add_argument("--tiers", type=int, default=2)
    p.add_argument("--teams", type=int, default=10)
    p.add_argument("--n-seasons", type=int, default=4)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InsufficientHistoryError as exc:
        hint = f" (earliest feasible season: {exc.earliest_feasible})" if exc.earliest_feasible is not None else ""
        _err(f"{exc}{hint}")
        return EXIT_INFEASIBLE
    except BrokenPipeError:
        # Output piped into a closed reader such as `head`.
        sys.stdout = open(os.devnull, "w")
        return EXIT_OK
    except (UsageError, DataError, RatingError, FitError, ValueError, OSError) as exc:
        _err(str(exc))
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
