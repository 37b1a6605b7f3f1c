from __future__ import annotations

from datetime import date

import pytest

from helpers import match
from leaguecast.dataset import (
    MATCH_COLUMNS,
    ExperimentConfig,
    MatchStore,
    Outcome,
    dataset_summary,
    dump_config,
    final_table,
    ingest_matches,
    league_table,
    load_config,
    query_matches,
    summary_totals,
    write_matches,
)
from leaguecast.errors import DataError
from leaguecast.simulate import round_robin

HEADER = ",".join(MATCH_COLUMNS)


def write_csv(path, rows, header=HEADER):
    path.write_text("\n".join([header] + rows) + "\n")
    return path


def season_rows(teams, season=2015, league="E0"):
    rows = []
    for k, rnd in enumerate(round_robin(teams)):
        day = date(season, 8, 8).toordinal() + 7 * k
        for h, a in rnd:
            d = date.fromordinal(day).isoformat()
            rows.append(f"{league},{season},{d},{h},{a},2,1,2.1,3.4,3.6,4.5e7,3.1e7")
    return rows


def test_ingest_full_season(tmp_path):
    teams = [f"Club{i:02d}" for i in range(20)]
    path = write_csv(tmp_path / "E0_2015.csv", season_rows(teams))
    records = ingest_matches(path, "E0", 2015)
    assert len(records) == 380
    assert all(r.odds is not None for r in records)
    assert records == sorted(records, key=lambda r: (r.date, r.match_id))


def test_ingest_header_only(tmp_path):
    assert ingest_matches(write_csv(tmp_path / "x.csv", [])) == []


def test_ingest_missing_header_columns(tmp_path):
    path = write_csv(tmp_path / "x.csv", ["2015-08-08,A,B"], header="date,home_team,away_team")
    with pytest.raises(DataError, match="home_goals") as exc:
        ingest_matches(path, "E0", 2015)
    assert exc.value.line == 1


def test_ingest_self_match_reports_line(tmp_path):
    rows = ["E0,2015,2015-08-08,A,B,1,0,,,,,", "E0,2015,2015-08-15,C,C,1,0,,,,,"]
    with pytest.raises(DataError) as exc:
        ingest_matches(write_csv(tmp_path / "x.csv", rows))
    assert exc.value.line == 3 and exc.value.column == "away_team"
    assert "line 3" in str(exc.value)


@pytest.mark.parametrize(
    "row, column",
    [
        ("E0,2015,08/08/2015,A,B,1,0,,,,,", "date"),
        ("E0,2015,2015-08-08,A,B,-1,0,,,,,", "home_goals"),
        ("E0,2015,2015-08-08,A,B,1,x,,,,,", "away_goals"),
        ("E0,2015,2015-08-08,A,B,1,0,0.9,3,3,,", "odds_home"),
        ("E0,2015,2015-08-08,A,B,1,0,,,,0,", "home_lineup_value"),
        ("E0,2015,2014-08-08,A,B,1,0,,,,,", "date"),
    ],
)
def test_ingest_row_errors_name_column(tmp_path, row, column):
    with pytest.raises(DataError) as exc:
        ingest_matches(write_csv(tmp_path / "x.csv", [row]))
    assert exc.value.line == 2 and exc.value.column == column


def test_ingest_duplicate_ids(tmp_path):
    rows = ["E0,2015,2015-08-08,A,B,1,0,,,,,"] * 2
    with pytest.raises(DataError, match="duplicate"):
        ingest_matches(write_csv(tmp_path / "x.csv", rows))


def test_partial_odds_become_missing(tmp_path):
    rec = ingest_matches(write_csv(tmp_path / "x.csv", ["E0,2015,2015-08-08,A,B,1,0,2.0,,4.0,,"]))[0]
    assert rec.odds is None and rec.outcome is Outcome.HOME_WIN


def test_column_map_reads_raw_names(tmp_path):
    header = "Div,Date,HomeTeam,AwayTeam,FTHG,FTAG,B365H,B365D,B365A"
    path = write_csv(tmp_path / "raw.csv", ["E0,08/08/2015,A,B,0,0,2.5,3.2,3.0"], header=header)
    cmap = {"league": "Div", "date": "Date", "home_team": "HomeTeam", "away_team": "AwayTeam",
            "home_goals": "FTHG", "away_goals": "FTAG", "odds_home": "B365H", "odds_draw": "B365D",
            "odds_away": "B365A"}
    rec = ingest_matches(path, season=2015, column_map=cmap, date_format="%d/%m/%Y")[0]
    assert rec.date == date(2015, 8, 8) and rec.odds.draw == 3.2 and rec.outcome is Outcome.DRAW


def test_store_round_trip_and_checksum(tmp_path):
    ms = [match("A", "B", 2, 1, 0, odds=(1.9, 3.5, 4.2), values=(1.5e7, 9.25e6)), match("B", "A", 0, 0, 7)]
    store = MatchStore(ms)
    digest = store.save(tmp_path / "store.csv")
    again = MatchStore.load(tmp_path / "store.csv")
    assert again.matches == store.matches
    assert again.checksum() == digest == store.checksum()
    assert (tmp_path / "store.csv.sha256").read_text().startswith(digest)


def test_store_duplicates_across_files_name_both(tmp_path):
    row = ["E0,2015,2015-08-08,A,B,1,0,,,,,"]
    a = write_csv(tmp_path / "E0_2015.csv", row)
    b = write_csv(tmp_path / "copy.csv", row)
    with pytest.raises(DataError) as exc:
        MatchStore.from_files([a, b])
    assert "E0_2015.csv" in str(exc.value) and "copy.csv" in str(exc.value)


def test_file_name_declares_league_season(tmp_path):
    path = write_csv(tmp_path / "SC0_2016.csv", [",,2016-09-01,A,B,1,0,,,,,"])
    store = MatchStore.from_files([path])
    assert store.leagues == ["SC0"] and store.seasons() == [2016]


# --------------------------------------------------------------------------
# Queries and summaries


def three_team_store():
    ms = [match(h, a, 1, 0, 7 * k) for k, rnd in enumerate(round_robin(["A", "B", "C"])) for h, a in rnd]
    return MatchStore(ms)


def test_query_exclude_team():
    store = three_team_store()
    assert len(store) == 6
    left = query_matches(store, exclude_teams={"A"})
    assert len(left) == 2 and all({m.home_team, m.away_team} == {"B", "C"} for m in left)


def test_query_identity_and_unknown_league():
    store = three_team_store()
    assert query_matches(store) == list(store.matches)
    with pytest.raises(DataError, match="XX"):
        query_matches(store, leagues=["XX"])


def test_query_before_date():
    ms = [match("A", "B", 1, 0, 0, season=s) for s in (2012, 2013, 2014)]
    got = query_matches(MatchStore(ms), before_date=date(2014, 7, 1))
    assert [m.season for m in got] == [2012, 2013]


def test_summary_counts():
    teams = ["A", "B", "C", "D"]
    pairs = [(h, a) for h in teams for a in teams if h != a][:10]
    ms = [match(h, a, 1, 1, k) for k, (h, a) in enumerate(pairs)]
    totals = summary_totals(MatchStore(ms))
    assert totals == {"matches": 10, "teams": 4}
    assert dataset_summary(ms)[0].draw_rate == 1.0
    assert summary_totals(MatchStore()) == {"matches": 0, "teams": 0}


def test_final_table_tiebreaks():
    # A and B level on points; B has the better goal difference.
    ms = [match("A", "C", 1, 0, 0), match("B", "C", 3, 0, 1), match("A", "B", 0, 0, 2)]
    assert final_table(ms) == ["B", "A", "C"]
    assert league_table(ms)["A"]["points"] == 4


# --------------------------------------------------------------------------
# Config


def test_config_yaml_round_trip(tmp_path):
    cfg = ExperimentConfig(leagues=[{"code": "E0", "tier": 1, "country": "ENG"}], seasons=(2012, 2014),
                           excluded_teams=["Man City", "Arsenal"])
    path = tmp_path / "cfg.yaml"
    path.write_text(dump_config(cfg))
    assert load_config(path) == cfg
    assert cfg.excluded_teams == ["Arsenal", "Man City"]


@pytest.mark.parametrize("bad", [{"split_fraction": 1.0}, {"models": ["elo"]}, {"seasons": [2015, 2012]},
                                 {"colley_draws": "third"}, {"nonsense": 1}])
def test_config_validation(bad):
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict(bad)


def test_write_matches_is_deterministic(tmp_path):
    ms = list(three_team_store())
    assert write_matches(ms, tmp_path / "a.csv") == write_matches(ms, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
