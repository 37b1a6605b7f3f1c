"""Soccer team ratings and match-outcome forecasting with backtests."""

from __future__ import annotations

__version__ = "0.1.0"

from .backtest import (
    comparison_table,
    run_eos_ranking,
    run_exclusion,
    run_in_season,
    run_out_of_season,
    run_protocol,
)
from .dataset import ExperimentConfig, MatchRecord, MatchStore, Outcome, ingest_matches, query_matches
from .errors import DataError, FitError, InsufficientHistoryError, LeaguecastError, RatingError
from .evaluation import brier_score, kendall_tau, paired_t_test
from .probit import OutcomeForecast, ProbitModel, fit_ordered_probit, predict_outcome
from .ratings import RatingVector, colley_rate, combine_with_market, massey_rate, rank_teams, time_weight

__all__ = [
    "DataError",
    "ExperimentConfig",
    "FitError",
    "InsufficientHistoryError",
    "LeaguecastError",
    "MatchRecord",
    "MatchStore",
    "Outcome",
    "OutcomeForecast",
    "ProbitModel",
    "RatingError",
    "RatingVector",
    "brier_score",
    "colley_rate",
    "combine_with_market",
    "comparison_table",
    "fit_ordered_probit",
    "ingest_matches",
    "kendall_tau",
    "massey_rate",
    "paired_t_test",
    "predict_outcome",
    "query_matches",
    "rank_teams",
    "run_eos_ranking",
    "run_exclusion",
    "run_in_season",
    "run_out_of_season",
    "run_protocol",
    "time_weight",
]
