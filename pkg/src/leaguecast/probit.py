"""Ordered probit by Newton-Raphson, plus the design rows for each forecaster.

Outcomes are coded from the reference team's view: 0 = loss, 1 = draw,
2 = win. The latent value is x.beta + N(0, 1); a loss falls below c1, a win
above c2.
"""

from __future__ import annotations

import json
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy.special import log_ndtr, ndtr, ndtri

from .dataset import MatchRecord
from .errors import FitError, RatingError
from .ratings import RatingVector

LOSS, DRAW, WIN = 0, 1, 2
MIN_ROWS = 30
MAX_ITER = 200
LL_TOL = 1e-10
STEP_TOL = 1e-8
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_P_FLOOR = 1e-300


@dataclass(frozen=True)
class ProbitRow:
    covariates: tuple[float, ...]
    outcome: int
    match_id: str = ""
    reference_home: bool = True


@dataclass
class DesignRows:
    """Rows built from matches plus the ids of matches that could not be used."""

    rows: list[ProbitRow]
    skipped: list[str] = field(default_factory=list)

    def __iter__(self):
        return iter(self.rows)

    def __len__(self) -> int:
        return len(self.rows)

    def __getitem__(self, i):
        return self.rows[i]

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return rows_to_arrays(self.rows)


@dataclass(frozen=True)
class OutcomeForecast:
    """Probabilities for the reference (home) team: win, draw, loss."""

    p_win: float
    p_draw: float
    p_loss: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.p_win, self.p_draw, self.p_loss)

    def flipped(self) -> OutcomeForecast:
        return OutcomeForecast(self.p_loss, self.p_draw, self.p_win)


@dataclass
class ProbitModel:
    beta: np.ndarray
    cuts: tuple[float, float]
    loglik: float
    iterations: int
    converged: bool
    n_obs: int = 0
    history: list[float] = field(default_factory=list)
    names: tuple[str, ...] = ()

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=float)
        if not self.cuts[0] < self.cuts[1]:
            raise ValueError(f"cuts must be increasing, got {self.cuts}")

    def to_dict(self) -> dict:
        return {
            "names": list(self.names),
            "beta": [float(b) for b in self.beta],
            "cuts": [float(c) for c in self.cuts],
            "loglik": float(self.loglik),
            "iterations": self.iterations,
            "converged": self.converged,
            "n_obs": self.n_obs,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> ProbitModel:
        return cls(np.array(d["beta"]), tuple(d["cuts"]), d["loglik"], d["iterations"],
                   d["converged"], d.get("n_obs", 0), [], tuple(d.get("names", ())))


def rows_to_arrays(rows: Sequence[ProbitRow]) -> tuple[np.ndarray, np.ndarray]:
    if not rows:
        return np.zeros((0, 0)), np.zeros(0, dtype=int)
    X = np.array([r.covariates for r in rows], dtype=float)
    y = np.array([r.outcome for r in rows], dtype=int)
    return X, y


# --------------------------------------------------------------------------
# Likelihood


def _norm_logpdf(z):
    return -0.5 * z * z - _LOG_SQRT_2PI


def _interval_logprob(a, b):
    """log(Phi(a) - Phi(b)) for a > b, accurate in both tails."""
    out = np.empty_like(a)
    lower_tail = np.isneginf(b)
    upper_tail = np.isposinf(a)
    mid = ~(lower_tail | upper_tail)
    out[lower_tail] = log_ndtr(a[lower_tail])
    out[upper_tail] = log_ndtr(-b[upper_tail])
    if mid.any():
        am, bm = a[mid], b[mid]
        right = bm > 0
        p = np.where(right, ndtr(-bm) - ndtr(-am), ndtr(am) - ndtr(bm))
        out[mid] = np.log(np.maximum(p, _P_FLOOR))
    return out


def _unpack(theta, k):
    beta = theta[:k]
    c1 = theta[k]
    e = math.exp(theta[k + 1])
    return beta, c1, c1 + e, e


def _bounds(y, c1, c2):
    upper = np.where(y == LOSS, c1, np.where(y == DRAW, c2, np.inf))
    lower = np.where(y == LOSS, -np.inf, np.where(y == DRAW, c1, c2))
    return upper, lower


def loglik(theta, X, y) -> float:
    """Log-likelihood at theta = (beta, c1, log(c2 - c1))."""
    k = X.shape[1]
    beta, c1, c2, _ = _unpack(np.asarray(theta, dtype=float), k)
    eta = X @ beta
    upper, lower = _bounds(y, c1, c2)
    return float(_interval_logprob(upper - eta, lower - eta).sum())


def loglik_derivatives(theta, X, y, hessian: bool = True):
    """Log-likelihood, analytic gradient and (optionally) Hessian in theta."""
    theta = np.asarray(theta, dtype=float)
    n, k = X.shape
    beta, c1, c2, e = _unpack(theta, k)
    eta = X @ beta
    upper, lower = _bounds(y, c1, c2)
    a = upper - eta
    b = lower - eta
    logp = _interval_logprob(a, b)

    fa = np.isfinite(a)
    fb = np.isfinite(b)
    a0 = np.where(fa, a, 0.0)
    b0 = np.where(fb, b, 0.0)
    # phi/P computed in log space so the tails do not produce 0/0.
    ga = np.where(fa, np.exp(_norm_logpdf(a0) - logp), 0.0)
    gb = np.where(fb, -np.exp(_norm_logpdf(b0) - logp), 0.0)

    # d a / d theta and d b / d theta.
    p = k + 2
    Ja = np.zeros((n, p))
    Jb = np.zeros((n, p))
    Ja[:, :k] = -X
    Jb[:, :k] = -X
    Ja[:, k] = fa
    Jb[:, k] = fb
    Ja[:, k + 1] = np.where(y == DRAW, e, 0.0)
    Jb[:, k + 1] = np.where(y == WIN, e, 0.0)

    grad = Ja.T @ ga + Jb.T @ gb
    ll = float(logp.sum())
    if not hessian:
        return ll, grad

    haa = -a0 * ga - ga * ga
    hbb = -b0 * gb - gb * gb
    hab = -ga * gb
    H = (Ja.T * haa) @ Ja + (Jb.T * hbb) @ Jb
    cross = (Ja.T * hab) @ Jb
    H += cross + cross.T
    H[k + 1, k + 1] += e * (np.where(y == DRAW, ga, 0.0).sum() + np.where(y == WIN, gb, 0.0).sum())
    return ll, grad, H


# --------------------------------------------------------------------------
# Fitting


def _check_fit_inputs(X, y):
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError("X must be (n, k) and y of length n")
    if X.shape[0] < MIN_ROWS:
        raise FitError(f"ordered probit needs at least {MIN_ROWS} rows, got {X.shape[0]}")
    counts = np.bincount(y, minlength=3)
    if counts.size != 3 or np.any(counts == 0):
        raise FitError(f"every outcome category must occur; counts (loss, draw, win) = {counts.tolist()}")
    if not np.all(np.isfinite(X)):
        raise FitError("covariates must be finite")
    return counts


def fit_ordered_probit(rows: Sequence[ProbitRow] | DesignRows, names: Sequence[str] = ()) -> ProbitModel:
    X, y = rows_to_arrays(list(rows))
    if X.size == 0 and len(rows) == 0:
        raise FitError("no rows to fit")
    return fit_ordered_probit_arrays(X, y, names=names)


def fit_ordered_probit_arrays(X, y, names: Sequence[str] = ()) -> ProbitModel:
    """Maximum likelihood by Newton-Raphson with step halving.

    Cuts are parameterized as (c1, c1 + exp(delta)) so they stay ordered.
    Covariate columns that are identically zero carry no information and
    are held at beta = 0.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if X.ndim == 1:
        X = X[:, None]
    counts = _check_fit_inputs(X, y)
    k_all = X.shape[1]
    active = np.any(X != 0.0, axis=0)
    Xa = X[:, active]
    k = Xa.shape[1]

    freq = np.cumsum(counts) / counts.sum()
    c1, c2 = float(ndtri(freq[0])), float(ndtri(freq[1]))
    theta = np.concatenate([np.zeros(k), [c1, math.log(c2 - c1)]])

    ll, grad, H = loglik_derivatives(theta, Xa, y)
    history = [ll]
    converged = False
    it = 0
    for it in range(1, MAX_ITER + 1):
        step = _newton_step(grad, H)
        t = 1.0
        new_ll = -np.inf
        while t > 1e-12:
            cand = theta + t * step
            new_ll = loglik(cand, Xa, y)
            if np.isfinite(new_ll) and new_ll >= ll:
                break
            t *= 0.5
        if not (np.isfinite(new_ll) and new_ll >= ll):
            # No ascent along the step: we are at the optimum up to rounding.
            converged = bool(np.max(np.abs(grad)) < 1e-6 * max(1.0, abs(ll)))
            break
        moved = np.max(np.abs(t * step))
        improvement = new_ll - ll
        theta = cand
        ll, grad, H = loglik_derivatives(theta, Xa, y)
        history.append(ll)
        if improvement < LL_TOL or moved < STEP_TOL:
            converged = True
            break

    beta_full = np.zeros(k_all)
    beta_full[active] = theta[:k]
    c1 = float(theta[k])
    c2 = c1 + math.exp(theta[k + 1])
    diagnostics = {"loglik": ll, "iterations": it, "gradient": grad.tolist(),
                   "beta": beta_full.tolist(), "cuts": [c1, c2]}
    if not converged or not np.all(np.isfinite(theta)):
        raise FitError("ordered probit did not converge (possible separation)", diagnostics)
    return ProbitModel(beta_full, (c1, c2), ll, it, True, int(y.size), history, tuple(names))


def _newton_step(grad, H):
    # Ascent direction from -H; damp toward gradient ascent when -H is not
    # positive definite (can happen far from the optimum in the delta coordinate).
    neg = -H
    mu = 0.0
    scale = max(1.0, float(np.max(np.abs(np.diag(neg)))))
    for _ in range(30):
        try:
            L = np.linalg.cholesky(neg + mu * np.eye(len(grad)))
        except np.linalg.LinAlgError:
            mu = max(mu * 10.0, 1e-8 * scale)
            continue
        z = np.linalg.solve(L, grad)
        return np.linalg.solve(L.T, z)
    return grad / max(1.0, float(np.max(np.abs(grad))))


# --------------------------------------------------------------------------
# Prediction


def _interval_prob(upper, lower):
    if lower > 0:
        return float(ndtr(-lower) - ndtr(-upper))
    return float(ndtr(upper) - ndtr(lower))


def predict_outcome(model: ProbitModel, covariates) -> OutcomeForecast:
    x = np.atleast_1d(np.asarray(covariates, dtype=float))
    if x.shape != model.beta.shape:
        raise ValueError(f"expected {model.beta.size} covariates, got {x.size}")
    eta = float(x @ model.beta)
    c1, c2 = model.cuts
    p_loss = float(ndtr(c1 - eta))
    p_win = float(ndtr(eta - c2))
    p_draw = _interval_prob(c2 - eta, c1 - eta)
    probs = np.clip([p_win, p_draw, p_loss], 1e-15, None)
    probs = probs / probs.sum()
    return OutcomeForecast(float(probs[0]), float(probs[1]), float(probs[2]))


# --------------------------------------------------------------------------
# Design rows


def _orientation(matches: Sequence[MatchRecord], seed: int) -> np.ndarray:
    """True where the home team is the reference team; one fair coin per match."""
    rng = np.random.default_rng(seed)
    return rng.random(len(matches)) < 0.5


def _oriented_outcome(m: MatchRecord, home_ref: bool) -> int:
    o = int(m.outcome)  # AWAY_WIN=0, DRAW=1, HOME_WIN=2 from the home side
    return o if home_ref else 2 - o


def build_null_rows(matches: Sequence[MatchRecord], seed: int) -> DesignRows:
    """Venue-only rows with a seeded random choice of reference team."""
    home_ref = _orientation(matches, seed)
    rows = [
        ProbitRow((1.0 if h else -1.0,), _oriented_outcome(m, h), m.match_id, bool(h))
        for m, h in zip(matches, home_ref)
    ]
    return DesignRows(rows)


def build_tm_rows(matches: Sequence[MatchRecord], seed: int) -> DesignRows:
    """Venue plus log lineup-value difference; matches without both values are skipped."""
    home_ref = _orientation(matches, seed)
    rows, skipped = [], []
    for m, h in zip(matches, home_ref):
        if not m.has_values:
            skipped.append(m.match_id)
            continue
        diff = math.log(m.home_lineup_value) - math.log(m.away_lineup_value)
        sign = 1.0 if h else -1.0
        rows.append(ProbitRow((sign, sign * diff), _oriented_outcome(m, h), m.match_id, bool(h)))
    return DesignRows(rows, skipped)


def build_rating_rows(matches: Sequence[MatchRecord], ratings: RatingVector) -> DesignRows:
    """Home-referenced rows whose single covariate is r_home - r_away."""
    missing = sorted({t for m in matches for t in (m.home_team, m.away_team) if t not in ratings})
    if missing:
        raise RatingError(f"teams without {ratings.method} ratings: {missing}")
    rows = [
        ProbitRow((ratings[m.home_team] - ratings[m.away_team],), int(m.outcome), m.match_id, True)
        for m in matches
    ]
    return DesignRows(rows)


def null_covariates(match: MatchRecord) -> tuple[float]:
    return (1.0,)


def tm_covariates(match: MatchRecord) -> tuple[float, float] | None:
    if not match.has_values:
        return None
    return (1.0, math.log(match.home_lineup_value) - math.log(match.away_lineup_value))


def rating_covariates(match: MatchRecord, ratings: RatingVector) -> tuple[float]:
    return (ratings[match.home_team] - ratings[match.away_team],)


def empirical_forecast(rows: Iterable[ProbitRow]) -> OutcomeForecast:
    counts = np.bincount([r.outcome for r in rows], minlength=3).astype(float)
    p = counts / counts.sum()
    return OutcomeForecast(p[WIN], p[DRAW], p[LOSS])
