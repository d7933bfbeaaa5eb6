"""Forecast scoring: MAE, coverage/ACE, CRPS and Diebold-Mariano tests.

CRPS for the Gaussian-mixture predictive density is evaluated in closed
form. The Diebold-Mariano statistic uses an autocovariance-adjusted
variance up to the forecast horizon and the small-sample correction
factor, with p-values from the t distribution.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import ndtr
from scipy.stats import t as student_t

from .bayes_engine import PredictiveMixture
from .predictive import ForecastResult, sign_rest, sign_spread

DEFAULT_ALPHA_GRID = tuple(round(0.05 * k, 2) for k in range(1, 20))


def mae(errors: Sequence[float]) -> float:
    """Mean absolute error of a non-empty error sequence."""
    arr = np.asarray(list(errors), dtype=float)
    if arr.size == 0:
        raise ValueError("mae of an empty sequence")
    return float(np.mean(np.abs(arr)))


# --- coverage ---------------------------------------------------------------


def empirical_coverage(
    results: Sequence[ForecastResult],
    alpha_grid: Sequence[float] = DEFAULT_ALPHA_GRID,
) -> list[tuple[float, float]]:
    """Fraction of forecasts whose truth falls in the alpha-credible HDI set.

    Each forecast must carry its HDI family and true value; for every
    requested credibility the family entry with the nearest alpha is
    used.
    """
    curve = []
    for alpha in alpha_grid:
        hits = 0
        total = 0
        for res in results:
            if res.y_true is None or not res.hdi_family:
                continue
            total += 1
            level = min(res.hdi_family, key=lambda lvl: abs(lvl.alpha - alpha))
            if any(lo <= res.y_true <= hi for lo, hi in level.intervals):
                hits += 1
        if total == 0:
            raise ValueError("no scored forecasts with truth available")
        curve.append((float(alpha), hits / total))
    return curve


def ace(curve: Sequence[tuple[float, float]], signed: bool = False) -> float:
    """Average coverage error over the curve; absolute by default."""
    deviations = [cov - alpha for alpha, cov in curve]
    if signed:
        return float(np.mean(deviations))
    return float(np.mean(np.abs(deviations)))


# --- CRPS -------------------------------------------------------------------


def _expected_abs(mu: np.ndarray, sd: np.ndarray, a: float = 0.0) -> np.ndarray:
    """E|X - a| for X ~ N(mu, sd^2), elementwise; handles sd = 0."""
    mu = np.asarray(mu, dtype=float)
    sd = np.asarray(sd, dtype=float)
    out = np.abs(mu - a)
    positive = sd > 0
    if np.any(positive):
        m = mu[positive] - a
        s = sd[positive]
        z = m / s
        phi = np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
        out = out.copy()
        out[positive] = m * (2 * ndtr(z) - 1) + 2 * s * phi
    return out


def crps(mixture: PredictiveMixture, y_true: float, chunk: int = 256) -> float:
    """Continuous ranked probability score, closed form for the mixture.

    crps = E|Y - y| - 0.5 E|Y1 - Y2| with Y, Y1, Y2 iid from the
    mixture; the pair term runs over all component pairs using
    Y1 - Y2 ~ N(mu_i - mu_j, s_i^2 + s_j^2).
    """
    mu, sd = mixture.means, mixture.stds
    n = len(mu)
    term1 = float(np.mean(_expected_abs(mu, sd, y_true)))
    pair_sum = 0.0
    for i in range(0, n, chunk):
        dmu = mu[i : i + chunk, None] - mu[None, :]
        dsd = np.sqrt(sd[i : i + chunk, None] ** 2 + sd[None, :] ** 2)
        pair_sum += float(_expected_abs(dmu.ravel(), dsd.ravel()).sum())
    term2 = pair_sum / (n * n)
    return term1 - 0.5 * term2


# --- Diebold-Mariano --------------------------------------------------------


@dataclass(frozen=True)
class DmResult:
    statistic: float
    p_value: float
    n: int
    horizon: int


def dm_test(
    loss_a: Sequence[float],
    loss_b: Sequence[float],
    horizon: int = 1,
    one_sided: bool = True,
) -> DmResult:
    """Test of equal predictive accuracy on per-forecast loss series.

    Positive statistics mean loss_a exceeds loss_b. The long-run
    variance includes autocovariances up to horizon-1 and the statistic
    carries the small-sample correction; one-sided p-values come from
    the upper tail of t with n-1 degrees of freedom.
    """
    a = np.asarray(list(loss_a), dtype=float)
    b = np.asarray(list(loss_b), dtype=float)
    if a.shape != b.shape:
        raise ValueError("loss series must have equal length")
    n = len(a)
    if n < 3:
        raise ValueError("need at least 3 observations")
    d = a - b
    d_bar = float(d.mean())
    centred = d - d_bar
    gamma0 = float(centred @ centred) / n
    variance = gamma0
    for k in range(1, horizon):
        gamma_k = float(centred[k:] @ centred[:-k]) / n
        variance += 2.0 * gamma_k
    if variance <= 0.0 or gamma0 == 0.0:
        raise ValueError("degenerate series: zero loss-differential variance")
    statistic = d_bar / math.sqrt(variance / n)
    h = horizon
    correction = math.sqrt((n + 1 - 2 * h + h * (h - 1) / n) / n)
    statistic *= correction
    if one_sided:
        p_value = float(student_t.sf(statistic, df=n - 1))
    else:
        p_value = float(2.0 * student_t.sf(abs(statistic), df=n - 1))
    return DmResult(statistic=float(statistic), p_value=p_value, n=n, horizon=horizon)


# --- sign accuracy ----------------------------------------------------------


@dataclass
class SignAccuracy:
    spread: float
    rest: float | None
    benchmark_spread: float
    by_hour: dict[int, dict[str, float]] = field(default_factory=dict)


def _sign(x: float) -> int:
    return 1 if x >= 0 else -1


def sign_accuracy(results: Sequence[ForecastResult], p0: float = 0.5) -> SignAccuracy:
    """Share of correct spread/rest sign calls, with the live benchmark.

    Zero true spreads count as correct for either call. Forecasts with
    hour metadata contribute to the per-hour breakdown.
    """
    spread_ok: list[bool] = []
    rest_ok: list[bool] = []
    bench_ok: list[bool] = []
    hour_bins: dict[int, dict[str, list[bool]]] = {}
    for res in results:
        if res.y_true is None or res.p_da is None or res.p_plus_spread is None:
            continue
        true_spread = res.y_true - res.p_da
        estimate = sign_spread(res.p_plus_spread, p0, res.live_idfull, res.p_da)
        ok = true_spread == 0.0 or estimate == _sign(true_spread)
        spread_ok.append(ok)
        bench = None
        if res.live_idfull is not None:
            bench = _sign(res.live_idfull - res.p_da)
            bench_ok.append(true_spread == 0.0 or bench == _sign(true_spread))
        r_ok = None
        if res.p_plus_rest is not None and res.live_idfull is not None:
            true_rest = res.y_true - res.live_idfull
            r_ok = true_rest == 0.0 or sign_rest(res.p_plus_rest) == _sign(true_rest)
            rest_ok.append(r_ok)
        hour = res.metadata.get("hour")
        if hour is not None:
            bins = hour_bins.setdefault(int(hour), {"spread": [], "rest": [], "benchmark": []})
            bins["spread"].append(ok)
            if r_ok is not None:
                bins["rest"].append(r_ok)
            if bench is not None:
                bins["benchmark"].append(true_spread == 0.0 or bench == _sign(true_spread))
    if not spread_ok:
        raise ValueError("no scoreable forecasts")
    by_hour = {
        h: {name: float(np.mean(vals)) for name, vals in bins.items() if vals}
        for h, bins in hour_bins.items()
    }
    return SignAccuracy(
        spread=float(np.mean(spread_ok)),
        rest=float(np.mean(rest_ok)) if rest_ok else None,
        benchmark_spread=float(np.mean(bench_ok)) if bench_ok else float("nan"),
        by_hour=by_hour,
    )


# --- score table ------------------------------------------------------------


@dataclass(frozen=True)
class ScoreRecord:
    day: str
    hour: int
    scenario: str
    abs_error: float
    benchmark_abs_error: float | None
    spread_sign_correct: bool | None
    rest_sign_correct: bool | None
    crps: float


@dataclass
class ScoreTable:
    records: list[ScoreRecord] = field(default_factory=list)

    def add(self, record: ScoreRecord) -> None:
        self.records.append(record)

    def overall(self) -> dict[str, float]:
        out = {
            "mae": mae([r.abs_error for r in self.records]),
            "crps": float(np.mean([r.crps for r in self.records])),
        }
        bench = [r.benchmark_abs_error for r in self.records if r.benchmark_abs_error is not None]
        if bench:
            out["benchmark_mae"] = float(np.mean(bench))
        spread = [r.spread_sign_correct for r in self.records if r.spread_sign_correct is not None]
        if spread:
            out["spread_sign_accuracy"] = float(np.mean(spread))
        rest = [r.rest_sign_correct for r in self.records if r.rest_sign_correct is not None]
        if rest:
            out["rest_sign_accuracy"] = float(np.mean(rest))
        return out

    def by_hour(self) -> dict[int, dict[str, float]]:
        hours: dict[int, list[ScoreRecord]] = {}
        for r in self.records:
            hours.setdefault(r.hour, []).append(r)
        return {
            h: {
                "mae": mae([r.abs_error for r in recs]),
                "crps": float(np.mean([r.crps for r in recs])),
            }
            for h, recs in sorted(hours.items())
        }

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                [
                    "day",
                    "hour",
                    "scenario",
                    "abs_error",
                    "benchmark_abs_error",
                    "spread_sign_correct",
                    "rest_sign_correct",
                    "crps",
                ]
            )
            for r in self.records:
                writer.writerow(
                    [
                        r.day,
                        r.hour,
                        r.scenario,
                        repr(r.abs_error),
                        "" if r.benchmark_abs_error is None else repr(r.benchmark_abs_error),
                        "" if r.spread_sign_correct is None else int(r.spread_sign_correct),
                        "" if r.rest_sign_correct is None else int(r.rest_sign_correct),
                        repr(r.crps),
                    ]
                )
