"""Regressor assembly: feature rows, lag differences, design matrices.

One feature row gathers, for a delivery product and a creation time,
the live market block, the previous day's final index values, day-ahead
auction information and merit-order slopes, external covariates under
their availability rules, derived spread/excess combinations, calendar
fields, and seasonality series. Rows for past days shift the creation
time back day by day so every row reflects the same information lag,
and each feature additionally contributes its difference to the
previous hour and to the previous day.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from datetime import date, datetime, time, timedelta
from typing import Mapping, Protocol, Sequence
from zoneinfo import ZoneInfo

import numpy as np

from .market_data import (
    DEFAULT_TZ,
    LiveStats,
    ProductKey,
    delivery_start_utc,
    gate_closure_utc,
    shift_days_local,
)

UTC_HOURS = 3600.0

DAY_AHEAD_PUBLISH_LOCAL = time(18, 0)  # d-1
INTRADAY_PUBLISH_LOCAL = time(8, 0)  # d
AUCTION_PUBLISH_LOCAL = time(13, 0)  # d-1

DEFAULT_SLOPE_WIDTHS = (500.0, 1000.0, 2000.0)

# hour groups for aggregated day-ahead price statistics; the official
# group definitions live in an external exchange document, so these
# defaults are plausible but not authoritative
DEFAULT_DA_GROUPS: dict[str, tuple[int, ...]] = {
    "night": tuple(range(0, 6)),
    "morning": tuple(range(6, 10)),
    "sunpeak": tuple(range(11, 15)),
    "rush_hour": tuple(range(17, 20)),
    "evening": tuple(range(18, 23)),
    "baseload": tuple(range(0, 24)),
    "peakload": tuple(range(8, 20)),
}

LIVE_FEATURES = {
    "P_id1": "id1",
    "P_id3": "id3",
    "P_idfull": "idfull",
    "P_high": "high",
    "P_low": "low",
    "P_last": "last",
    "P_deviat": "deviat",
    "V_buy": "v_buy",
    "V_sell": "v_sell",
}


class MarketProvider(Protocol):
    def live(self, product: ProductKey, tau: datetime) -> LiveStats: ...

    def eod(self, product: ProductKey) -> LiveStats: ...


class CurveProvider(Protocol):
    def clearing(self, day, hour: int): ...

    def transformed(self, day, hour: int): ...


@dataclass
class FeatureConfig:
    tz: str = DEFAULT_TZ
    slope_widths: tuple[float, ...] = DEFAULT_SLOPE_WIDTHS
    cid_anchor: str = "idfull"  # or "id1"
    da_groups: Mapping[str, tuple[int, ...]] = field(
        default_factory=lambda: dict(DEFAULT_DA_GROUPS)
    )
    min_history: int = 30
    max_feature_missing: float = 0.2


class CovariateStore:
    """Named hourly series with availability classes.

    Classes: day_ahead (published 18:00 on d-1), intraday (published
    08:00 on d), static (calendar-like, always known), live (realized
    values, known once the hour has completed).
    """

    CLASSES = ("day_ahead", "intraday", "static", "live")

    def __init__(self, tz: str = DEFAULT_TZ) -> None:
        self.tz = tz
        self._zone = ZoneInfo(tz)
        self.series: dict[str, dict[tuple[date, int], float]] = {}
        self.availability: dict[str, str] = {}

    def add(self, name: str, availability: str) -> None:
        if availability not in self.CLASSES:
            raise ValueError(f"unknown availability class: {availability}")
        self.series.setdefault(name, {})
        self.availability[name] = availability

    def put(self, name: str, day: date, hour: int, value: float) -> None:
        self.series[name][(day, hour)] = value

    def names(self) -> list[str]:
        return list(self.series)

    def _available(self, name: str, day: date, hour: int, tau: datetime) -> bool:
        cls = self.availability[name]
        if cls == "static":
            return True
        if cls == "day_ahead":
            publish = datetime.combine(
                day - timedelta(days=1), DAY_AHEAD_PUBLISH_LOCAL
            ).replace(fold=0, tzinfo=self._zone)
            return tau >= publish
        if cls == "intraday":
            publish = datetime.combine(day, INTRADAY_PUBLISH_LOCAL).replace(
                fold=0, tzinfo=self._zone
            )
            return tau >= publish
        # live: realized once the delivery hour has completed
        end = delivery_start_utc(ProductKey(day, hour), self.tz) + timedelta(hours=1)
        return tau >= end

    def lookup(self, name: str, day: date, hour: int, tau: datetime) -> float | None:
        series = self.series.get(name)
        if series is None:
            return None
        if not self._available(name, day, hour, tau):
            return None
        return series.get((day, hour))

    @classmethod
    def from_csv(cls, path, tz: str = DEFAULT_TZ) -> "CovariateStore":
        store = cls(tz=tz)
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                name = row["series_name"]
                if name not in store.series:
                    store.add(name, row["availability_class"])
                store.put(
                    name,
                    date.fromisoformat(row["date"]),
                    int(row["hour"]),
                    float(row["value"]),
                )
        return store

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["series_name", "date", "hour", "value", "availability_class"])
            for name in sorted(self.series):
                cls = self.availability[name]
                for (day, hour), value in sorted(self.series[name].items()):
                    writer.writerow([name, day.isoformat(), hour, repr(value), cls])


@dataclass
class FeatureRow:
    day: date
    hour: int
    tau: datetime
    values: dict[str, float | None]
    target: float | None = None


def _sub(a: float | None, b: float | None) -> float | None:
    if a is None or b is None:
        return None
    return a - b


def _prev_hour_key(day: date, hour: int) -> tuple[date, int]:
    if hour == 0:
        return day - timedelta(days=1), 23
    return day, hour - 1


def assemble_row(
    day: date,
    hour: int,
    tau: datetime,
    market: MarketProvider,
    curves: CurveProvider | None,
    covariates: CovariateStore,
    config: FeatureConfig | None = None,
) -> FeatureRow:
    """All base and derived regressors for one (day, hour, tau) point.

    Unavailable entries are carried as None so that columns stay aligned
    across rows; they become missing-value marks in the design matrix.
    """
    cfg = config or FeatureConfig()
    zone = ZoneInfo(cfg.tz)
    product = ProductKey(day, hour)
    out: dict[str, float | None] = {}

    # live market block
    live = market.live(product, tau)
    for feat, attr in LIVE_FEATURES.items():
        out[feat] = getattr(live, attr)

    # final values of the previous day, only once its gate has passed
    prev_product = ProductKey(day - timedelta(days=1), hour)
    prev_gate = gate_closure_utc(prev_product, cfg.tz)
    eod_prev = market.eod(prev_product) if tau >= prev_gate else None
    for feat, attr in LIVE_FEATURES.items():
        value = getattr(eod_prev, attr) if eod_prev is not None else None
        out[f"eod1_{feat}"] = value

    # day-ahead auction block
    def cov(name: str, d: date = day, h: int = hour) -> float | None:
        return covariates.lookup(name, d, h, tau)

    p_da = cov("P_da")
    out["P_da"] = p_da
    for name in ("P_da_che", "V_da"):
        if name in covariates.series:
            out[name] = cov(name)
    quarters = [cov(f"P_da_q{q}") for q in (1, 2, 3, 4)]
    if all(f"P_da_q{q}" in covariates.series for q in (1, 2, 3, 4)):
        for q, value in zip((1, 2, 3, 4), quarters):
            out[f"P_da_q{q}"] = value
        out["s15_P_da"] = (
            (quarters[3] - quarters[0]) / 3.0
            if quarters[0] is not None and quarters[3] is not None
            else None
        )
    if "P_da" in covariates.series:
        day_prices = [cov("P_da", day, h2) for h2 in range(24)]
        for gname, hours in cfg.da_groups.items():
            vals = [day_prices[h2] for h2 in hours if day_prices[h2] is not None]
            out[f"P_da_grp_{gname}"] = float(np.mean(vals)) if vals else None
        defined = [p for p in day_prices if p is not None]
        out["P_da_grp_max"] = max(defined) if defined else None
        out["P_da_grp_min"] = min(defined) if defined else None

    # merit-order slopes; auction curves publish early afternoon on d-1
    publish = datetime.combine(day - timedelta(days=1), AUCTION_PUBLISH_LOCAL).replace(
        fold=0, tzinfo=zone
    )
    curves_ready = curves is not None and tau >= publish
    transformed = curves.transformed(day, hour) if curves_ready else None
    cleared = curves.clearing(day, hour) if curves_ready else None
    anchor_price = live.idfull if cfg.cid_anchor == "idfull" else live.id1
    from .merit_order import slope_at

    for width in cfg.slope_widths:
        w = int(width)
        eta_da = eta_cid = None
        if transformed is not None and cleared is not None:
            eta_da = slope_at(transformed, cleared[1], width)
            if anchor_price is not None:
                eta_cid = slope_at(
                    transformed, transformed.volume_at_price(anchor_price), width
                )
        out[f"eta_da_{w}"] = eta_da
        out[f"eta_cid_{w}"] = eta_cid

    # external series; intraday forecasts replace day-ahead ones once published
    effective: dict[str, float | None] = {}
    for base in ("E_sol", "E_won", "E_woff"):
        da_name, id_name = f"{base}_da", f"{base}_id"
        if da_name in covariates.series or id_name in covariates.series:
            id_val = cov(id_name)
            da_val = cov(da_name)
            effective[base] = id_val if id_val is not None else da_val
            out[base] = effective[base]
    handled = {f"{b}_{s}" for b in ("E_sol", "E_won", "E_woff") for s in ("da", "id")}
    handled |= {"P_da", "P_da_che", "V_da"} | {f"P_da_q{q}" for q in (1, 2, 3, 4)}
    quartet_members = set()
    for name in covariates.names():
        if name.endswith("_q1"):
            basename = name[:-3]
            group = [f"{basename}_q{q}" for q in (1, 2, 3, 4)]
            if all(g in covariates.series for g in group) and basename != "P_da":
                q1, q4 = cov(group[0]), cov(group[3])
                out[f"s15_{basename}"] = (
                    (q4 - q1) / 3.0 if q1 is not None and q4 is not None else None
                )
                quartet_members.update(group)
    for name in covariates.names():
        if name in handled or name in quartet_members:
            continue
        out[name] = cov(name)

    # derived combinations
    v_cid = (live.v_buy + live.v_sell) / 2.0
    out["V_cid"] = v_cid
    out["spread_idfull_da"] = _sub(live.idfull, p_da)
    out["spread_vcid_vda"] = _sub(v_cid, out.get("V_da"))
    for width in cfg.slope_widths:
        w = int(width)
        out[f"spread_eta_{w}"] = _sub(out[f"eta_cid_{w}"], out[f"eta_da_{w}"])

    e_tot, e_cons = out.get("E_tot"), out.get("E_cons")
    e_sol, e_won, e_woff = (effective.get(k) for k in ("E_sol", "E_won", "E_woff"))
    renewables = None
    if e_sol is not None and e_won is not None and e_woff is not None:
        renewables = e_sol + e_won + e_woff
    if "E_tot" in covariates.series:
        e_res = _sub(e_tot, renewables)
        out["E_res"] = e_res
        out["excess_tot_da"] = _sub(e_tot, out.get("V_da"))
        out["excess_res_da"] = _sub(e_res, out.get("V_da"))
        out["excess_tot_cid"] = _sub(e_tot, v_cid)
        out["excess_res_cid"] = _sub(e_res, v_cid)
    if "E_cons" in covariates.series:
        c_res = _sub(e_cons, renewables)
        out["C_res"] = c_res
        out["excess_cons_da"] = _sub(e_cons, out.get("V_da"))
        out["excess_consres_da"] = _sub(c_res, out.get("V_da"))
        out["excess_cons_cid"] = _sub(e_cons, v_cid)
        out["excess_consres_cid"] = _sub(c_res, v_cid)

    # forecast shifts between intraday and day-ahead runs
    def shift(names_id: list[str], names_da: list[str]) -> float | None:
        vals_id = [cov(n) for n in names_id]
        vals_da = [cov(n) for n in names_da]
        if any(v is None for v in vals_id + vals_da):
            return None
        return sum(vals_id) - sum(vals_da)

    if "E_sol_id" in covariates.series:
        out["shift_sol"] = shift(["E_sol_id"], ["E_sol_da"])
    if "E_won_id" in covariates.series and "E_woff_id" in covariates.series:
        out["shift_wind"] = shift(["E_won_id", "E_woff_id"], ["E_won_da", "E_woff_da"])
        if "E_sol_id" in covariates.series:
            out["shift_renew"] = shift(
                ["E_sol_id", "E_won_id", "E_woff_id"],
                ["E_sol_da", "E_won_da", "E_woff_da"],
            )

    # calendar block
    start = delivery_start_utc(product, cfg.tz)
    out["T_h"] = float(hour)
    out["T_wd"] = float(day.weekday())
    out["T_m"] = float(day.month)
    out["T_y"] = float(day.year)
    out["T_wc"] = 0.0 if day.weekday() < 5 else float(day.weekday() - 4)
    out["T_deliv"] = (start - tau).total_seconds() / UTC_HOURS

    return FeatureRow(day=day, hour=hour, tau=tau, values=out)


def apply_lags(
    row: FeatureRow,
    prev_hour: FeatureRow | None,
    prev_day: FeatureRow | None,
) -> FeatureRow:
    """Add hour-difference and day-difference variants of every feature.

    The hour neighbour shares the row's creation time; the day
    neighbour carries the creation time shifted back one day.
    """
    values = dict(row.values)
    for name, val in row.values.items():
        ph = prev_hour.values.get(name) if prev_hour is not None else None
        pd_ = prev_day.values.get(name) if prev_day is not None else None
        values[f"dh_{name}"] = _sub(val, ph)
        values[f"dd_{name}"] = _sub(val, pd_)
    return replace(row, values=values)


@dataclass
class DesignMatrix:
    """Feature rows for days d-n..d; the last row is the prediction point."""

    X: np.ndarray  # (n+1, m), NaN marks missing
    y: np.ndarray  # (n+1,), NaN for the withheld prediction target
    feature_names: list[str]
    rows: list[tuple[date, int, datetime]]
    y_true: float | None = None
    col_mean: np.ndarray | None = None
    col_std: np.ndarray | None = None
    y_mean: float | None = None
    y_std: float | None = None

    @property
    def standardised(self) -> bool:
        return self.col_mean is not None

    @property
    def n_train(self) -> int:
        return len(self.y) - 1

    @property
    def train_X(self) -> np.ndarray:
        return self.X[:-1]

    @property
    def train_y(self) -> np.ndarray:
        return self.y[:-1]

    @property
    def x_new(self) -> np.ndarray:
        return self.X[-1]

    def destandardise_target(self, value: float) -> float:
        if not self.standardised:
            return value
        return value * self.y_std + self.y_mean

    def select_features(self, names: Sequence[str]) -> "DesignMatrix":
        """Raw column subset by name, for the post-selection re-run."""
        idx = [self.feature_names.index(n) for n in names]
        return DesignMatrix(
            X=self.X[:, idx].copy(),
            y=self.y.copy(),
            feature_names=list(names),
            rows=list(self.rows),
            y_true=self.y_true,
        )


def _row_values(
    day: date,
    hour: int,
    tau: datetime,
    market: MarketProvider,
    curves: CurveProvider | None,
    covariates: CovariateStore,
    cfg: FeatureConfig,
    cache: dict | None,
) -> tuple[tuple[str, ...], np.ndarray]:
    """Base feature row as a NaN-marked array, memoised when a cache is given."""
    key = (day, hour, tau)
    if cache is not None and key in cache:
        return cache[key]
    row = assemble_row(day, hour, tau, market, curves, covariates, cfg)
    names = tuple(row.values.keys())
    values = np.array(
        [np.nan if v is None else float(v) for v in row.values.values()]
    )
    if cache is not None:
        cache[key] = (names, values)
    return names, values


def build_design(
    day: date,
    hour: int,
    tau: datetime,
    n_history: int,
    market: MarketProvider,
    curves: CurveProvider | None,
    covariates: CovariateStore,
    config: FeatureConfig | None = None,
    cache: dict | None = None,
) -> DesignMatrix:
    """Raw design matrix with lag features for days d-n..d.

    Row k uses the creation time shifted back k days (same wall time);
    targets are the final index values of the past days, with day d's
    target withheld. The lag blocks are the vectorised equivalent of
    apply_lags: hour differences at the row's own creation time, day
    differences against the next older row. An optional cache memoises
    base rows across calls that share (day, hour, tau) points.
    """
    cfg = config or FeatureConfig()
    if n_history < cfg.min_history:
        raise ValueError(
            f"n_history={n_history} below the configured minimum {cfg.min_history}"
        )
    gate = gate_closure_utc(ProductKey(day, hour), cfg.tz)
    if tau >= gate:
        raise ValueError("creation time must precede gate closure")

    taus = [shift_days_local(tau, k, cfg.tz) for k in range(n_history + 2)]
    names = None
    main = []
    for k in range(n_history + 2):
        row_names, values = _row_values(
            day - timedelta(days=k), hour, taus[k], market, curves, covariates, cfg, cache
        )
        if names is None:
            names = row_names
        elif row_names != names:
            raise ValueError("inconsistent feature sets across rows")
        main.append(values)
    prev = []
    for k in range(n_history + 1):
        ph_day, ph_hour = _prev_hour_key(day - timedelta(days=k), hour)
        _, values = _row_values(
            ph_day, ph_hour, taus[k], market, curves, covariates, cfg, cache
        )
        prev.append(values)

    M = np.vstack(main)  # newest first, rows k = 0..n+1
    P = np.vstack(prev)  # newest first, rows k = 0..n
    base = M[n_history::-1]  # oldest first, rows k = n..0
    dh = base - P[::-1]
    dd = base - M[n_history + 1 : 0 : -1]
    X = np.concatenate([base, dh, dd], axis=1)
    all_names = (
        list(names)
        + [f"dh_{n}" for n in names]
        + [f"dd_{n}" for n in names]
    )

    row_meta = []
    for k in range(n_history, -1, -1):
        row_meta.append((day - timedelta(days=k), hour, taus[k]))

    y = np.full(len(row_meta), np.nan)
    for i, (d_k, h_k, _) in enumerate(row_meta[:-1]):
        product = ProductKey(d_k, h_k)
        if tau >= gate_closure_utc(product, cfg.tz):
            eod = market.eod(product)
            if eod.idfull is not None:
                y[i] = eod.idfull
    y_true = None
    final_eod = market.eod(ProductKey(day, hour))
    if final_eod.idfull is not None:
        y_true = float(final_eod.idfull)

    return DesignMatrix(
        X=X,
        y=y,
        feature_names=all_names,
        rows=row_meta,
        y_true=y_true,
    )


def clean_and_standardise(
    dm: DesignMatrix, max_feature_missing: float = 0.2
) -> DesignMatrix:
    """Drop sparse features and incomplete rows, then standardise.

    Features missing at the prediction point or in more than the
    allowed fraction of rows are removed first; remaining training rows
    with any missing value or missing target are dropped; constant
    (including all-zero) columns are removed; finally columns and the
    target are scaled to zero mean and unit variance using the training
    rows only.
    """
    X, y = dm.X, dm.y
    n_rows = X.shape[0]

    usable = ~np.isnan(X[-1])
    missing_frac = np.mean(np.isnan(X), axis=0)
    usable &= missing_frac <= max_feature_missing
    X = X[:, usable]
    names = [n for n, keep in zip(dm.feature_names, usable) if keep]

    train_keep = ~np.isnan(X[:-1]).any(axis=1) & ~np.isnan(y[:-1])
    if not train_keep.any():
        raise ValueError("cleaning removed every training row")
    row_idx = np.concatenate([np.flatnonzero(train_keep), [n_rows - 1]])
    X = X[row_idx]
    y = y[row_idx]
    rows = [dm.rows[i] for i in row_idx]

    col_std = X[:-1].std(axis=0)
    non_constant = col_std > 1e-12
    X = X[:, non_constant]
    names = [n for n, keep in zip(names, non_constant) if keep]

    col_mean = X[:-1].mean(axis=0)
    col_std = X[:-1].std(axis=0)
    X = (X - col_mean) / col_std
    y_mean = float(y[:-1].mean())
    y_std = float(y[:-1].std())
    if y_std <= 1e-12:
        y_std = 1.0
    y_scaled = (y - y_mean) / y_std

    return DesignMatrix(
        X=X,
        y=y_scaled,
        feature_names=names,
        rows=rows,
        y_true=dm.y_true,
        col_mean=col_mean,
        col_std=col_std,
        y_mean=y_mean,
        y_std=y_std,
    )
