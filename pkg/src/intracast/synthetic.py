"""Synthetic market corpus with known ground truth.

Generates transaction streams, day-ahead auction curves and covariate
files in the same CSV schemas the pipeline consumes. The latent fair
price of each hourly product combines seasonal structure, a daily
autoregressive level, jumps, and linear covariate effects; trades
arrive with intensity ramping toward gate closure and prices drift
toward the latent end-of-day value, so the live index is informative
but improvable. A block of mutually correlated decoy covariates is
included to give selection methods something to disentangle.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from datetime import date, timedelta
from pathlib import Path

import numpy as np

from .market_data import (
    DEFAULT_TZ,
    ProductKey,
    delivery_start_utc,
    gate_closure_utc,
    session_open_utc,
)

TRANSACTION_HEADER = "TradeId,Side,Price,Volume,ExecutionTime,DeliveryStart,DeliveryEnd,SelfTrade"


@dataclass
class SynthConfig:
    seed: int = 0
    start_day: date = date(2022, 3, 1)
    days: int = 40
    tz: str = DEFAULT_TZ

    base_level: float = 100.0
    daily_amp: float = 18.0
    weekly_amp: float = 6.0
    ar_coef: float = 0.7
    ar_sigma: float = 5.0
    jump_intensity: float = 0.02
    jump_scale: float = 40.0

    trade_rate: float = 30.0
    intensity_ramp: float = 2.0
    volume_sigma: float = 0.5
    volume_scale: float = 5.0
    noise_sigma: float = 1.5
    duplicate_frac: float = 0.10
    self_trade_frac: float = 0.03

    effects: dict = field(
        default_factory=lambda: {"X_sig1": 8.0, "X_sig2": -5.0}
    )
    dh_effect_series: str = "X_step"
    dh_effect: float = 4.0
    # repricing applied to trades executed in the final window before the
    # gate: invisible to the live index computed one hour out, but
    # predictable from many weak, mutually correlated driver covariates
    drift_effects: dict = field(
        default_factory=lambda: {f"X_rest{i}": 2.5 for i in range(18)}
    )
    drift_rho: float = 0.5  # correlation among the drift drivers
    late_window_hours: float = 1.0
    decoy_count: int = 6
    decoy_rho: float = 0.95
    decoy_anchor: str = "X_rest0"  # decoys shadow one drift driver
    covariate_ar: float = 0.8

    da_spread: float = 2.0
    da_noise: float = 3.0
    da_volume: float = 2000.0

    def __post_init__(self) -> None:
        if not -1.0 < self.ar_coef < 1.0:
            raise ValueError("ar_coef must lie in (-1, 1)")
        if self.trade_rate <= 0 or self.intensity_ramp <= 0:
            raise ValueError("intensities must be positive")


@dataclass
class SynthData:
    transactions: Path
    curves: Path
    covariates: Path
    truth: Path


def _fmt(x: float) -> str:
    return repr(float(x))


def _ramped_positions(rng: np.random.Generator, n: int, ramp: float) -> np.ndarray:
    """Arrival fractions in [0,1] with density proportional to exp(ramp*u)."""
    u = rng.random(n)
    return np.sort(np.log1p(u * (math.exp(ramp) - 1.0)) / ramp)


def generate(config: SynthConfig, out_dir) -> SynthData:
    """Write transactions, curves, covariates and a ground-truth record."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(config.seed)
    days = [config.start_day + timedelta(days=k) for k in range(config.days)]
    hours = range(24)

    # hourly covariate processes over the whole horizon
    total_hours = config.days * 24
    series: dict[str, np.ndarray] = {}

    def ar_process(scale: float = 1.0) -> np.ndarray:
        coef = config.covariate_ar
        innov = rng.normal(size=total_hours)
        x = np.empty(total_hours)
        x[0] = innov[0]
        for t in range(1, total_hours):
            x[t] = coef * x[t - 1] + math.sqrt(1 - coef**2) * innov[t]
        return scale * x

    for name in config.effects:
        series[name] = ar_process()
    series[config.dh_effect_series] = ar_process()
    drift_common = ar_process()
    for name in config.drift_effects:
        own = ar_process()
        q = config.drift_rho
        series[name] = math.sqrt(q) * drift_common + math.sqrt(1 - q) * own
    common = series.get(config.decoy_anchor)
    if common is None:
        common = ar_process()
    rho = config.decoy_rho
    for i in range(config.decoy_count):
        own = rng.normal(size=total_hours)
        series[f"X_decoy{i}"] = math.sqrt(rho) * common + math.sqrt(1 - rho) * own

    # energy block: deterministic shapes plus noise
    hour_idx = np.arange(total_hours) % 24
    day_idx = np.arange(total_hours) // 24
    sun = np.clip(np.sin((hour_idx - 5) / 14 * math.pi), 0.0, None)
    season = np.sin(2 * math.pi * (day_idx % 365) / 365)
    series_energy = {
        "E_cons": 55.0 + 8.0 * np.sin(2 * math.pi * (hour_idx - 7) / 24) + ar_process(2.0),
        "E_sol_da": 20.0 * sun * (1.0 + 0.3 * season) + ar_process(0.5) * sun,
        "E_won_da": 14.0 + ar_process(3.0),
        "E_woff_da": 5.0 + ar_process(1.0),
    }
    series_energy["E_sol_id"] = series_energy["E_sol_da"] + ar_process(0.8) * sun
    series_energy["E_tot"] = (
        series_energy["E_cons"] + 6.0 + ar_process(2.0)
    )
    series["S_temp"] = -np.cos(2 * math.pi * (day_idx % 365) / 365) + 0.0 * hour_idx
    series["M_gas"] = 7.0 + np.cumsum(rng.normal(scale=0.05, size=total_hours) * (hour_idx == 0))

    # latent daily level and jumps
    z = np.empty(config.days)
    z[0] = 0.0
    for k in range(1, config.days):
        z[k] = config.ar_coef * z[k - 1] + config.ar_sigma * rng.normal()
    jumps = np.where(
        rng.random((config.days, 24)) < config.jump_intensity,
        rng.normal(scale=config.jump_scale, size=(config.days, 24)),
        0.0,
    )

    def flat(d: int, h: int) -> int:
        return d * 24 + h

    def seasonal(d: int, h: int) -> float:
        dow = days[d].weekday()
        return (
            config.base_level
            + config.daily_amp * math.sin(2 * math.pi * (h - 9) / 24)
            + config.weekly_amp * math.sin(2 * math.pi * dow / 7)
            + z[d]
            + jumps[d, h]
        )

    def target_core(d: int, h: int) -> float:
        t = seasonal(d, h)
        idx = flat(d, h)
        for name, coef in config.effects.items():
            t += coef * series[name][idx]
        prev = idx - 1
        if prev >= 0:
            step = series[config.dh_effect_series]
            t += config.dh_effect * (step[idx] - step[prev])
        return t

    truth: dict = {
        "config": {
            **{k: (v.isoformat() if isinstance(v, date) else v) for k, v in asdict(config).items()},
        },
        "targets": {},
    }

    tx_path = out / "transactions.csv"
    curve_path = out / "curves.csv"
    cov_path = out / "covariates.csv"
    truth_path = out / "truth.json"

    with open(tx_path, "w", encoding="utf-8", newline="") as tx_fh:
        tx_fh.write(TRANSACTION_HEADER + "\n")
        for d, day in enumerate(days):
            for h in hours:
                product = ProductKey(day, h)
                start = delivery_start_utc(product, config.tz)
                end = start + timedelta(hours=1)
                open_t = session_open_utc(product, config.tz)
                gate = gate_closure_utc(product, config.tz)
                span = (gate - open_t).total_seconds()

                core = target_core(d, h)
                drift = sum(
                    coef * series[name][flat(d, h)]
                    for name, coef in config.drift_effects.items()
                )
                n_trades = max(2, int(rng.poisson(config.trade_rate)))
                positions = _ramped_positions(rng, n_trades, config.intensity_ramp)
                late_frac = config.late_window_hours * 3600.0 / span
                late = positions >= 1.0 - late_frac
                prices = (
                    core
                    + drift * late
                    + config.noise_sigma * rng.normal(size=n_trades)
                )
                volumes = config.volume_scale * np.exp(
                    config.volume_sigma * rng.normal(size=n_trades)
                )
                sides = rng.random(n_trades) < 0.5
                dup_mask = rng.random(n_trades) < config.duplicate_frac
                self_mask = rng.random(n_trades) < config.self_trade_frac
                start_s = start.isoformat()
                end_s = end.isoformat()
                for i in range(n_trades):
                    exec_t = open_t + timedelta(seconds=float(positions[i]) * span)
                    trade_id = f"{day.isoformat()}H{h:02d}N{i:04d}"
                    side = "BUY" if sides[i] else "SELL"
                    row = (
                        f"{trade_id},{side},{_fmt(prices[i])},{_fmt(volumes[i])},"
                        f"{exec_t.isoformat()},{start_s},{end_s},N\n"
                    )
                    tx_fh.write(row)
                    if dup_mask[i]:
                        other = "SELL" if sides[i] else "BUY"
                        tx_fh.write(
                            f"{trade_id},{other},{_fmt(prices[i])},{_fmt(volumes[i])},"
                            f"{exec_t.isoformat()},{start_s},{end_s},N\n"
                        )
                    if self_mask[i]:
                        tx_fh.write(
                            f"{trade_id}S,{side},{_fmt(prices[i] + 500.0)},{_fmt(volumes[i])},"
                            f"{exec_t.isoformat()},{start_s},{end_s},Y\n"
                        )
                truth["targets"][f"{day.isoformat()}|{h}"] = {
                    "core": core,
                    "rest_drift": drift,
                    "seasonal": seasonal(d, h),
                }

    with open(curve_path, "w", encoding="utf-8", newline="") as fh:
        fh.write("date,hour,kind,volume,price\n")
        for d, day in enumerate(days):
            for h in hours:
                core = target_core(d, h)
                p_da = core - config.da_spread + config.da_noise * rng.normal()
                v_da = config.da_volume + 200.0 * math.sin(2 * math.pi * h / 24)
                v_da += 20.0 * rng.normal()
                day_s = day.isoformat()
                sup = [
                    (0.0, p_da - 120.0),
                    (0.6 * v_da, p_da - 30.0),
                    (v_da, p_da),
                    (2.0 * v_da, p_da + 90.0),
                ]
                dem = [
                    (v_da - 900.0, p_da + 160.0),
                    (v_da, p_da),
                    (v_da + 900.0, p_da - 160.0),
                ]
                for v, p in sup:
                    fh.write(f"{day_s},{h},SUPPLY,{_fmt(v)},{_fmt(p)}\n")
                for v, p in dem:
                    fh.write(f"{day_s},{h},DEMAND,{_fmt(v)},{_fmt(p)}\n")
                truth["targets"][f"{day_s}|{h}"]["p_da"] = p_da
                truth["targets"][f"{day_s}|{h}"]["v_da"] = v_da

    with open(cov_path, "w", encoding="utf-8", newline="") as fh:
        fh.write("series_name,date,hour,value,availability_class\n")

        def emit(name: str, values: np.ndarray, cls: str) -> None:
            for d, day in enumerate(days):
                day_s = day.isoformat()
                for h in hours:
                    fh.write(f"{name},{day_s},{h},{_fmt(values[flat(d, h)])},{cls}\n")

        for name in sorted(series):
            cls = "static" if name.startswith(("S_", "M_")) else "day_ahead"
            emit(name, series[name], cls)
        for name in sorted(series_energy):
            cls = "intraday" if name.endswith("_id") else "day_ahead"
            emit(name, series_energy[name], cls)
        # day-ahead price/volume series mirror the curve construction
        for d, day in enumerate(days):
            day_s = day.isoformat()
            for h in hours:
                rec = truth["targets"][f"{day_s}|{h}"]
                fh.write(f"P_da,{day_s},{h},{_fmt(rec['p_da'])},day_ahead\n")
                fh.write(f"V_da,{day_s},{h},{_fmt(rec['v_da'])},day_ahead\n")
                slope = 0.4 * math.cos(2 * math.pi * h / 24)
                for q in (1, 2, 3, 4):
                    val = rec["p_da"] + slope * (q - 2.5)
                    fh.write(f"P_da_q{q},{day_s},{h},{_fmt(val)},day_ahead\n")

    truth["effects"] = dict(config.effects)
    truth["dh_effect"] = {config.dh_effect_series: config.dh_effect}
    truth["drift_effects"] = dict(config.drift_effects)
    with open(truth_path, "w", encoding="utf-8") as fh:
        json.dump(truth, fh, indent=1, sort_keys=True)

    return SynthData(
        transactions=tx_path, curves=curve_path, covariates=cov_path, truth=truth_path
    )
