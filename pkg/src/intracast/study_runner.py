"""Forecast study orchestration: scenarios, persistence, scoring, comparison.

A scenario fixes either the forecast creation clock time or the lag to
delivery, picks a selection method, and spans a range of test days. For
every (day, hour) the pipeline builds the design matrix, cleans and
standardises it, selects features, re-extracts and re-standardises the
selected columns from raw data, samples the posterior, and turns the
predictive mixture into a forecast record. Each forecast is persisted
as its own JSON file so runs are resumable; merged CSV outputs are
deterministic for a fixed seed and input data.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import os
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import date, datetime, time, timedelta
from pathlib import Path
from typing import Sequence
from zoneinfo import ZoneInfo

import numpy as np

from .bayes_engine import ModelSpec, empirical_prior, estimate_ppd, nuts_sample
from .evaluation import DEFAULT_ALPHA_GRID, ScoreRecord, ScoreTable, dm_test
from .feature_factory import (
    CovariateStore,
    FeatureConfig,
    build_design,
    clean_and_standardise,
)
from .market_data import (
    DEFAULT_TZ,
    ProductKey,
    TransactionBook,
    delivery_start_utc,
    parse_transactions,
)
from .merit_order import CurveSet, read_curves
from .predictive import (
    build_grid,
    hdi_family,
    point_estimate,
    rest_probs,
    select_pi,
    sign_rest,
    sign_spread,
    spread_probs,
)
from .selection import lasso_select, omp_select

FORECAST_COLUMNS = [
    "day",
    "hour",
    "tau",
    "selector",
    "n_selected",
    "selected",
    "y_hat",
    "y_lo",
    "y_hi",
    "alpha_hat",
    "p_cut",
    "fallback",
    "p_minus_spread",
    "p_plus_spread",
    "p_minus_rest",
    "p_plus_rest",
    "sign_spread",
    "sign_rest",
    "live_idfull",
    "p_da",
    "y_true",
    "abs_err",
    "bench_abs_err",
    "crps",
    "divergence_rate",
    "step_size",
]

TRACE_COLUMNS = ["day", "hour", "level", "p_cut", "alpha", "n_intervals", "covered"]


@dataclass
class RunConfig:
    """Every tunable of the pipeline, with the documented defaults."""

    tz: str = DEFAULT_TZ
    seed: int = 0
    jobs: int = 0  # 0: use the machine's core count

    # design matrix
    n_history: int = 365
    min_history: int = 30
    max_feature_missing: float = 0.2
    cid_anchor: str = "idfull"
    slope_widths: str = "500,1000,2000"

    # selection
    n_feat: int = 20
    omp_tol: float = 1e-4
    lasso_folds: int = 5
    lasso_lambdas: int = 100
    lasso_min_ratio: float = 1e-3
    lasso_shuffle: bool = False

    # prior and sampler
    beta: float = 0.5
    prior_scale: str = "variance"
    samples: int = 4000
    burn_in: int = 500
    init_step: float = 0.001
    target_accept: float = 0.8
    max_depth: int = 10

    # predictive machinery
    density_grid: int = 4096
    cut_levels: int = 100
    fallback_alpha: float = 0.9
    p0: float = 0.5

    # live index grid (index subcommand)
    grid_points: int = 250

    # leakage audit share of forecasts re-checked after a run
    audit_fraction: float = 0.0

    def feature_config(self) -> FeatureConfig:
        widths = tuple(float(w) for w in self.slope_widths.split(","))
        return FeatureConfig(
            tz=self.tz,
            slope_widths=widths,
            cid_anchor=self.cid_anchor,
            min_history=self.min_history,
            max_feature_missing=self.max_feature_missing,
        )

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        values: dict = {}
        types = {f.name: f.type for f in dataclasses.fields(cls)}
        with open(path, encoding="utf-8") as fh:
            for raw in fh:
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                key, _, value = line.partition("=")
                key = key.strip()
                value = value.strip()
                if key not in types:
                    raise KeyError(f"unknown config key: {key}")
                kind = types[key]
                if kind in ("int", int):
                    values[key] = int(value)
                elif kind in ("float", float):
                    values[key] = float(value)
                elif kind in ("bool", bool):
                    values[key] = value.lower() in ("1", "true", "yes")
                else:
                    values[key] = value
        return cls(**values)

    def to_file(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for f in dataclasses.fields(self):
                fh.write(f"{f.name} = {getattr(self, f.name)}\n")


@dataclass
class ScenarioSpec:
    """What to forecast: creation-time rule, selector, and test range."""

    kind: str  # "fixed_tau" or "fixed_lag"
    selector: str = "omp"
    tau_clock: time = time(23, 0)
    tau_day_offset: int = -1  # relative to the delivery day
    h_lag: float = 1.0
    start_day: date = date(2022, 7, 1)
    test_days: int = 183
    hours: tuple[int, ...] | None = None  # None: all admissible hours

    @classmethod
    def preset(cls, name: str, **overrides) -> "ScenarioSpec":
        presets = {
            "a": dict(kind="fixed_tau", tau_clock=time(23, 0), tau_day_offset=-1),
            "b": dict(kind="fixed_tau", tau_clock=time(5, 0), tau_day_offset=0),
            "c": dict(kind="fixed_tau", tau_clock=time(11, 0), tau_day_offset=0),
            "d": dict(kind="fixed_tau", tau_clock=time(17, 0), tau_day_offset=0),
            "e": dict(kind="fixed_lag", selector="omp"),
            "f": dict(kind="fixed_lag", selector="lasso"),
        }
        if name not in presets:
            raise ValueError(f"unknown scenario: {name!r}")
        params = dict(presets[name])
        params.update(overrides)
        return cls(**params)


@dataclass
class DataBundle:
    """Loaded market data: transactions, auction curves, covariates."""

    book: TransactionBook
    curves: CurveSet | None
    store: CovariateStore
    tz: str = DEFAULT_TZ

    @classmethod
    def load(cls, root, tz: str = DEFAULT_TZ) -> "DataBundle":
        root = Path(root)
        tx_path = root / "transactions.csv"
        if not tx_path.exists():
            raise FileNotFoundError(f"no transactions.csv under {root}")
        book = TransactionBook(list(parse_transactions(tx_path)), tz=tz)
        curves = None
        if (root / "curves.csv").exists():
            curves = CurveSet(read_curves(root / "curves.csv"))
        store = (
            CovariateStore.from_csv(root / "covariates.csv", tz=tz)
            if (root / "covariates.csv").exists()
            else CovariateStore(tz=tz)
        )
        return cls(book=book, curves=curves, store=store, tz=tz)

    @property
    def first_day(self) -> date:
        zone = ZoneInfo(self.tz)
        starts = [tx.delivery_start for tx in self.book._txs]
        return min(starts).astimezone(zone).date() if starts else date.max


def scenario_keys(
    spec: ScenarioSpec, config: RunConfig
) -> list[tuple[date, int, datetime]]:
    """(day, hour, tau) triples the scenario forecasts, in run order."""
    zone = ZoneInfo(config.tz)
    keys = []
    for k in range(spec.test_days):
        day = spec.start_day + timedelta(days=k)
        hours = spec.hours if spec.hours is not None else range(24)
        for hour in hours:
            start = delivery_start_utc(ProductKey(day, hour), config.tz)
            if spec.kind == "fixed_tau":
                tau_day = day + timedelta(days=spec.tau_day_offset)
                tau = datetime.combine(tau_day, spec.tau_clock).replace(
                    fold=0, tzinfo=zone
                )
                if start <= tau:
                    continue
            elif spec.kind == "fixed_lag":
                tau = start - timedelta(hours=spec.h_lag)
            else:
                raise ValueError(f"unknown scenario kind: {spec.kind}")
            keys.append((day, hour, tau.astimezone(ZoneInfo("UTC"))))
    return keys


def forecast_once(
    bundle: DataBundle,
    config: RunConfig,
    day: date,
    hour: int,
    tau: datetime,
    selector: str,
    row_cache: dict | None = None,
) -> dict:
    """Full pipeline for one forecast; returns the record and HDI trace."""
    from .evaluation import crps as crps_score

    fcfg = bundle_feature_config(bundle, config)
    n_history = min(config.n_history, (day - bundle.first_day).days - 1)
    dm_raw = build_design(
        day,
        hour,
        tau,
        n_history,
        bundle.book,
        bundle.curves,
        bundle.store,
        fcfg,
        cache=row_cache,
    )
    dm = clean_and_standardise(dm_raw, config.max_feature_missing)

    if selector == "omp":
        sel = omp_select(dm.train_X, dm.train_y, config.n_feat, config.omp_tol)
    elif selector == "lasso":
        sel = lasso_select(
            dm.train_X,
            dm.train_y,
            folds=config.lasso_folds,
            n_lambdas=config.lasso_lambdas,
            lambda_min_ratio=config.lasso_min_ratio,
            shuffle=config.lasso_shuffle,
            seed=config.seed,
        )
    else:
        raise ValueError(f"unknown selector: {selector!r}")
    names = [dm.feature_names[j] for j in sel.selected]

    dm2 = clean_and_standardise(dm_raw.select_features(names), config.max_feature_missing)
    prior = empirical_prior(
        dm2.train_X, dm2.train_y, beta=config.beta, scale_interpretation=config.prior_scale
    )
    model = ModelSpec(dm2.train_X, dm2.train_y, dm2.x_new, prior)
    seed = np.random.SeedSequence((config.seed, day.toordinal(), hour))
    samples = nuts_sample(
        model,
        n_samples=config.samples,
        burn_in=config.burn_in,
        init_step=config.init_step,
        seed=seed,
        target_accept=config.target_accept,
        max_depth=config.max_depth,
    )
    mixture = estimate_ppd(samples, dm2.x_new).destandardised(dm2.y_mean, dm2.y_std)

    grid = build_grid(mixture, k=config.density_grid)
    family = hdi_family(grid, config.cut_levels)
    interval = select_pi(grid, config.cut_levels, config.fallback_alpha, family=family)
    y_hat = point_estimate(grid, interval)

    live = bundle.book.live(ProductKey(day, hour), tau).idfull
    p_da = bundle.store.lookup("P_da", day, hour, tau)
    p_spread = spread_probs(grid, p_da) if p_da is not None else None
    p_rest = rest_probs(grid, live)
    sign_s = None
    if p_spread is not None:
        try:
            sign_s = sign_spread(p_spread[1], config.p0, live, p_da)
        except ValueError:
            sign_s = None
    sign_r = sign_rest(p_rest[1]) if p_rest is not None else None

    y_true = dm_raw.y_true
    record = {
        "day": day.isoformat(),
        "hour": hour,
        "tau": tau.isoformat(),
        "selector": selector,
        "n_selected": len(names),
        "selected": "|".join(names),
        "y_hat": y_hat,
        "y_lo": interval.lower,
        "y_hi": interval.upper,
        "alpha_hat": interval.credibility,
        "p_cut": interval.p_cut,
        "fallback": int(interval.from_fallback),
        "p_minus_spread": None if p_spread is None else p_spread[0],
        "p_plus_spread": None if p_spread is None else p_spread[1],
        "p_minus_rest": None if p_rest is None else p_rest[0],
        "p_plus_rest": None if p_rest is None else p_rest[1],
        "sign_spread": sign_s,
        "sign_rest": sign_r,
        "live_idfull": live,
        "p_da": p_da,
        "y_true": y_true,
        "abs_err": None if y_true is None else abs(y_hat - y_true),
        "bench_abs_err": None
        if (y_true is None or live is None)
        else abs(live - y_true),
        "crps": None if y_true is None else crps_score(mixture, y_true),
        "divergence_rate": samples.diagnostics["divergence_rate"],
        "step_size": samples.diagnostics["step_size"],
    }
    trace = [
        {
            "level": i,
            "p_cut": lvl.p_cut,
            "alpha": lvl.alpha,
            "n_intervals": len(lvl.intervals),
            "covered": None
            if y_true is None
            else int(any(lo <= y_true <= hi for lo, hi in lvl.intervals)),
        }
        for i, lvl in enumerate(family)
    ]
    return {"record": record, "trace": trace}


def bundle_feature_config(bundle: DataBundle, config: RunConfig) -> FeatureConfig:
    fcfg = config.feature_config()
    fcfg.tz = bundle.tz
    return fcfg


# --- worker plumbing ---------------------------------------------------------

_CTX: dict = {}


def _init_worker(data_root: str, tz: str) -> None:
    # under fork the parent's bundle is inherited; under spawn, reload
    if "bundle" not in _CTX or _CTX.get("root") != data_root:
        _CTX["bundle"] = DataBundle.load(data_root, tz=tz)
        _CTX["root"] = data_root
        _CTX["row_cache"] = {}


def _run_one(args) -> tuple[str, str | None]:
    config, selector, day, hour, tau, out_path = args
    try:
        result = forecast_once(
            _CTX["bundle"], config, day, hour, tau, selector,
            row_cache=_CTX.setdefault("row_cache", {}),
        )
        payload = json.dumps(result, sort_keys=True)
        tmp = out_path + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            fh.write(payload)
        os.replace(tmp, out_path)
        return out_path, None
    except Exception:
        return out_path, traceback.format_exc()


@dataclass
class StudyResult:
    out_dir: Path
    completed: int
    failures: list[tuple[str, str]] = field(default_factory=list)
    audited: int = 0

    @property
    def exit_code(self) -> int:
        return min(len(self.failures), 99)


def run(
    spec: ScenarioSpec,
    data_root,
    out_dir,
    config: RunConfig | None = None,
) -> StudyResult:
    """Execute a scenario, resumably; merge per-forecast files at the end."""
    config = config or RunConfig()
    out = Path(out_dir)
    (out / "forecasts").mkdir(parents=True, exist_ok=True)
    config.to_file(out / "config.txt")
    with open(out / "scenario.txt", "w", encoding="utf-8") as fh:
        for f in dataclasses.fields(spec):
            fh.write(f"{f.name} = {getattr(spec, f.name)}\n")

    keys = scenario_keys(spec, config)
    tasks = []
    for day, hour, tau in keys:
        path = out / "forecasts" / f"{day.isoformat()}_{hour:02d}.json"
        if path.exists():
            continue
        tasks.append((config, spec.selector, day, hour, tau, str(path)))
    # hour-major order maximises row-cache reuse between neighbouring tasks
    tasks.sort(key=lambda t: (t[3], t[2]))

    failures: list[tuple[str, str]] = []
    if tasks:
        jobs = config.jobs or os.cpu_count() or 1
        _init_worker(str(data_root), config.tz)
        if jobs > 1 and len(tasks) > 1:
            chunk = max(1, len(tasks) // (4 * jobs))
            with ProcessPoolExecutor(
                max_workers=jobs,
                initializer=_init_worker,
                initargs=(str(data_root), config.tz),
            ) as pool:
                for path, err in pool.map(_run_one, tasks, chunksize=chunk):
                    if err is not None:
                        failures.append((path, err))
        else:
            for task in tasks:
                path, err = _run_one(task)
                if err is not None:
                    failures.append((path, err))

    completed = _merge_outputs(out, keys)
    if failures:
        with open(out / "failures.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["forecast", "error"])
            for path, err in failures:
                writer.writerow([Path(path).stem, err.splitlines()[-1]])

    audited = 0
    if config.audit_fraction > 0:
        audited = audit_leakage(
            DataBundle.load(data_root, tz=config.tz), config, keys, config.audit_fraction
        )
    return StudyResult(out_dir=out, completed=completed, failures=failures, audited=audited)


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _merge_outputs(out: Path, keys) -> int:
    completed = 0
    with open(out / "forecasts.csv", "w", newline="", encoding="utf-8") as f_fh, open(
        out / "hdi_traces.csv", "w", newline="", encoding="utf-8"
    ) as t_fh:
        f_writer = csv.writer(f_fh)
        f_writer.writerow(FORECAST_COLUMNS)
        t_writer = csv.writer(t_fh)
        t_writer.writerow(TRACE_COLUMNS)
        for day, hour, _ in sorted(keys):
            path = out / "forecasts" / f"{day.isoformat()}_{hour:02d}.json"
            if not path.exists():
                continue
            completed += 1
            payload = json.loads(path.read_text())
            record = payload["record"]
            f_writer.writerow([_format_cell(record[c]) for c in FORECAST_COLUMNS])
            for lvl in payload["trace"]:
                t_writer.writerow(
                    [
                        record["day"],
                        record["hour"],
                        lvl["level"],
                        _format_cell(lvl["p_cut"]),
                        _format_cell(lvl["alpha"]),
                        lvl["n_intervals"],
                        _format_cell(lvl["covered"]),
                    ]
                )
    return completed


def audit_leakage(
    bundle: DataBundle,
    config: RunConfig,
    keys: Sequence[tuple[date, int, datetime]],
    fraction: float,
) -> int:
    """Rebuild a sample of feature rows from a feed truncated at tau.

    Raises if any audited design matrix differs from the full-feed one.
    """
    rng = np.random.default_rng(config.seed)
    sample_size = max(1, int(round(len(keys) * fraction)))
    picks = rng.choice(len(keys), size=min(sample_size, len(keys)), replace=False)
    fcfg = bundle_feature_config(bundle, config)
    for i in picks:
        day, hour, tau = keys[int(i)]
        n_history = min(config.n_history, (day - bundle.first_day).days - 1)
        full = build_design(
            day, hour, tau, n_history, bundle.book, bundle.curves, bundle.store, fcfg
        )
        truncated = DataBundle(
            book=bundle.book.truncated(tau),
            curves=bundle.curves,
            store=bundle.store,
            tz=bundle.tz,
        )
        redone = build_design(
            day, hour, tau, n_history, truncated.book, truncated.curves, truncated.store, fcfg
        )
        if not np.array_equal(full.X, redone.X, equal_nan=True):
            raise AssertionError(
                f"leakage audit failed for {day} h{hour}: rows differ under truncation"
            )
    return len(picks)


# --- scoring and comparison ---------------------------------------------------


def _read_forecasts(study_dir) -> list[dict]:
    path = Path(study_dir) / "forecasts.csv"
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            rows.append(row)
    return rows


def _as_float(cell: str) -> float | None:
    return float(cell) if cell not in ("", None) else None


def score(study_dir, alpha_grid: Sequence[float] = DEFAULT_ALPHA_GRID) -> dict:
    """Score a completed study directory; writes CSV artifacts, returns summary."""
    study = Path(study_dir)
    rows = _read_forecasts(study)
    table = ScoreTable()
    for row in rows:
        y_true = _as_float(row["y_true"])
        if y_true is None:
            continue
        y_hat = _as_float(row["y_hat"])
        live = _as_float(row["live_idfull"])
        p_da = _as_float(row["p_da"])
        sign_s = row["sign_spread"]
        sign_r = row["sign_rest"]
        spread_ok = None
        if sign_s not in ("", None) and p_da is not None:
            true_spread = y_true - p_da
            spread_ok = true_spread == 0 or int(sign_s) == (1 if true_spread >= 0 else -1)
        rest_ok = None
        if sign_r not in ("", None) and live is not None:
            true_rest = y_true - live
            rest_ok = true_rest == 0 or int(sign_r) == (1 if true_rest >= 0 else -1)
        table.add(
            ScoreRecord(
                day=row["day"],
                hour=int(row["hour"]),
                scenario=row["selector"],
                abs_error=abs(y_hat - y_true),
                benchmark_abs_error=None if live is None else abs(live - y_true),
                spread_sign_correct=spread_ok,
                rest_sign_correct=rest_ok,
                crps=_as_float(row["crps"]),
            )
        )
    table.to_csv(study / "scores.csv")

    coverage = _coverage_from_traces(study, alpha_grid)
    with open(study / "coverage.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["alpha", "coverage"])
        for alpha, cov in coverage:
            writer.writerow([repr(alpha), repr(cov)])

    summary = table.overall()
    summary["ace"] = float(np.mean([abs(c - a) for a, c in coverage]))
    summary["ace_signed"] = float(np.mean([c - a for a, c in coverage]))
    summary["n_forecasts"] = len(table.records)
    with open(study / "score_summary.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "value"])
        for key in sorted(summary):
            writer.writerow([key, repr(float(summary[key]))])
    return summary


def _coverage_from_traces(study: Path, alpha_grid: Sequence[float]) -> list[tuple[float, float]]:
    per_forecast: dict[tuple[str, str], list[tuple[float, int]]] = {}
    with open(study / "hdi_traces.csv", newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            if row["covered"] == "":
                continue
            key = (row["day"], row["hour"])
            per_forecast.setdefault(key, []).append(
                (float(row["alpha"]), int(row["covered"]))
            )
    curve = []
    for alpha in alpha_grid:
        hits = []
        for levels in per_forecast.values():
            nearest = min(levels, key=lambda lv: abs(lv[0] - alpha))
            hits.append(nearest[1])
        curve.append((float(alpha), float(np.mean(hits)) if hits else float("nan")))
    return curve


COMPARE_SCORES = ("mae", "crps", "spread_sign", "rest_sign")


def _loss_series(rows: list[dict], score_name: str) -> dict[tuple[str, str], float]:
    out = {}
    for row in rows:
        key = (row["day"], row["hour"])
        y_true = _as_float(row["y_true"])
        if y_true is None:
            continue
        if score_name == "mae":
            value = _as_float(row["abs_err"])
        elif score_name == "crps":
            value = _as_float(row["crps"])
        elif score_name == "spread_sign":
            p_da = _as_float(row["p_da"])
            if row["sign_spread"] in ("", None) or p_da is None:
                value = None
            else:
                correct = (y_true - p_da == 0) or int(row["sign_spread"]) == (
                    1 if y_true - p_da >= 0 else -1
                )
                value = 0.0 if correct else 1.0
        elif score_name == "rest_sign":
            live = _as_float(row["live_idfull"])
            if row["sign_rest"] in ("", None) or live is None:
                value = None
            else:
                correct = (y_true - live == 0) or int(row["sign_rest"]) == (
                    1 if y_true - live >= 0 else -1
                )
                value = 0.0 if correct else 1.0
        else:
            raise ValueError(score_name)
        if value is not None:
            out[key] = value
    return out


def _benchmark_series(rows: list[dict], score_name: str) -> dict[tuple[str, str], float]:
    out = {}
    for row in rows:
        key = (row["day"], row["hour"])
        y_true = _as_float(row["y_true"])
        live = _as_float(row["live_idfull"])
        if y_true is None or live is None:
            continue
        if score_name == "mae":
            out[key] = abs(live - y_true)
        elif score_name == "spread_sign":
            p_da = _as_float(row["p_da"])
            if p_da is None:
                continue
            correct = (y_true - p_da == 0) or (
                (1 if live - p_da >= 0 else -1) == (1 if y_true - p_da >= 0 else -1)
            )
            out[key] = 0.0 if correct else 1.0
    return out


def compare(dir_a, dir_b, out_path=None, horizon: int = 1) -> list[dict]:
    """Pairwise one-sided accuracy tests between two studies, per score.

    Also tests each study against the live benchmark where the score
    admits one. Degenerate loss differentials are reported as NA.
    """
    rows_a = _read_forecasts(dir_a)
    rows_b = _read_forecasts(dir_b)
    keys_a = {(r["day"], r["hour"]) for r in rows_a}
    keys_b = {(r["day"], r["hour"]) for r in rows_b}
    if keys_a != keys_b:
        diff = sorted(keys_a ^ keys_b)[:10]
        raise ValueError(f"forecast keys differ between studies, e.g. {diff}")

    results = []

    def add_row(score_name, name_a, name_b, series_a, series_b):
        common = sorted(set(series_a) & set(series_b))
        if len(common) < 3:
            return
        la = [series_a[k] for k in common]
        lb = [series_b[k] for k in common]
        try:
            res = dm_test(la, lb, horizon=horizon)
            stat, p = res.statistic, res.p_value
        except ValueError:
            stat, p = None, None
        results.append(
            {
                "score": score_name,
                "series_a": name_a,
                "series_b": name_b,
                "mean_a": float(np.mean(la)),
                "mean_b": float(np.mean(lb)),
                "statistic": stat,
                "p_value": p,
                "n": len(common),
            }
        )

    label_a = Path(str(dir_a)).name
    label_b = Path(str(dir_b)).name
    for score_name in COMPARE_SCORES:
        series_a = _loss_series(rows_a, score_name)
        series_b = _loss_series(rows_b, score_name)
        add_row(score_name, label_a, label_b, series_a, series_b)
        bench = _benchmark_series(rows_a, score_name)
        if bench:
            add_row(score_name, label_a, "live_benchmark", series_a, bench)
            add_row(score_name, label_b, "live_benchmark", series_b, bench)

    if out_path is not None:
        with open(out_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["score", "series_a", "series_b", "mean_a", "mean_b", "statistic", "p_value", "n"]
            )
            for row in results:
                writer.writerow(
                    [
                        row["score"],
                        row["series_a"],
                        row["series_b"],
                        repr(row["mean_a"]),
                        repr(row["mean_b"]),
                        "NA" if row["statistic"] is None else repr(row["statistic"]),
                        "NA" if row["p_value"] is None else repr(row["p_value"]),
                        row["n"],
                    ]
                )
    return results
