"""Command-line interface.

Subcommands: index (reproduce live/end-of-day indices), synth (generate
a synthetic corpus), forecast (run a scenario), score (evaluate a study
directory), compare (accuracy tests between two studies). Data and
study roots can also come from INTRACAST_DATA_ROOT and
INTRACAST_STUDY_ROOT.
"""

from __future__ import annotations

import argparse
import os
import sys
from datetime import date
from pathlib import Path

from .market_data import (
    DEFAULT_TZ,
    ProductKey,
    TransactionBook,
    build_live_series,
    parse_transactions,
    write_live_series_csv,
)
from .study_runner import RunConfig, ScenarioSpec, compare, run, score
from .synthetic import SynthConfig, generate


def _data_root(args) -> str:
    root = args.data or os.environ.get("INTRACAST_DATA_ROOT")
    if not root:
        raise SystemExit("no data root: pass --data or set INTRACAST_DATA_ROOT")
    return root


def _study_root(args) -> str:
    root = args.out or os.environ.get("INTRACAST_STUDY_ROOT")
    if not root:
        raise SystemExit("no study root: pass --out or set INTRACAST_STUDY_ROOT")
    return root


def cmd_index(args) -> int:
    root = Path(_data_root(args))
    result = parse_transactions(root / "transactions.csv")
    if result.skipped:
        print(f"skipped {len(result.skipped)} malformed rows", file=sys.stderr)
    book = TransactionBook(list(result), tz=args.tz)
    product = ProductKey(date.fromisoformat(args.date), args.hour)
    series = build_live_series(
        _product_transactions(book, product),
        product,
        grid_size=args.grid,
        tz=args.tz,
    )
    out = args.out or f"live_{args.date}_h{args.hour:02d}.csv"
    write_live_series_csv(series, out)
    eod = book.eod(product)
    print(f"wrote {out}")
    print(f"eod idfull: {eod.idfull}  high: {eod.high}  low: {eod.low}  last: {eod.last}")
    return 0


def _product_transactions(book: TransactionBook, product: ProductKey):
    from .market_data import delivery_end_utc, delivery_start_utc, filter_eligible

    window = (
        delivery_start_utc(product, book.tz),
        delivery_end_utc(product, book.tz),
    )
    return filter_eligible(book._by_window.get(window, []), product, book.tz)


def cmd_synth(args) -> int:
    config = SynthConfig(
        seed=args.seed,
        days=args.days,
        start_day=date.fromisoformat(args.start_day),
        trade_rate=args.trade_rate,
    )
    data = generate(config, args.out)
    print(f"wrote {data.transactions}")
    print(f"wrote {data.curves}")
    print(f"wrote {data.covariates}")
    print(f"wrote {data.truth}")
    return 0


def cmd_forecast(args) -> int:
    config = RunConfig.from_file(args.config) if args.config else RunConfig()
    if args.samples is not None:
        config.samples = args.samples
    if args.seed is not None:
        config.seed = args.seed
    if args.jobs is not None:
        config.jobs = args.jobs
    if args.history is not None:
        config.n_history = args.history
    overrides = {}
    if args.selector:
        overrides["selector"] = args.selector
    if args.lag is not None:
        overrides["h_lag"] = float(args.lag)
    if args.start_day:
        overrides["start_day"] = date.fromisoformat(args.start_day)
    if args.test_days is not None:
        overrides["test_days"] = args.test_days
    spec = ScenarioSpec.preset(args.scenario, **overrides)
    result = run(spec, _data_root(args), _study_root(args), config)
    print(f"completed {result.completed} forecasts, {len(result.failures)} failures")
    if result.audited:
        print(f"leakage audit passed on {result.audited} forecasts")
    for path, err in result.failures[:5]:
        print(f"FAILED {Path(path).stem}: {err.splitlines()[-1]}", file=sys.stderr)
    return result.exit_code


def cmd_score(args) -> int:
    summary = score(args.study)
    for key in sorted(summary):
        print(f"{key}: {summary[key]}")
    return 0


def cmd_compare(args) -> int:
    out = args.out or str(Path(args.b) / "dm_matrix.csv")
    results = compare(args.a, args.b, out_path=out)
    for row in results:
        p = "NA" if row["p_value"] is None else f"{row['p_value']:.4g}"
        print(
            f"{row['score']:<12} {row['series_a']} vs {row['series_b']}: "
            f"mean {row['mean_a']:.4g} vs {row['mean_b']:.4g}, p={p}"
        )
    print(f"wrote {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="intracast")
    sub = parser.add_subparsers(dest="command", required=True)

    p_index = sub.add_parser("index", help="reproduce live/eod indices for one product")
    p_index.add_argument("--data", help="data root with transactions.csv")
    p_index.add_argument("--date", required=True, help="delivery day YYYY-MM-DD")
    p_index.add_argument("--hour", type=int, required=True)
    p_index.add_argument("--grid", type=int, default=250)
    p_index.add_argument("--tz", default=DEFAULT_TZ)
    p_index.add_argument("--out")
    p_index.set_defaults(func=cmd_index)

    p_synth = sub.add_parser("synth", help="generate a synthetic market corpus")
    p_synth.add_argument("--out", required=True)
    p_synth.add_argument("--days", type=int, default=40)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--start-day", default="2022-03-01")
    p_synth.add_argument("--trade-rate", type=float, default=30.0)
    p_synth.set_defaults(func=cmd_synth)

    p_fc = sub.add_parser("forecast", help="run a forecast scenario")
    p_fc.add_argument("--scenario", required=True, choices=list("abcdef"))
    p_fc.add_argument("--data")
    p_fc.add_argument("--out")
    p_fc.add_argument("--lag", type=float)
    p_fc.add_argument("--selector", choices=["omp", "lasso"])
    p_fc.add_argument("--samples", type=int)
    p_fc.add_argument("--seed", type=int)
    p_fc.add_argument("--jobs", type=int)
    p_fc.add_argument("--history", type=int)
    p_fc.add_argument("--start-day")
    p_fc.add_argument("--test-days", type=int)
    p_fc.add_argument("--config", help="key = value config file")
    p_fc.set_defaults(func=cmd_forecast)

    p_score = sub.add_parser("score", help="evaluate a completed study directory")
    p_score.add_argument("--study", required=True)
    p_score.set_defaults(func=cmd_score)

    p_cmp = sub.add_parser("compare", help="accuracy tests between two studies")
    p_cmp.add_argument("--a", required=True)
    p_cmp.add_argument("--b", required=True)
    p_cmp.add_argument("--out")
    p_cmp.set_defaults(func=cmd_compare)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
