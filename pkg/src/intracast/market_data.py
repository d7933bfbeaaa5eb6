"""Intraday transaction handling and price index/statistics computation.

Parses executed-trade CSV files, applies the exchange eligibility and
deduplication rules for hourly products, and computes volume-weighted
price indices (ID1, ID3, IDFull) plus the High/Low/Last/deviation
statistics, either live at an arbitrary creation time tau or at gate
closure (end of day).
"""

from __future__ import annotations

import csv
import io
from bisect import bisect_right
from dataclasses import dataclass, field
from datetime import date, datetime, time, timedelta, timezone
from enum import Enum
from typing import Iterator, Sequence
from zoneinfo import ZoneInfo

UTC = timezone.utc
DEFAULT_TZ = "Europe/Berlin"

GATE_LEAD = timedelta(minutes=5)
SESSION_OPEN_LOCAL = time(15, 0)
ID3_WINDOW = (timedelta(hours=3), timedelta(minutes=30))
ID1_WINDOW = (timedelta(hours=1), timedelta(minutes=30))

REQUIRED_COLUMNS = (
    "TradeId",
    "Side",
    "Price",
    "Volume",
    "ExecutionTime",
    "DeliveryStart",
    "DeliveryEnd",
    "SelfTrade",
)


class Side(Enum):
    BUY = "BUY"
    SELL = "SELL"


class SelfTrade(Enum):
    YES = "Y"
    NO = "N"
    UNKNOWN = "U"


@dataclass(frozen=True)
class Transaction:
    """One executed intraday trade, timestamps in UTC."""

    trade_id: str
    side: Side
    price: float
    volume: float
    execution_time: datetime
    delivery_start: datetime
    delivery_end: datetime
    self_trade: SelfTrade = SelfTrade.NO
    market_area: str = "DE"
    product: str = ""


@dataclass(frozen=True)
class ProductKey:
    """Hourly delivery product: local delivery day and hour 0-23."""

    delivery_day: date
    delivery_hour: int

    def __post_init__(self) -> None:
        if not 0 <= self.delivery_hour <= 23:
            raise ValueError(f"delivery_hour out of range: {self.delivery_hour}")


@dataclass(frozen=True)
class LiveStats:
    """Price indices and statistics of one product at one creation time.

    Price fields are None when no eligible trade exists before the
    creation time; volumes are zero in that case, never None.
    """

    id1: float | None
    id3: float | None
    idfull: float | None
    high: float | None
    low: float | None
    last: float | None
    deviat: float | None
    v_buy: float
    v_sell: float
    creation_time: datetime


@dataclass
class LiveSeries:
    """Live statistics evaluated on an even creation-time grid."""

    product: ProductKey
    times: list[datetime]
    stats: list[LiveStats]

    def interpolate(self, tau: datetime) -> LiveStats:
        """Live values at an arbitrary tau via per-field linear interpolation.

        A price field is interpolated only when defined at both
        neighbouring grid points; otherwise the nearest earlier defined
        value is used (None if there is none).
        """
        ts = [_epoch(t) for t in self.times]
        x = _epoch(tau)
        if x <= ts[0]:
            return self.stats[0]
        if x >= ts[-1]:
            return self.stats[-1]
        i = bisect_right(ts, x) - 1
        frac = (x - ts[i]) / (ts[i + 1] - ts[i])

        def blend(name: str) -> float | None:
            a = getattr(self.stats[i], name)
            b = getattr(self.stats[i + 1], name)
            if a is not None and b is not None:
                return a + frac * (b - a)
            for j in range(i, -1, -1):
                v = getattr(self.stats[j], name)
                if v is not None:
                    return v
            return None

        return LiveStats(
            id1=blend("id1"),
            id3=blend("id3"),
            idfull=blend("idfull"),
            high=blend("high"),
            low=blend("low"),
            last=blend("last"),
            deviat=blend("deviat"),
            v_buy=self.stats[i].v_buy
            + frac * (self.stats[i + 1].v_buy - self.stats[i].v_buy),
            v_sell=self.stats[i].v_sell
            + frac * (self.stats[i + 1].v_sell - self.stats[i].v_sell),
            creation_time=tau,
        )


@dataclass(frozen=True)
class SkippedRow:
    line: int
    reason: str


@dataclass
class ParseResult(Sequence):
    """Parsed transactions plus a report of skipped malformed rows."""

    transactions: list[Transaction] = field(default_factory=list)
    skipped: list[SkippedRow] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.transactions)

    def __iter__(self) -> Iterator[Transaction]:
        return iter(self.transactions)

    def __getitem__(self, i):
        return self.transactions[i]


class MissingColumnError(ValueError):
    """A required CSV column is absent."""


# --- wall-clock handling ----------------------------------------------------
#
# Clock changes follow a no-clock-change rule: on the spring change day the
# hour 3-4 window stands in for the missing hour 2-3; on the autumn change
# day only the first occurrence of the doubled hour 2-3 counts.


def _wall_kind(day: date, hour: int, tz: ZoneInfo) -> str:
    naive = datetime.combine(day, time(hour))
    utc0 = naive.replace(fold=0, tzinfo=tz).astimezone(UTC)
    utc1 = naive.replace(fold=1, tzinfo=tz).astimezone(UTC)
    if utc0 == utc1:
        return "normal"
    return "ambiguous" if utc1 > utc0 else "imaginary"


def delivery_start_utc(product: ProductKey, tz: str = DEFAULT_TZ) -> datetime:
    zone = ZoneInfo(tz)
    day, hour = product.delivery_day, product.delivery_hour
    kind = _wall_kind(day, hour, zone)
    if kind == "imaginary":
        hour += 1  # spring gap: following hour is the surrogate
    local = datetime.combine(day, time(hour)).replace(fold=0, tzinfo=zone)
    return local.astimezone(UTC)


def delivery_end_utc(product: ProductKey, tz: str = DEFAULT_TZ) -> datetime:
    return delivery_start_utc(product, tz) + timedelta(hours=1)


def gate_closure_utc(product: ProductKey, tz: str = DEFAULT_TZ) -> datetime:
    """Last admissible execution time: 5 min before delivery start."""
    return delivery_start_utc(product, tz) - GATE_LEAD


def session_open_utc(product: ProductKey, tz: str = DEFAULT_TZ) -> datetime:
    """Continuous trading opens 15:00 local on the day before delivery."""
    zone = ZoneInfo(tz)
    prev = product.delivery_day - timedelta(days=1)
    local = datetime.combine(prev, SESSION_OPEN_LOCAL).replace(fold=0, tzinfo=zone)
    return local.astimezone(UTC)


def shift_days_local(tau: datetime, days: int, tz: str = DEFAULT_TZ) -> datetime:
    """Shift a UTC instant back by whole days, preserving local wall time."""
    zone = ZoneInfo(tz)
    local = tau.astimezone(zone)
    naive = datetime.combine(local.date() - timedelta(days=days), local.timetz())
    naive = naive.replace(tzinfo=None)
    if _wall_kind(naive.date(), naive.hour, zone) == "imaginary" and naive.minute == 0:
        naive += timedelta(hours=1)
    return naive.replace(fold=0, tzinfo=zone).astimezone(UTC)


def _epoch(dt: datetime) -> float:
    return dt.timestamp()


# --- parsing ----------------------------------------------------------------


def _parse_timestamp(raw: str) -> datetime:
    text = raw.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=UTC)
    return dt.astimezone(UTC)


def parse_transactions(path) -> ParseResult:
    """Read a transaction CSV; malformed rows are reported, not fatal.

    Raises MissingColumnError when a required header column is absent.
    """
    if hasattr(path, "read"):
        return _parse_stream(path)
    with open(path, newline="", encoding="utf-8") as fh:
        return _parse_stream(fh)


def _parse_stream(fh: io.TextIOBase) -> ParseResult:
    reader = csv.DictReader(fh)
    header = reader.fieldnames or []
    for col in REQUIRED_COLUMNS:
        if col not in header:
            raise MissingColumnError(f"missing required column: {col}")
    result = ParseResult()
    for lineno, row in enumerate(reader, start=2):
        try:
            result.transactions.append(_parse_row(row))
        except (ValueError, KeyError) as exc:
            result.skipped.append(SkippedRow(line=lineno, reason=str(exc)))
    return result


def _parse_row(row: dict) -> Transaction:
    side_raw = row["Side"].strip().upper()
    if side_raw in ("B", "BUY"):
        side = Side.BUY
    elif side_raw in ("S", "SELL"):
        side = Side.SELL
    else:
        raise ValueError(f"unknown Side: {row['Side']!r}")
    self_raw = row["SelfTrade"].strip().upper() or "N"
    try:
        self_trade = SelfTrade(self_raw)
    except ValueError:
        raise ValueError(f"unknown SelfTrade flag: {row['SelfTrade']!r}")
    volume = float(row["Volume"])
    if not volume > 0:
        raise ValueError(f"non-positive volume: {volume}")
    start = _parse_timestamp(row["DeliveryStart"])
    end = _parse_timestamp(row["DeliveryEnd"])
    if not start < end:
        raise ValueError("delivery_start must precede delivery_end")
    return Transaction(
        trade_id=row["TradeId"].strip(),
        side=side,
        price=float(row["Price"]),
        volume=volume,
        execution_time=_parse_timestamp(row["ExecutionTime"]),
        delivery_start=start,
        delivery_end=end,
        self_trade=self_trade,
        market_area=(row.get("MarketArea") or row.get("DeliveryArea") or "DE").strip(),
        product=(row.get("Product") or "").strip(),
    )


# --- eligibility ------------------------------------------------------------


def filter_eligible(
    txs: Sequence[Transaction], product: ProductKey, tz: str = DEFAULT_TZ
) -> list[Transaction]:
    """Keep trades that count toward the product's indices.

    Self-trades are dropped, the delivery window must match the hourly
    product exactly, and duplicate listings (both sides reported) are
    collapsed to the first occurrence of each trade id in file order.
    """
    start = delivery_start_utc(product, tz)
    end = delivery_end_utc(product, tz)
    seen: set[str] = set()
    kept: list[Transaction] = []
    for tx in txs:
        if tx.self_trade is SelfTrade.YES:
            continue
        if tx.delivery_start != start or tx.delivery_end != end:
            continue
        if tx.trade_id in seen:
            continue
        seen.add(tx.trade_id)
        kept.append(tx)
    return kept


# --- statistics -------------------------------------------------------------


class ProductHistory:
    """Eligible trades of one product, indexed for repeated tau queries.

    Input trades must already be filtered and deduplicated; they are
    sorted by execution time (stable, preserving file order on ties).
    """

    def __init__(
        self, txs: Sequence[Transaction], product: ProductKey, tz: str = DEFAULT_TZ
    ) -> None:
        self.product = product
        self.tz = tz
        self.delivery_start = delivery_start_utc(product, tz)
        self.gate = self.delivery_start - GATE_LEAD
        ordered = sorted(txs, key=lambda t: _epoch(t.execution_time))
        self._t = [_epoch(t.execution_time) for t in ordered]
        n = len(ordered)
        self._cv = [0.0] * (n + 1)
        self._cvp = [0.0] * (n + 1)
        self._cp = [0.0] * (n + 1)
        self._cmax: list[float] = [float("-inf")] * (n + 1)
        self._cmin: list[float] = [float("inf")] * (n + 1)
        self._cbuy = [0.0] * (n + 1)
        self._csell = [0.0] * (n + 1)
        self._price = [t.price for t in ordered]
        id3_lo = _epoch(self.delivery_start - ID3_WINDOW[0])
        id3_hi = _epoch(self.delivery_start - ID3_WINDOW[1])
        id1_lo = _epoch(self.delivery_start - ID1_WINDOW[0])
        id1_hi = _epoch(self.delivery_start - ID1_WINDOW[1])
        self._cv3 = [0.0] * (n + 1)
        self._cvp3 = [0.0] * (n + 1)
        self._cv1 = [0.0] * (n + 1)
        self._cvp1 = [0.0] * (n + 1)
        for i, tx in enumerate(ordered):
            v, p, t = tx.volume, tx.price, self._t[i]
            self._cv[i + 1] = self._cv[i] + v
            self._cvp[i + 1] = self._cvp[i] + v * p
            self._cp[i + 1] = self._cp[i] + p
            self._cmax[i + 1] = max(self._cmax[i], p)
            self._cmin[i + 1] = min(self._cmin[i], p)
            buy = v if tx.side is Side.BUY else 0.0
            self._cbuy[i + 1] = self._cbuy[i] + buy
            self._csell[i + 1] = self._csell[i] + (v - buy)
            in3 = id3_lo <= t <= id3_hi
            in1 = id1_lo <= t <= id1_hi
            self._cv3[i + 1] = self._cv3[i] + (v if in3 else 0.0)
            self._cvp3[i + 1] = self._cvp3[i] + (v * p if in3 else 0.0)
            self._cv1[i + 1] = self._cv1[i] + (v if in1 else 0.0)
            self._cvp1[i + 1] = self._cvp1[i] + (v * p if in1 else 0.0)

    def __len__(self) -> int:
        return len(self._t)

    def stats_at(self, tau: datetime) -> LiveStats:
        i = bisect_right(self._t, _epoch(tau))
        if i == 0:
            return LiveStats(
                id1=None,
                id3=None,
                idfull=None,
                high=None,
                low=None,
                last=None,
                deviat=None,
                v_buy=0.0,
                v_sell=0.0,
                creation_time=tau,
            )
        cv = self._cv[i]
        idfull = self._cvp[i] / cv
        mean_price = self._cp[i] / i
        return LiveStats(
            id1=self._cvp1[i] / self._cv1[i] if self._cv1[i] > 0 else None,
            id3=self._cvp3[i] / self._cv3[i] if self._cv3[i] > 0 else None,
            idfull=idfull,
            high=self._cmax[i],
            low=self._cmin[i],
            last=self._price[i - 1],
            deviat=idfull - mean_price,
            v_buy=self._cbuy[i],
            v_sell=self._csell[i],
            creation_time=tau,
        )

    def eod(self) -> LiveStats:
        return self.stats_at(self.gate)


def live_stats(
    txs: Sequence[Transaction],
    product: ProductKey,
    tau: datetime,
    tz: str = DEFAULT_TZ,
) -> LiveStats:
    """Indices/statistics from trades executed up to and including tau.

    IDFull is the VWAP of all such trades, ID3/ID1 restrict to the
    3h-30min / 1h-30min windows before delivery (closed boundaries),
    and the deviation statistic is the volume-weighted average
    deviation from the unweighted mean price.
    """
    return ProductHistory(txs, product, tz).stats_at(tau)


def eod_stats(
    txs: Sequence[Transaction], product: ProductKey, tz: str = DEFAULT_TZ
) -> LiveStats:
    """Final published values: live statistics at gate closure."""
    return ProductHistory(txs, product, tz).eod()


def build_live_series(
    txs: Sequence[Transaction],
    product: ProductKey,
    grid_size: int = 250,
    tz: str = DEFAULT_TZ,
) -> LiveSeries:
    """Evaluate live statistics on an even grid from session open to delivery end."""
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    t0 = _epoch(session_open_utc(product, tz))
    t1 = _epoch(delivery_end_utc(product, tz))
    history = ProductHistory(txs, product, tz)
    times = [
        datetime.fromtimestamp(t0 + (t1 - t0) * k / (grid_size - 1), UTC)
        for k in range(grid_size)
    ]
    return LiveSeries(
        product=product, times=times, stats=[history.stats_at(t) for t in times]
    )


class TransactionBook:
    """All parsed transactions, indexed per product for repeated queries.

    Eligibility filtering and deduplication happen lazily per product;
    histories are cached. truncated() yields a view of the market as it
    looked at a creation time, for leakage audits.
    """

    def __init__(self, txs: Sequence[Transaction], tz: str = DEFAULT_TZ) -> None:
        self.tz = tz
        self._txs = list(txs)
        self._by_window: dict[tuple[datetime, datetime], list[Transaction]] = {}
        for tx in self._txs:
            self._by_window.setdefault((tx.delivery_start, tx.delivery_end), []).append(tx)
        self._histories: dict[ProductKey, ProductHistory] = {}

    def __len__(self) -> int:
        return len(self._txs)

    def history(self, product: ProductKey) -> ProductHistory:
        cached = self._histories.get(product)
        if cached is None:
            window = (
                delivery_start_utc(product, self.tz),
                delivery_end_utc(product, self.tz),
            )
            raw = self._by_window.get(window, [])
            cached = ProductHistory(filter_eligible(raw, product, self.tz), product, self.tz)
            self._histories[product] = cached
        return cached

    def live(self, product: ProductKey, tau: datetime) -> LiveStats:
        return self.history(product).stats_at(tau)

    def eod(self, product: ProductKey) -> LiveStats:
        return self.history(product).eod()

    def truncated(self, tau: datetime) -> "TransactionBook":
        kept = [tx for tx in self._txs if tx.execution_time <= tau]
        return TransactionBook(kept, tz=self.tz)


SERIES_COLUMNS = (
    "tau",
    "id1",
    "id3",
    "idfull",
    "high",
    "low",
    "last",
    "deviat",
    "v_buy",
    "v_sell",
)


def write_live_series_csv(series: LiveSeries, path) -> None:
    """Emit a LiveSeries as CSV; undefined statistics become empty cells."""

    def cell(value: float | None) -> str:
        return "" if value is None else repr(value)

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(SERIES_COLUMNS)
        for t, s in zip(series.times, series.stats):
            writer.writerow(
                [
                    t.isoformat(),
                    cell(s.id1),
                    cell(s.id3),
                    cell(s.idfull),
                    cell(s.high),
                    cell(s.low),
                    cell(s.last),
                    cell(s.deviat),
                    repr(s.v_buy),
                    repr(s.v_sell),
                ]
            )
