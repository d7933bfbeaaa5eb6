"""Day-ahead auction curve handling and market elasticity slopes.

The two-sided auction yields aggregated supply and demand curves whose
intersection clears the market. To measure whole-market elasticity, the
demand side's elasticity is transferred onto the supply curve: demand is
rendered perfectly inelastic at the clearing volume and the supply curve
is shifted horizontally by the demand's deviation from that volume at
each price level. Slopes of the transformed curve are taken as central
finite differences over a volume width.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np


class CurveKind(Enum):
    SUPPLY = "SUPPLY"
    DEMAND = "DEMAND"


class NoClearingError(ValueError):
    """Supply and demand curves do not intersect."""


@dataclass(frozen=True)
class AuctionCurve:
    """Aggregated auction curve as ordered (volume, price) breakpoints."""

    points: tuple[tuple[float, float], ...]
    kind: CurveKind

    def __post_init__(self) -> None:
        if len(self.points) < 2:
            raise ValueError("curve needs at least 2 points")
        vols = [v for v, _ in self.points]
        prices = [p for _, p in self.points]
        if any(b < a for a, b in zip(vols, vols[1:])):
            raise ValueError("volumes must be non-decreasing")
        if self.kind is CurveKind.SUPPLY:
            if any(b < a - 1e-9 for a, b in zip(prices, prices[1:])):
                raise ValueError("supply prices must be non-decreasing in volume")
        else:
            if any(b > a + 1e-9 for a, b in zip(prices, prices[1:])):
                raise ValueError("demand prices must be non-increasing in volume")

    @property
    def volumes(self) -> np.ndarray:
        return np.array([v for v, _ in self.points], dtype=float)

    @property
    def prices(self) -> np.ndarray:
        return np.array([p for _, p in self.points], dtype=float)

    def price_at(self, volume: float) -> float:
        """Linear interpolation, constant extrapolation outside the domain."""
        return float(np.interp(volume, self.volumes, self.prices))

    def volume_at_price(self, price: float) -> float:
        """Inverse lookup on the price axis (constant extrapolation)."""
        v, p = self.volumes, self.prices
        if self.kind is CurveKind.DEMAND:
            v, p = v[::-1], p[::-1]
        return float(np.interp(price, p, v))


@dataclass(frozen=True)
class TransformedSupply:
    """Supply curve carrying the whole market's elasticity."""

    points: tuple[tuple[float, float], ...]
    reference_demand_volume: float

    @property
    def volumes(self) -> np.ndarray:
        return np.array([v for v, _ in self.points], dtype=float)

    @property
    def prices(self) -> np.ndarray:
        return np.array([p for _, p in self.points], dtype=float)

    def price_at(self, volume: float) -> float:
        return float(np.interp(volume, self.volumes, self.prices))

    def volume_at_price(self, price: float) -> float:
        return float(np.interp(price, self.prices, self.volumes))


def _price_range(curve: AuctionCurve | TransformedSupply, v: float) -> tuple[float, float]:
    """Price interval attained at volume v (an interval on vertical segments)."""
    vols = curve.volumes
    prices = curve.prices
    if v <= vols[0]:
        hits = prices[vols == vols[0]] if v == vols[0] else prices[:1]
        return float(hits.min()), float(hits.max())
    if v >= vols[-1]:
        hits = prices[vols == vols[-1]] if v == vols[-1] else prices[-1:]
        return float(hits.min()), float(hits.max())
    exact = prices[vols == v]
    if exact.size:
        return float(exact.min()), float(exact.max())
    p = float(np.interp(v, vols, prices))
    return p, p


def clearing(supply: AuctionCurve, demand: AuctionCurve) -> tuple[float, float]:
    """Intersection (price, volume) of piecewise-linear auction curves.

    Vertical segments (duplicate volumes) are treated as price
    intervals, so step curves and perfectly inelastic curves clear
    correctly; tangency counts as a clearing.
    """
    eps = 1e-9
    lo = max(supply.volumes[0], demand.volumes[0])
    hi = min(supply.volumes[-1], demand.volumes[-1])
    if hi < lo:
        raise NoClearingError("no clearing: volume domains do not overlap")
    grid = np.unique(np.concatenate([supply.volumes, demand.volumes, [lo, hi]]))
    grid = grid[(grid >= lo) & (grid <= hi)]

    for i, v in enumerate(grid):
        s_lo, s_hi = _price_range(supply, v)
        d_lo, d_hi = _price_range(demand, v)
        olap_lo, olap_hi = max(s_lo, d_lo), min(s_hi, d_hi)
        if olap_lo <= olap_hi + eps:
            price = (max(olap_lo, min(olap_hi, (s_lo + s_hi) / 2)) + 0.0)
            return float(price), float(v)
        if i + 1 < len(grid):
            b = grid[i + 1]
            # limits heading into the open segment (v, b): supply has
            # jumped up, demand has dropped, both linear inside
            da = s_hi - d_lo
            sb_lo, sb_hi = _price_range(supply, b)
            db_lo, db_hi = _price_range(demand, b)
            db = sb_lo - db_hi
            if da <= eps and db >= -eps:
                if db == da:
                    v_star = float(v)
                else:
                    v_star = float(v - da * (b - v) / (db - da))
                p_a, p_b = s_hi, sb_lo
                if b > v:
                    price = p_a + (p_b - p_a) * (v_star - v) / (b - v)
                else:
                    price = p_a
                return float(price), v_star
    raise NoClearingError("no clearing: curves do not intersect")


def transform(supply: AuctionCurve, demand: AuctionCurve) -> TransformedSupply:
    """Move demand elasticity onto the supply side.

    At each price level p the transformed volume is
    v_supply(p) + (V* - v_demand(p)) with V* the clearing volume, so the
    vertical demand line at V* intersects the result at the original
    clearing point.
    """
    _, v_star = clearing(supply, demand)
    pts: list[tuple[float, float]] = []
    for v, p in supply.points:
        pts.append((v + (v_star - demand.volume_at_price(p)), float(p)))
    # demand kinks inside the supply's price span add breakpoints; beyond
    # that span the supply volume is pure extrapolation and would add
    # spurious tails
    p_lo, p_hi = float(supply.prices.min()), float(supply.prices.max())
    for p in demand.prices:
        if p_lo < p < p_hi:
            shift = v_star - demand.volume_at_price(float(p))
            pts.append((supply.volume_at_price(float(p)) + shift, float(p)))
    pts.sort(key=lambda vp: (vp[0], vp[1]))
    deduped = [pts[0]]
    for pt in pts[1:]:
        if abs(pt[0] - deduped[-1][0]) > 1e-12 or abs(pt[1] - deduped[-1][1]) > 1e-12:
            deduped.append(pt)
    if len(deduped) == 1:
        deduped.append(deduped[0])
    return TransformedSupply(points=tuple(deduped), reference_demand_volume=float(v_star))


def slope_at(curve: TransformedSupply, volume: float, dv: float) -> float:
    """Central finite-difference slope in EUR/MWh per MWh.

    The difference is clamped one-sided at the curve's volume domain
    boundaries, keeping the total width dv where possible.
    """
    if dv <= 0:
        raise ValueError("finite-difference width must be positive")
    v_min = float(curve.volumes[0])
    v_max = float(curve.volumes[-1])
    if v_max <= v_min:
        raise ValueError("degenerate curve: single volume")
    lo = volume - dv / 2
    hi = volume + dv / 2
    if lo < v_min:
        lo = v_min
        hi = min(v_min + dv, v_max)
    elif hi > v_max:
        hi = v_max
        lo = max(v_max - dv, v_min)
    if hi <= lo:
        raise ValueError("degenerate finite-difference interval")
    return (curve.price_at(hi) - curve.price_at(lo)) / (hi - lo)


class CurveSet:
    """Auction curve pairs per (date, hour) with cached derived objects."""

    def __init__(self, records: Sequence[dict]) -> None:
        self._pairs: dict[tuple, tuple[AuctionCurve, AuctionCurve]] = {}
        for rec in records:
            self._pairs[(str(rec["date"]), rec["hour"])] = (rec["supply"], rec["demand"])
        self._clearings: dict[tuple, tuple[float, float]] = {}
        self._transformed: dict[tuple, TransformedSupply] = {}

    def __len__(self) -> int:
        return len(self._pairs)

    def pair(self, day, hour: int) -> tuple[AuctionCurve, AuctionCurve] | None:
        return self._pairs.get((str(day), hour))

    def clearing(self, day, hour: int) -> tuple[float, float] | None:
        key = (str(day), hour)
        if key not in self._clearings:
            pair = self._pairs.get(key)
            if pair is None:
                return None
            self._clearings[key] = clearing(*pair)
        return self._clearings[key]

    def transformed(self, day, hour: int) -> TransformedSupply | None:
        key = (str(day), hour)
        if key not in self._transformed:
            pair = self._pairs.get(key)
            if pair is None:
                return None
            self._transformed[key] = transform(*pair)
        return self._transformed[key]


def read_curves(path) -> list[dict]:
    """Read auction curves from CSV with columns kind, volume, price.

    Optional leading date and hour columns group rows into one
    supply/demand pair per product; without them the file holds a
    single pair. Returns records {date, hour, supply, demand}.
    """

    def finish(group: dict, meta: tuple) -> dict:
        supply = AuctionCurve(tuple(group["SUPPLY"]), CurveKind.SUPPLY)
        demand = AuctionCurve(tuple(group["DEMAND"]), CurveKind.DEMAND)
        return {"date": meta[0], "hour": meta[1], "supply": supply, "demand": demand}

    groups: dict[tuple, dict] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            meta = (row.get("date"), int(row["hour"]) if row.get("hour") else None)
            g = groups.setdefault(meta, {"SUPPLY": [], "DEMAND": []})
            g[row["kind"].strip().upper()].append(
                (float(row["volume"]), float(row["price"]))
            )
    return [finish(g, meta) for meta, g in groups.items()]


def write_curves(records: Sequence[dict], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "hour", "kind", "volume", "price"])
        for rec in records:
            for kind in ("supply", "demand"):
                curve: AuctionCurve = rec[kind]
                for v, p in curve.points:
                    writer.writerow([rec["date"], rec["hour"], kind.upper(), repr(v), repr(p)])
