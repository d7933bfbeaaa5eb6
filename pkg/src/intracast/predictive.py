"""Prediction intervals, point estimates and sign probabilities from a PPD.

The predictive mixture is traced on a dense grid to expose its density
topology. Highest-density intervals at a cut level are the regions
where the density reaches the cut; walking a schedule of descending
cuts, sub-intervals fuse into larger ones, and the prediction interval
is the fusing interval with the best credibility-to-width ratio. Exact
mixture CDF evaluations back all probability statements; the grid is
only used to locate density crossings.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bayes_engine import PredictiveMixture

DEFAULT_GRID_POINTS = 4096
DEFAULT_CUT_LEVELS = 100
DEFAULT_FALLBACK_ALPHA = 0.9


@dataclass
class DensityGrid:
    """Numerical carrier for the predictive density and its CDF."""

    xs: np.ndarray
    density: np.ndarray
    cdf: np.ndarray
    mixture: PredictiveMixture

    def cdf_at(self, x) -> np.ndarray:
        return np.interp(x, self.xs, self.cdf)


@dataclass(frozen=True)
class CutLevel:
    """HDI family entry: all intervals present at one density cut."""

    p_cut: float
    alpha: float
    intervals: tuple[tuple[float, float], ...]


@dataclass(frozen=True)
class PredictionInterval:
    lower: float
    upper: float
    credibility: float
    p_cut: float
    from_fallback: bool = False

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def contains(self, x: float) -> bool:
        return self.lower <= x <= self.upper


@dataclass
class ForecastResult:
    """One probabilistic forecast with its interval, signs and references."""

    point: float
    interval: PredictionInterval
    hdi_family: list[CutLevel]
    p_minus_spread: float | None
    p_plus_spread: float | None
    p_minus_rest: float | None
    p_plus_rest: float | None
    live_idfull: float | None
    p_da: float | None
    y_true: float | None = None
    metadata: dict = field(default_factory=dict)


def build_grid(mixture: PredictiveMixture, k: int = DEFAULT_GRID_POINTS) -> DensityGrid:
    """Evaluate the mixture on k points spanning all components +-8 std."""
    lo, hi = mixture.support(width=8.0)
    if hi <= lo:
        hi = lo + max(abs(lo), 1.0) * 1e-9
    xs = np.linspace(lo, hi, k)
    return DensityGrid(xs=xs, density=mixture.pdf(xs), cdf=mixture.cdf(xs), mixture=mixture)


def _runs(mask: np.ndarray) -> list[tuple[int, int]]:
    """Contiguous True runs as (first index, last index) pairs."""
    if not mask.any():
        return []
    edges = np.flatnonzero(np.diff(mask.astype(np.int8)))
    starts = [0] if mask[0] else []
    starts += [int(e) + 1 for e in edges if not mask[e] and mask[e + 1]]
    ends = [int(e) for e in edges if mask[e] and not mask[e + 1]]
    if mask[-1]:
        ends.append(len(mask) - 1)
    return list(zip(starts, ends))


def hdi_at_cut(grid: DensityGrid, p_cut: float) -> tuple[list[tuple[float, float]], float]:
    """Disjoint intervals where the density reaches p_cut, plus their mass.

    Interval boundaries are refined by linear interpolation of the
    density between grid nodes; the mass comes from the gridded CDF.
    """
    if p_cut < 0:
        raise ValueError("p_cut must be non-negative")
    xs, dens = grid.xs, grid.density
    mask = dens >= p_cut
    intervals: list[tuple[float, float]] = []
    for i0, i1 in _runs(mask):
        if i0 > 0:
            d0, d1 = dens[i0 - 1], dens[i0]
            frac = (p_cut - d0) / (d1 - d0) if d1 != d0 else 1.0
            lo = float(xs[i0 - 1] + frac * (xs[i0] - xs[i0 - 1]))
        else:
            lo = float(xs[0])
        if i1 < len(xs) - 1:
            d0, d1 = dens[i1], dens[i1 + 1]
            frac = (p_cut - d0) / (d1 - d0) if d1 != d0 else 0.0
            hi = float(xs[i1] + frac * (xs[i1 + 1] - xs[i1]))
        else:
            hi = float(xs[-1])
        intervals.append((lo, hi))
    alpha = float(
        sum(grid.cdf_at(hi) - grid.cdf_at(lo) for lo, hi in intervals)
    )
    return intervals, alpha


def _mass_ordered_cuts(grid: DensityGrid) -> tuple[np.ndarray, np.ndarray]:
    """Density levels sorted descending with cumulative node masses."""
    dx = grid.xs[1] - grid.xs[0]
    weights = np.full(len(grid.xs), dx)
    weights[0] = weights[-1] = dx / 2
    node_mass = grid.density * weights
    order = np.argsort(-grid.density, kind="stable")
    return grid.density[order], np.cumsum(node_mass[order])


def cut_schedule(grid: DensityGrid, levels: int = DEFAULT_CUT_LEVELS) -> list[float]:
    """Descending density cuts whose masses target 1/levels ... 1.0."""
    dens_sorted, cum = _mass_ordered_cuts(grid)
    total = cum[-1]
    cuts: list[float] = []
    for t in range(1, levels + 1):
        target = t / levels
        if target >= 1.0:
            cuts.append(0.0)
            continue
        idx = int(np.searchsorted(cum, target * total, side="left"))
        cuts.append(float(dens_sorted[idx]) if idx < len(dens_sorted) else 0.0)
    for a, b in zip(cuts, cuts[1:]):
        assert b <= a + 1e-15
    return cuts


def hdi_family(grid: DensityGrid, levels: int = DEFAULT_CUT_LEVELS) -> list[CutLevel]:
    """HDI sets along the cut schedule, credibility non-decreasing."""
    family = []
    for p_cut in cut_schedule(grid, levels):
        intervals, alpha = hdi_at_cut(grid, p_cut)
        family.append(CutLevel(p_cut=p_cut, alpha=alpha, intervals=tuple(intervals)))
    return family


def _cut_for_alpha(grid: DensityGrid, target: float) -> float:
    """Bisect the density cut whose HDI mass hits the target credibility."""
    lo, hi = 0.0, float(grid.density.max())
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        _, alpha = hdi_at_cut(grid, mid)
        if alpha >= target:
            lo = mid
        else:
            hi = mid
    return lo


def _best_ratio(
    candidates: list[tuple[float, float]], grid: DensityGrid
) -> tuple[tuple[float, float], float]:
    """Max mass-per-width candidate; ties break to the leftmost interval."""
    best = None
    best_ratio = -np.inf
    best_mass = 0.0
    for lo, hi in sorted(candidates):
        width = hi - lo
        if width <= 0:
            continue
        mass = float(grid.cdf_at(hi) - grid.cdf_at(lo))
        ratio = mass / width
        if ratio > best_ratio + 1e-15:
            best, best_ratio, best_mass = (lo, hi), ratio, mass
    if best is None:
        raise ValueError("no usable candidate interval")
    return best, best_mass


def select_pi(
    grid: DensityGrid,
    levels: int = DEFAULT_CUT_LEVELS,
    fallback_alpha: float = DEFAULT_FALLBACK_ALPHA,
    family: list[CutLevel] | None = None,
) -> PredictionInterval:
    """Prediction interval from fusing HDIs, by credibility-to-width ratio.

    Walking the cut schedule downward, a fusion event is an interval
    count decrease between consecutive levels; the candidate set holds
    every interval present at the level just before a fusion. Unimodal
    densities never fuse, in which case the HDI at fallback_alpha is
    returned (flagged from_fallback).
    """
    if family is None:
        family = hdi_family(grid, levels)
    candidates: list[tuple[float, float]] = []
    fusion_cut = None
    for prev, cur in zip(family, family[1:]):
        if len(cur.intervals) < len(prev.intervals) and len(prev.intervals) > 1:
            candidates.extend(prev.intervals)
            if fusion_cut is None:
                fusion_cut = prev.p_cut
    if candidates:
        seen = set()
        unique = []
        for iv in candidates:
            key = (round(iv[0], 12), round(iv[1], 12))
            if key not in seen:
                seen.add(key)
                unique.append(iv)
        (lo, hi), _ = _best_ratio(unique, grid)
        credibility = float(
            grid.mixture.cdf_scalar(hi) - grid.mixture.cdf_scalar(lo)
        )
        return PredictionInterval(
            lower=lo, upper=hi, credibility=credibility, p_cut=fusion_cut or 0.0
        )
    p_cut = _cut_for_alpha(grid, fallback_alpha)
    intervals, _ = hdi_at_cut(grid, p_cut)
    (lo, hi), _ = _best_ratio(intervals, grid)
    credibility = float(grid.mixture.cdf_scalar(hi) - grid.mixture.cdf_scalar(lo))
    return PredictionInterval(
        lower=lo, upper=hi, credibility=credibility, p_cut=p_cut, from_fallback=True
    )


def point_estimate(grid: DensityGrid, interval: PredictionInterval) -> float:
    """Median of the density restricted to the interval (CDF bisection)."""
    f = grid.mixture.cdf_scalar
    lo, hi = interval.lower, interval.upper
    target = f(lo) + 0.5 * (f(hi) - f(lo))
    a, b = lo, hi
    for _ in range(200):
        mid = 0.5 * (a + b)
        if f(mid) < target:
            a = mid
        else:
            b = mid
        if b - a <= 1e-13 * max(abs(lo), abs(hi), 1.0):
            break
    return 0.5 * (a + b)


def spread_probs(grid: DensityGrid, p_da: float) -> tuple[float, float]:
    """P(final index below / above the day-ahead price), exact mixture CDF."""
    if p_da is None or not np.isfinite(p_da):
        raise ValueError("day-ahead price must be finite")
    p_minus = grid.mixture.cdf_scalar(p_da)
    return p_minus, 1.0 - p_minus


def rest_probs(
    grid: DensityGrid, live_idfull: float | None
) -> tuple[float, float] | None:
    """P(final index below / above its live value); None while undefined."""
    if live_idfull is None:
        return None
    p_minus = grid.mixture.cdf_scalar(live_idfull)
    return p_minus, 1.0 - p_minus


def sign_spread(
    p_plus: float, p0: float, live_idfull: float | None, p_da: float
) -> int:
    """Spread sign estimate at credibility threshold p0, in [0.5, 1].

    Falls back to the sign of the live spread when neither tail clears
    the threshold; zero spreads count as positive.
    """
    if not 0.5 <= p0 <= 1.0:
        raise ValueError("p0 must lie in [0.5, 1]")
    if p_plus > p0:
        return 1
    if (1.0 - p_plus) > p0:
        return -1
    if live_idfull is None:
        raise ValueError("fallback requires a defined live index value")
    return 1 if live_idfull - p_da >= 0 else -1


def sign_rest(p_plus: float) -> int:
    return 1 if p_plus > 0.5 else -1
