from __future__ import annotations

import numpy as np
import pytest
from scipy import stats

from intracast.bayes_engine import PredictiveMixture
from intracast.predictive import (
    build_grid,
    cut_schedule,
    hdi_at_cut,
    hdi_family,
    point_estimate,
    rest_probs,
    select_pi,
    sign_rest,
    sign_spread,
    spread_probs,
)


def gaussian(mu=0.0, sigma=1.0):
    return PredictiveMixture(means=np.array([mu]), stds=np.array([sigma]))


def bimodal(mu1=0.0, mu2=6.0, s1=1.0, s2=1.0, w=0.5):
    # equal-weight mixture built by repeating components
    reps = 10
    n1 = int(round(2 * reps * w))
    means = np.array([mu1] * n1 + [mu2] * (2 * reps - n1), dtype=float)
    stds = np.array([s1] * n1 + [s2] * (2 * reps - n1), dtype=float)
    return PredictiveMixture(means=means, stds=stds)


class TestGrid:
    def test_cdf_monotone_and_normalised(self):
        grid = build_grid(bimodal(), k=2048)
        assert np.all(np.diff(grid.cdf) >= -1e-12)
        assert abs(grid.cdf[-1] - 1.0) < 1e-3
        assert np.all(grid.density >= 0)

    def test_support_covers_eight_sigma(self):
        grid = build_grid(gaussian(10.0, 2.0))
        assert grid.xs[0] == pytest.approx(10 - 16)
        assert grid.xs[-1] == pytest.approx(10 + 16)


class TestHdiAtCut:
    def test_zero_cut_full_support(self):
        grid = build_grid(gaussian())
        intervals, alpha = hdi_at_cut(grid, 0.0)
        assert len(intervals) == 1
        assert intervals[0][0] == grid.xs[0] and intervals[0][1] == grid.xs[-1]
        assert alpha == pytest.approx(1.0, abs=1e-3)

    def test_gaussian_one_sigma_cut(self):
        mu, sigma = 2.0, 1.5
        grid = build_grid(gaussian(mu, sigma))
        p_cut = float(stats.norm.pdf(mu + sigma, mu, sigma))
        intervals, alpha = hdi_at_cut(grid, p_cut)
        assert len(intervals) == 1
        lo, hi = intervals[0]
        assert lo == pytest.approx(mu - sigma, abs=2e-3 * sigma)
        assert hi == pytest.approx(mu + sigma, abs=2e-3 * sigma)
        assert alpha == pytest.approx(0.6827, abs=2e-3)

    def test_bimodal_cut_above_valley_gives_two(self):
        mix = bimodal()
        grid = build_grid(mix)
        valley = float(mix.pdf(np.array([3.0]))[0])
        intervals, _ = hdi_at_cut(grid, valley * 3)
        assert len(intervals) == 2

    def test_negative_cut_rejected(self):
        grid = build_grid(gaussian())
        with pytest.raises(ValueError):
            hdi_at_cut(grid, -0.1)


class TestSchedule:
    def test_alpha_non_decreasing(self):
        grid = build_grid(bimodal())
        family = hdi_family(grid)
        alphas = [lvl.alpha for lvl in family]
        assert all(b >= a - 1e-9 for a, b in zip(alphas, alphas[1:]))

    def test_last_level_near_total_mass(self):
        grid = build_grid(gaussian())
        family = hdi_family(grid)
        assert family[-1].alpha >= 0.999

    def test_unimodal_all_levels_single_interval(self):
        grid = build_grid(gaussian())
        for lvl in hdi_family(grid):
            assert len(lvl.intervals) == 1

    def test_nesting(self):
        grid = build_grid(bimodal())
        family = hdi_family(grid)
        for prev, cur in zip(family, family[1:]):
            # every interval at the higher cut sits inside the lower-cut set
            for lo, hi in prev.intervals:
                assert any(
                    c_lo <= lo + 1e-9 and hi - 1e-9 <= c_hi
                    for c_lo, c_hi in cur.intervals
                )

    def test_hundred_levels(self):
        grid = build_grid(gaussian())
        assert len(cut_schedule(grid)) == 100


class TestSelectPi:
    def test_single_gaussian_fallback_ninety(self):
        mu, sigma = 5.0, 2.0
        grid = build_grid(gaussian(mu, sigma))
        pi = select_pi(grid)
        assert pi.from_fallback
        z, = stats.norm.ppf([0.95])
        assert pi.lower == pytest.approx(mu - z * sigma, abs=1e-3 * sigma)
        assert pi.upper == pytest.approx(mu + z * sigma, abs=1e-3 * sigma)
        assert pi.credibility == pytest.approx(0.9, abs=2e-3)

    def test_fig4_style_topology_picks_max_ratio(self):
        # two peaks close enough to fuse plus two isolated ones; the
        # tall narrow member of the fusing pair wins on mass per width
        means = np.array([0.0] * 12 + [1.6] * 4 + [8.0] * 3 + [-7.0] * 1, dtype=float)
        stds = np.array([0.4] * 12 + [0.5] * 4 + [0.6] * 3 + [0.5] * 1, dtype=float)
        mix = PredictiveMixture(means=means, stds=stds)
        grid = build_grid(mix)
        pi = select_pi(grid)
        assert not pi.from_fallback
        assert pi.contains(0.0)
        assert not pi.contains(8.0)

        # independent check: of the intervals at the level before the
        # first fusion, the chosen one maximises mass/width
        family = hdi_family(grid)
        fuse_prev = None
        for prev, cur in zip(family, family[1:]):
            if len(cur.intervals) < len(prev.intervals) and len(prev.intervals) > 1:
                fuse_prev = prev
                break
        assert fuse_prev is not None
        ratios = []
        for lo, hi in fuse_prev.intervals:
            mass = float(grid.cdf_at(hi) - grid.cdf_at(lo))
            ratios.append(mass / (hi - lo))
        best = fuse_prev.intervals[int(np.argmax(ratios))]
        assert pi.lower == pytest.approx(best[0], abs=1e-9)
        assert pi.upper == pytest.approx(best[1], abs=1e-9)

    def test_symmetric_bimodal_tie_breaks_left(self):
        mix = bimodal(mu1=-4.0, mu2=4.0)
        grid = build_grid(mix)
        pi = select_pi(grid)
        if not pi.from_fallback:
            assert pi.upper < 0  # leftmost of the two equal-ratio intervals

    def test_credibility_matches_mass_integral(self):
        mix = bimodal()
        grid = build_grid(mix)
        pi = select_pi(grid)
        mass = float(grid.cdf_at(pi.upper) - grid.cdf_at(pi.lower))
        assert pi.credibility == pytest.approx(mass, abs=1e-4)


class TestPointEstimate:
    def test_symmetric_centre(self):
        grid = build_grid(gaussian(3.0, 1.0))
        pi = select_pi(grid)
        y_hat = point_estimate(grid, pi)
        assert y_hat == pytest.approx(3.0, abs=1e-3)

    def test_inside_interval(self):
        mix = bimodal(mu1=0, mu2=5, s1=0.8, s2=1.7, w=0.7)
        grid = build_grid(mix)
        pi = select_pi(grid)
        y_hat = point_estimate(grid, pi)
        assert pi.lower < y_hat < pi.upper

    def test_skewed_matches_grid_oracle(self):
        mix = PredictiveMixture(
            means=np.array([0.0, 0.5, 3.0]), stds=np.array([0.5, 1.0, 2.0])
        )
        grid = build_grid(mix)
        pi = select_pi(grid)
        y_hat = point_estimate(grid, pi)
        # oracle: dense trapezoid integration inside the interval
        xs = np.linspace(pi.lower, pi.upper, 200_001)
        pdf = mix.pdf(xs)
        cum = np.concatenate([[0.0], np.cumsum((pdf[1:] + pdf[:-1]) / 2 * np.diff(xs))])
        target = cum[-1] / 2
        oracle = float(np.interp(target, cum, xs))
        span = grid.xs[-1] - grid.xs[0]
        assert abs(y_hat - oracle) < 1e-6 * span


class TestProbabilities:
    def test_threshold_below_support(self):
        grid = build_grid(gaussian(10, 1))
        p_minus, p_plus = spread_probs(grid, -50.0)
        assert p_plus == pytest.approx(1.0, abs=1e-12)

    def test_gaussian_median_threshold(self):
        grid = build_grid(gaussian(2.5, 1.0))
        p_minus, p_plus = spread_probs(grid, 2.5)
        assert p_minus == pytest.approx(0.5, abs=1e-12)
        assert p_minus + p_plus == pytest.approx(1.0, abs=1e-12)

    def test_two_component_matches_grid_cdf(self):
        mix = bimodal(mu1=0, mu2=4, s1=0.7, s2=1.2, w=0.4)
        grid = build_grid(mix, k=8192)
        for thr in (-1.0, 0.5, 2.0, 4.5):
            p_minus, _ = spread_probs(grid, thr)
            assert p_minus == pytest.approx(float(grid.cdf_at(thr)), abs=1e-6)

    def test_rest_undefined_live(self):
        grid = build_grid(gaussian())
        assert rest_probs(grid, None) is None


class TestSigns:
    def test_threshold_one_reduces_to_live_benchmark(self):
        for live, da in ((50.0, 40.0), (30.0, 40.0), (40.0, 40.0)):
            expect = 1 if live - da >= 0 else -1
            assert sign_spread(0.99, 1.0, live, da) == expect

    def test_clear_positive(self):
        assert sign_spread(0.9, 0.8, None, 0.0) == 1

    def test_fallback_negative_live_spread(self):
        assert sign_spread(0.6, 0.8, 35.0, 40.0) == -1

    def test_fallback_without_live_errors(self):
        with pytest.raises(ValueError):
            sign_spread(0.6, 0.8, None, 40.0)

    def test_rest_sign(self):
        assert sign_rest(0.51) == 1
        assert sign_rest(0.49) == -1
