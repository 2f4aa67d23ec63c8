"""
Tests for hcgl_recorder.statistics - Confidence intervals
"""

import math

import pytest
from scipy import stats as sp_stats

from hcgl_core.schemas import ConfidenceInterval
from hcgl_recorder.statistics import (
    contains,
    ratio_interval,
    ratio_of_means_interval,
    t_interval,
)


def _ci(mean, half_width, n=10):
    return ConfidenceInterval(mean=mean, half_width=half_width, level=0.95, n=n)


class TestTInterval:
    def test_matches_scipy(self):
        """Half-width equals the scipy Student-t interval."""
        samples = [1.2, 0.8, 1.9, 1.4, 1.1, 0.7]
        ci = t_interval(samples)
        low, high = sp_stats.t.interval(
            0.95, df=len(samples) - 1, loc=ci.mean, scale=sp_stats.sem(samples)
        )
        assert ci.mean == pytest.approx(sum(samples) / len(samples))
        assert ci.low == pytest.approx(low)
        assert ci.high == pytest.approx(high)
        assert ci.n == 6

    def test_level(self):
        """A wider level gives a wider interval."""
        samples = [3.0, 4.0, 5.0, 6.0]
        assert t_interval(samples, 0.99).half_width > t_interval(samples, 0.9).half_width

    def test_degenerate_inputs(self):
        """NaNs are dropped; fewer than two samples give an infinite half-width."""
        single = t_interval([2.0, math.nan])
        assert single.mean == 2.0
        assert single.n == 1
        assert math.isinf(single.half_width)

        empty = t_interval([])
        assert math.isnan(empty.mean)
        assert empty.n == 0


class TestRatios:
    def test_ratio_interval(self):
        """Relative half-widths add in quadrature."""
        ci = ratio_interval(_ci(10.0, 1.0), _ci(5.0, 0.5, n=4))
        assert ci.mean == pytest.approx(2.0)
        assert ci.half_width == pytest.approx(2.0 * math.hypot(0.1, 0.1))
        assert ci.n == 4

    def test_zero_denominator(self):
        ci = ratio_interval(_ci(1.0, 0.1), _ci(0.0, 0.1))
        assert math.isnan(ci.mean)
        assert math.isinf(ci.half_width)

    def test_ratio_of_means(self):
        """Proportional pairs have no residual spread."""
        ci = ratio_of_means_interval([1.0, 2.0, 3.0], [2.0, 4.0, 6.0])
        assert ci.mean == pytest.approx(0.5)
        assert ci.half_width == pytest.approx(0.0)

        noisy = ratio_of_means_interval([1.0, 2.5, 2.7, 4.1], [2.0, 4.0, 6.0, 8.0])
        assert noisy.mean == pytest.approx(10.3 / 20.0)
        assert noisy.half_width > 0

    def test_contains(self):
        ci = _ci(1.0, 0.5)
        assert contains(ci, 1.4)
        assert not contains(ci, 1.6)
