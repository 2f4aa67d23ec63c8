"""
HCGL Recorder Statistics - Student-t intervals for replica and batch means.
"""

import math
from typing import Iterable, Sequence

import numpy as np
from scipy import stats as sp_stats

from hcgl_core.schemas import ConfidenceInterval


def t_interval(samples: Iterable[float], level: float = 0.95) -> ConfidenceInterval:
    """
    Student-t confidence interval for the mean of i.i.d. samples.

    NaN samples are dropped. With fewer than two samples the half-width is
    infinite.

    Args:
        samples: Observations
        level: Two-sided confidence level

    Returns:
        ConfidenceInterval
    """
    values = np.asarray([x for x in samples if not math.isnan(x)], dtype=float)
    n = int(values.size)
    if n == 0:
        return ConfidenceInterval(mean=math.nan, half_width=math.inf, level=level, n=0)
    mean = float(values.mean())
    if n < 2:
        return ConfidenceInterval(mean=mean, half_width=math.inf, level=level, n=n)
    sem = float(values.std(ddof=1)) / math.sqrt(n)
    quantile = float(sp_stats.t.ppf(0.5 + level / 2, df=n - 1))
    return ConfidenceInterval(mean=mean, half_width=quantile * sem, level=level, n=n)


def ratio_interval(
    numerator: ConfidenceInterval, denominator: ConfidenceInterval
) -> ConfidenceInterval:
    """
    Delta-method interval for a ratio of two independent estimates.

    Relative half-widths add in quadrature; the level of the numerator is kept.
    """
    if denominator.mean == 0:
        return ConfidenceInterval(
            mean=math.nan, half_width=math.inf, level=numerator.level, n=0
        )
    ratio = numerator.mean / denominator.mean
    relative = math.hypot(
        numerator.half_width / numerator.mean if numerator.mean else math.inf,
        denominator.half_width / denominator.mean,
    )
    return ConfidenceInterval(
        mean=ratio,
        half_width=abs(ratio) * relative,
        level=numerator.level,
        n=min(numerator.n, denominator.n),
    )


def ratio_of_means_interval(
    numerators: Sequence[float], denominators: Sequence[float], level: float = 0.95
) -> ConfidenceInterval:
    """
    Interval for sum(x) / sum(y) over paired observations (renewal-reward form).

    Uses the linearized residuals x_k - r y_k for the standard error.
    """
    x = np.asarray(numerators, dtype=float)
    y = np.asarray(denominators, dtype=float)
    n = int(x.size)
    if n == 0 or y.sum() == 0:
        return ConfidenceInterval(mean=math.nan, half_width=math.inf, level=level, n=n)
    ratio = float(x.sum() / y.sum())
    if n < 2:
        return ConfidenceInterval(mean=ratio, half_width=math.inf, level=level, n=n)
    residuals = x - ratio * y
    sem = float(residuals.std(ddof=1)) / (math.sqrt(n) * float(y.mean()))
    quantile = float(sp_stats.t.ppf(0.5 + level / 2, df=n - 1))
    return ConfidenceInterval(mean=ratio, half_width=quantile * sem, level=level, n=n)


def contains(ci: ConfidenceInterval, value: float) -> bool:
    return ci.low <= value <= ci.high
