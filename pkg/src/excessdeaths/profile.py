"""Before/after Poisson comparison via profile likelihood.

Pre-emergency daily deaths are Poisson with a background rate; post-emergency
days add an excess rate on top. Profiling the background rate out of the
likelihood gives a closed-form restricted maximum and a likelihood-ratio
statistic whose chi-square calibration yields confidence intervals for the
excess rate, and hence for cumulative excess deaths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.special import xlogy
from sklearn.base import BaseEstimator

from .errors import DomainError, FitError
from .timeseries import DailyCountSeries
from .validation import check_probability

#: absolute convergence tolerance for interval endpoints
CI_TOL = 1e-8
_MAX_EXPANSIONS = 200


@dataclass(frozen=True)
class SummaryCounts:
    """Sufficient statistics: total deaths and day counts on each side."""

    pre_deaths: int
    pre_days: int
    post_deaths: int
    post_days: int

    def __post_init__(self):
        for name in ("pre_deaths", "pre_days", "post_deaths", "post_days"):
            value = getattr(self, name)
            if value != int(value):
                raise DomainError(f"{name} must be an integer, got {value}")
            object.__setattr__(self, name, int(value))
        if self.pre_deaths < 0 or self.post_deaths < 0:
            raise DomainError("death totals must be nonnegative")
        if self.pre_days < 1 or self.post_days < 1:
            raise DomainError("day counts must be at least 1")

    @classmethod
    def from_series(cls, deaths: DailyCountSeries, pre_start, emergency_date,
                    post_end) -> "SummaryCounts":
        """Summarize a daily series into pre/post totals around an emergency."""
        emergency = deaths.index_of(emergency_date)
        pre = deaths.index_of(pre_start)
        post = deaths.index_of(post_end)
        if not pre < emergency <= post:
            raise DomainError("window must satisfy pre_start < emergency_date "
                              "<= post_end")
        x = int(deaths.counts[pre:emergency].sum())
        y = int(deaths.counts[emergency:post + 1].sum())
        return cls(x, emergency - pre, y, post - emergency + 1)

    @property
    def background_mle(self) -> float:
        """Unrestricted MLE of the background daily rate."""
        return self.pre_deaths / self.pre_days

    @property
    def excess_rate_mle(self) -> float:
        """Unrestricted MLE of the excess daily rate (may be negative)."""
        return self.post_deaths / self.post_days - self.pre_deaths / self.pre_days


@dataclass(frozen=True)
class ProfilePoint:
    excess_rate: float
    restricted_background: float
    neg2loglrt: float


@dataclass(frozen=True)
class Model1Result:
    counts: SummaryCounts
    alpha: float
    background_mle: float
    excess_rate_mle: float
    cumulative_excess: float
    ci_excess_rate: tuple[float, float]
    ci_cumulative: tuple[float, float]


def log_likelihood(counts: SummaryCounts, background: float,
                   excess_rate: float) -> float:
    """Constant-free Poisson log-likelihood of the pre/post totals.

    Uses the 0*log(0) = 0 convention so boundary rates with zero observed
    deaths stay finite.
    """
    x, m = counts.pre_deaths, counts.pre_days
    y, n = counts.post_deaths, counts.post_days
    post_rate = background + excess_rate
    if background < 0 or (x > 0 and background == 0):
        raise DomainError(f"background rate {background} inadmissible for x={x}")
    if post_rate < 0 or (y > 0 and post_rate == 0):
        raise DomainError(f"post rate {post_rate} inadmissible for y={y}")
    return float(xlogy(x, background) - m * background
                 + xlogy(y, post_rate) - n * post_rate)


def restricted_background_mle(counts: SummaryCounts,
                              excess_rate: float) -> float:
    """Background rate maximizing the likelihood at a fixed excess rate.

    Solves the profiled score equation x/b - m + y/(b + rho) - n = 0, whose
    admissible solution is the larger root of a quadratic (the smaller root
    is never the maximizer; at rho = 0 it is nonpositive).
    """
    x, m = counts.pre_deaths, counts.pre_days
    y, n = counts.post_deaths, counts.post_days
    total_days = m + n
    b = x + y - total_days * excess_rate
    disc = b * b + 4.0 * total_days * x * excess_rate
    if disc < 0.0:
        # analytically nonnegative; tolerate rounding at the double root
        if disc < -1e-9 * max(1.0, b * b):
            raise DomainError(
                f"no admissible restricted maximum at excess rate {excess_rate}")
        disc = 0.0
    if x * excess_rate == 0.0:
        root = max(b, 0.0) / total_days  # disc == b*b exactly
    elif b > 0.0:
        root = (b + math.sqrt(disc)) / (2.0 * total_days)
    else:
        # b <= 0 happens only for positive excess rates; this form avoids
        # cancellation between b and sqrt(disc)
        root = 2.0 * x * excess_rate / (math.sqrt(disc) - b)
    root = max(root, 0.0)
    if y > 0 and root + excess_rate <= 0.0:
        raise DomainError(
            f"excess rate {excess_rate} leaves no admissible post rate")
    return root


def neg2_log_lrt(counts: SummaryCounts, excess_rate: float) -> float:
    """Likelihood-ratio statistic -2[l(restricted) - l(unrestricted)] >= 0."""
    restricted = restricted_background_mle(counts, excess_rate)
    at_mle = log_likelihood(counts, counts.background_mle,
                            counts.excess_rate_mle)
    at_restricted = log_likelihood(counts, restricted, excess_rate)
    # analytically >= 0; clamp away rounding noise near the maximum
    return max(0.0, 2.0 * (at_mle - at_restricted))


def profile_curve(counts: SummaryCounts, excess_rates) -> list[ProfilePoint]:
    points = []
    for rho in np.asarray(excess_rates, dtype=float):
        restricted = restricted_background_mle(counts, rho)
        points.append(ProfilePoint(float(rho), restricted,
                                   neg2_log_lrt(counts, rho)))
    return points


def _bisect_crossing(stat, lo, hi, cutoff):
    # invariant: stat(lo) < cutoff <= stat(hi) or the reverse
    f_lo = stat(lo) - cutoff
    while hi - lo > CI_TOL:
        mid = 0.5 * (lo + hi)
        if (stat(mid) - cutoff) * f_lo <= 0.0:
            hi = mid
        else:
            lo = mid
            f_lo = stat(lo) - cutoff
    return 0.5 * (lo + hi)


def profile_interval(counts: SummaryCounts,
                     alpha: float = 0.05) -> tuple[float, float]:
    """Likelihood-ratio confidence interval for the excess daily rate.

    Walks outward from the maximum until the statistic exceeds the
    chi-square(1) critical value, then bisects each crossing.
    """
    check_probability(alpha)
    cutoff = float(stats.chi2.ppf(1.0 - alpha, df=1))
    rho_hat = counts.excess_rate_mle

    def stat(rho):
        try:
            return neg2_log_lrt(counts, rho)
        except DomainError:
            return math.inf

    scale = max(1.0, abs(rho_hat),
                math.sqrt(counts.background_mle / counts.post_days + 1e-12))
    endpoints = []
    for direction in (-1.0, 1.0):
        step = scale
        inner = rho_hat
        for _ in range(_MAX_EXPANSIONS):
            outer = rho_hat + direction * step
            if stat(outer) > cutoff:
                break
            inner = outer
            step *= 2.0
        else:
            raise FitError(
                f"failed to bracket the {alpha} interval endpoint "
                f"in direction {direction:+.0f}")
        lo, hi = sorted((inner, outer))
        endpoints.append(_bisect_crossing(stat, lo, hi, cutoff))
    return endpoints[0], endpoints[1]


def cumulative_excess_mle(counts: SummaryCounts) -> float:
    """Point estimate of cumulative excess deaths over the post window."""
    return counts.post_days * counts.excess_rate_mle


def fit_profile_model(counts: SummaryCounts,
                      alpha: float = 0.05) -> Model1Result:
    lo, hi = profile_interval(counts, alpha)
    n = counts.post_days
    return Model1Result(
        counts=counts,
        alpha=alpha,
        background_mle=counts.background_mle,
        excess_rate_mle=counts.excess_rate_mle,
        cumulative_excess=cumulative_excess_mle(counts),
        ci_excess_rate=(lo, hi),
        ci_cumulative=(n * lo, n * hi),
    )


@dataclass(frozen=True)
class HorizonInterval:
    horizon_days: int
    estimate: float
    lo: float
    hi: float


def bonferroni_cumulative(horizons, alpha: float = 0.05) -> list[HorizonInterval]:
    """Jointly conservative cumulative-excess intervals over nested horizons.

    Each horizon's interval is computed at level 1 - alpha/H (H = number of
    horizons) and scaled by its day count, so the family covers every true
    cumulative excess simultaneously with probability at least 1 - alpha.
    """
    horizons = list(horizons)
    if not horizons:
        raise DomainError("at least one horizon is required")
    check_probability(alpha)
    first = horizons[0]
    prev = None
    for counts in horizons:
        if (counts.pre_deaths, counts.pre_days) != (first.pre_deaths,
                                                    first.pre_days):
            raise DomainError("horizons must share the pre-emergency summary")
        if prev is not None and (counts.post_days <= prev.post_days
                                 or counts.post_deaths < prev.post_deaths):
            raise DomainError("horizons must be nested with growing windows")
        prev = counts
    level = alpha / len(horizons)
    out = []
    for counts in horizons:
        lo, hi = profile_interval(counts, level)
        k = counts.post_days
        out.append(HorizonInterval(k, cumulative_excess_mle(counts),
                                   k * lo, k * hi))
    return out


def anova_precheck(groups) -> tuple[float, float]:
    """One-way ANOVA for equal mean daily deaths across groups.

    Treats counts as approximately normal; used to check that the chosen
    pre-emergency window has a homogeneous background rate.
    """
    arrays = []
    for g in groups:
        arr = np.asarray(g.counts if isinstance(g, DailyCountSeries) else g,
                         dtype=float)
        if arr.size < 2:
            raise DomainError("each group needs at least 2 observations")
        arrays.append(arr)
    if len(arrays) < 2:
        raise DomainError("at least two groups are required")
    f_stat, p = stats.f_oneway(*arrays)
    if not np.isfinite(f_stat):
        raise DomainError("degenerate groups: ANOVA statistic undefined")
    return float(f_stat), float(p)


class ProfileLikelihoodModel(BaseEstimator):
    """Estimator wrapper for the before/after profile-likelihood comparison.

    Parameters
    ----------
    alpha : float
        Two-sided miscoverage level for the reported intervals.
    """

    def __init__(self, alpha: float = 0.05):
        self.alpha = alpha

    def fit(self, pre_counts, post_counts):
        """Fit from arrays of pre- and post-emergency daily death counts."""
        pre = np.asarray(pre_counts)
        post = np.asarray(post_counts)
        counts = SummaryCounts(int(pre.sum()), pre.size,
                               int(post.sum()), post.size)
        self.counts_ = counts
        self.result_ = fit_profile_model(counts, self.alpha)
        self.background_rate_ = self.result_.background_mle
        self.excess_rate_ = self.result_.excess_rate_mle
        self.cumulative_excess_ = self.result_.cumulative_excess
        self.ci_excess_rate_ = self.result_.ci_excess_rate
        self.ci_cumulative_ = self.result_.ci_cumulative
        return self

    def expected_excess(self, n_days: int) -> float:
        """Expected excess deaths over ``n_days`` at the fitted excess rate."""
        return n_days * self.excess_rate_
