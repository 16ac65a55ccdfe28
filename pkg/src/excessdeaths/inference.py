"""Excess-death curves and posterior-simulation confidence bands.

Expected excess deaths on a day inside post-emergency period l is the fitted
mean with the period effect and observed population, minus the fitted mean
with no period effect and the counterfactual (no-displacement) population;
days outside every indicator period have exactly zero excess. Uncertainty
comes from simulating coefficient vectors from their approximate Gaussian
posterior and re-evaluating the excess functional for every draw.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .pirls import FitResult
from .timeseries import PopulationSeries, RATE_SCALE, align
from .validation import as_date, check_probability


@dataclass(frozen=True, eq=False)
class ExcessCurve:
    """Daily expected excess deaths and its two fitted-mean components."""

    dates: list
    excess: np.ndarray
    mu_with_effect: np.ndarray
    mu_baseline: np.ndarray


@dataclass(frozen=True, eq=False)
class PosteriorDraws:
    """Coefficient draws from N(coef, cov); one row per draw."""

    values: np.ndarray
    seed: int


@dataclass(frozen=True, eq=False)
class Band:
    """Per-date interval bounds of a functional at a confidence level."""

    lo: np.ndarray
    hi: np.ndarray
    kind: str  # "pointwise" | "simultaneous"
    level: float

    def slice(self, start: int, stop: int | None = None) -> "Band":
        return Band(self.lo[start:stop], self.hi[start:stop],
                    self.kind, self.level)


def _period_effect_rows(design, coef_rows: np.ndarray):
    """Split per-draw linear predictors into period-free base and effect.

    Returns (base, gamma_row, mask): ``base`` is draws x days of the
    period-free predictor (no offset), ``gamma_row`` the active period
    coefficient per day (0 where no indicator), ``mask`` the active days.
    """
    base_cols = design.base_cols
    base = coef_rows[:, base_cols] @ design.X[:, base_cols].T
    gamma_row = np.zeros((coef_rows.shape[0], design.n_obs))
    mask = np.zeros(design.n_obs, dtype=bool)
    for l, col in design.period_cols.items():
        days = design.row_periods == l
        mask |= days
        gamma_row[:, days] = coef_rows[:, col][:, None]
    return base, gamma_row, mask


def excess_values(fit: FitResult, coef_rows: np.ndarray,
                  pop: PopulationSeries, pop_star: PopulationSeries):
    """Excess, with-effect mean, and baseline mean for coefficient rows."""
    design = fit.design
    if len(pop) != design.n_obs or pop.start_date != design.dates[0]:
        raise DomainError("population series is misaligned with the design")
    align(pop, pop_star)
    base, gamma_row, mask = _period_effect_rows(design, coef_rows)
    log_n = np.log(pop.values)
    log_n_star = np.log(pop_star.values)
    mu = np.where(mask, np.exp(base + gamma_row + log_n), 0.0)
    psi = np.where(mask, np.exp(base + log_n_star), 0.0)
    return mu - psi, mu, psi


def excess_curve(fit: FitResult, pop: PopulationSeries,
                 pop_star: PopulationSeries) -> ExcessCurve:
    """Plug-in daily excess-death curve for a converged fit."""
    if not fit.converged:
        raise DomainError("excess curve requires a converged fit")
    excess, mu, psi = excess_values(fit, fit.coef[None, :], pop, pop_star)
    return ExcessCurve(fit.design.dates, excess[0], mu[0], psi[0])


def cumulative_excess(curve: ExcessCurve, start, end) -> float:
    """Total excess deaths over the inclusive date window [start, end]."""
    start, end = as_date(start), as_date(end)
    dates = curve.dates
    if start < dates[0] or end > dates[-1]:
        raise DomainError(f"window [{start}, {end}] outside the curve range")
    i = (start - dates[0]).days
    j = (end - dates[0]).days
    if j < i:
        raise DomainError(f"window end {end} precedes start {start}")
    return float(curve.excess[i:j + 1].sum())


def posterior_draws(fit: FitResult, size: int = 10000,
                    seed: int = 0) -> PosteriorDraws:
    """Draw coefficient vectors from the approximate Gaussian posterior.

    Uses a symmetric (eigen) square root of the covariance; eigenvalues in
    [-1e-10, 0) are clipped to zero, anything more negative is an error.
    Reproducible: a fixed seed yields bit-identical draws.
    """
    if size < 1:
        raise DomainError("at least one draw is required")
    cov = 0.5 * (fit.cov + fit.cov.T)
    eigvals, eigvecs = np.linalg.eigh(cov)
    if eigvals.min() < -1e-10:
        raise DomainError(
            f"coefficient covariance has eigenvalue {eigvals.min():.3e} "
            "below the repairable tolerance")
    root = eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((size, len(fit.coef)))
    return PosteriorDraws(fit.coef[None, :] + z @ root.T, seed)


def functional_values(fit: FitResult, draws: PosteriorDraws,
                      pop: PopulationSeries, pop_star: PopulationSeries,
                      functional: str = "excess"):
    """Evaluate a per-day functional at the estimate and at every draw.

    ``functional`` is ``"excess"`` (daily excess deaths), ``"cumulative"``
    (running total of daily excess), or ``"rate"`` (fitted mortality rate
    per 1000 person-years). Returns (estimate, draw matrix).
    """
    if functional in ("excess", "cumulative"):
        est = excess_values(fit, fit.coef[None, :], pop, pop_star)[0][0]
        values = excess_values(fit, draws.values, pop, pop_star)[0]
        if functional == "cumulative":
            est = np.cumsum(est)
            values = np.cumsum(values, axis=1)
        return est, values
    if functional == "rate":
        design = fit.design
        eta = design.offset[None, :] + draws.values @ design.X.T
        est = np.exp(design.offset + design.X @ fit.coef)
        return (est / pop.values * RATE_SCALE,
                np.exp(eta) / pop.values[None, :] * RATE_SCALE)
    raise DomainError(f"unknown functional {functional!r}")


def interval_pointwise(estimate: np.ndarray, values: np.ndarray,
                       alpha: float = 0.05) -> Band:
    """Per-date empirical quantile interval over draws of a functional."""
    check_probability(alpha)
    values = np.atleast_2d(values)
    if values.shape[0] < 1000:
        warnings.warn(f"only {values.shape[0]} draws; pointwise quantiles "
                      "are recommended with at least 1000", stacklevel=2)
    lo = np.quantile(values, alpha / 2.0, axis=0)
    hi = np.quantile(values, 1.0 - alpha / 2.0, axis=0)
    return Band(lo, hi, "pointwise", 1.0 - alpha)


def band_simultaneous(estimate: np.ndarray, values: np.ndarray,
                      alpha: float = 0.05) -> Band:
    """Whole-curve band via the max standardized deviation over draws.

    The half-width multiplies each date's draw standard deviation by the
    empirical (1-alpha) quantile of max_t |draw_t - estimate_t| / sd_t, so
    the band contains an entire drawn curve with probability about 1-alpha.
    """
    check_probability(alpha)
    values = np.atleast_2d(values)
    if values.shape[0] < 5000:
        warnings.warn(f"only {values.shape[0]} draws; simultaneous bands "
                      "are recommended with at least 5000", stacklevel=2)
    sd = np.maximum(values.std(axis=0, ddof=1), 1e-12)
    deviations = np.max(np.abs(values - estimate[None, :]) / sd[None, :],
                        axis=1)
    critical = float(np.quantile(deviations, 1.0 - alpha))
    return Band(estimate - critical * sd, estimate + critical * sd,
                "simultaneous", 1.0 - alpha)


def posterior_band(fit: FitResult, pop: PopulationSeries,
                   pop_star: PopulationSeries, functional: str = "cumulative",
                   kind: str = "simultaneous", alpha: float = 0.05,
                   size: int = 10000, seed: int = 0) -> Band:
    """One-call band for an excess functional of a fitted model."""
    draws = posterior_draws(fit, size=size, seed=seed)
    estimate, values = functional_values(fit, draws, pop, pop_star, functional)
    if kind == "pointwise":
        return interval_pointwise(estimate, values, alpha)
    if kind == "simultaneous":
        return band_simultaneous(estimate, values, alpha)
    raise DomainError(f"unknown band kind {kind!r}")
