"""Penalized Poisson log-linear model of daily deaths.

The design combines an intercept, 0/1 indicators for post-emergency periods,
optional extra covariates, a cyclic seasonal smooth of day-of-year, and a
year trend (linear by default), with log population as a fixed offset.
Coefficient significance is assessed by Wald tests and nested models by a
generalized likelihood-ratio test on the deviance scale.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import stats
from sklearn.base import BaseEstimator

from . import basis as basis_mod
from .errors import DomainError
from .pirls import (FitResult, deviance_residuals, pirls_fit,
                    select_smoothing)
from .timeseries import (DailyCountSeries, PeriodPartition, PopulationSeries,
                         align, day_of_year_fractions)
from .validation import check_finite

SEASONAL_DEFAULT_DIM = 32
TREND_SPLINE_DEFAULT_DIM = 8


@dataclass(frozen=True)
class SmoothTerm:
    """Configuration of one smooth model term.

    ``kind`` is ``"cyclic_cubic"`` (penalized periodic spline),
    ``"linear"`` (single unpenalized column) or ``"cubic"`` (penalized
    natural cubic spline, a polynomial-spline stand-in for a thin-plate
    term).
    """

    kind: str = "cyclic_cubic"
    basis_dim: int = SEASONAL_DEFAULT_DIM

    def __post_init__(self):
        if self.kind not in ("cyclic_cubic", "linear", "cubic"):
            raise DomainError(f"unknown smooth kind {self.kind!r}")
        if self.kind == "cyclic_cubic" and self.basis_dim < 4:
            raise DomainError("cyclic smooth needs basis_dim >= 4")
        if self.kind == "cubic" and self.basis_dim < 3:
            raise DomainError("cubic trend smooth needs basis_dim >= 3")


@dataclass(frozen=True)
class ModelSpec:
    """Structure of the log-linear model, independent of the data values."""

    partition: PeriodPartition
    include_periods: tuple[int, ...] | None = None
    seasonal: SmoothTerm = SmoothTerm("cyclic_cubic", SEASONAL_DEFAULT_DIM)
    trend: SmoothTerm = SmoothTerm("linear", 1)
    extra_covariates: dict | None = None
    offset_source: str = "adjusted"

    def __post_init__(self):
        if self.offset_source not in ("adjusted", "counterfactual"):
            raise DomainError(
                f"offset_source must be 'adjusted' or 'counterfactual', "
                f"got {self.offset_source!r}")
        if self.seasonal.kind != "cyclic_cubic":
            raise DomainError("the seasonal term must be a cyclic smooth")
        if self.trend.kind == "cyclic_cubic":
            raise DomainError("the trend term cannot be cyclic")
        if self.include_periods is not None:
            periods = tuple(sorted(set(int(l) for l in self.include_periods)))
            if any(not 1 <= l <= self.partition.n_periods for l in periods):
                raise DomainError("include_periods outside the partition")
            object.__setattr__(self, "include_periods", periods)
        if self.extra_covariates is not None:
            names = list(self.extra_covariates)
            if len(set(names)) != len(names):
                raise DomainError("covariate names must be unique")

    @property
    def periods(self) -> tuple[int, ...]:
        if self.include_periods is not None:
            return self.include_periods
        return tuple(range(1, self.partition.n_periods + 1))


@dataclass(frozen=True)
class SmoothBlock:
    """A fitted smooth term's columns and enough state to rebuild them."""

    name: str
    cols: slice
    penalty: np.ndarray | None
    kind: str
    knots: np.ndarray | None
    transform: np.ndarray | None
    trend_map: basis_mod.LinearTrend | None = None

    def columns_for(self, dates) -> np.ndarray:
        if self.kind == "cyclic_cubic":
            x = day_of_year_fractions(dates)
            raw = basis_mod.cyclic_cubic_design(x, self.knots)
            return raw @ self.transform
        if self.kind == "linear":
            return self.trend_map.column(dates)[:, None]
        if self.kind == "cubic":
            x = self.trend_map.column(dates)
            raw = basis_mod.natural_cubic_design(x, self.knots)
            return raw @ self.transform
        raise DomainError(f"unknown smooth kind {self.kind!r}")


@dataclass
class DesignMatrix:
    """Assembled model matrix with response, offset, and penalty metadata."""

    X: np.ndarray
    y: np.ndarray
    offset: np.ndarray
    dates: list
    names: list
    period_cols: dict
    row_periods: np.ndarray
    smooths: list
    spec: ModelSpec

    @property
    def n_obs(self) -> int:
        return len(self.y)

    @property
    def n_coef(self) -> int:
        return self.X.shape[1]

    @property
    def penalized_blocks(self):
        return [s for s in self.smooths if s.penalty is not None]

    @property
    def parametric_cols(self) -> list[int]:
        first_smooth = min((s.cols.start for s in self.smooths),
                           default=self.n_coef)
        return list(range(first_smooth))

    @property
    def term_columns(self) -> dict:
        cols = {"parametric": slice(0, self.parametric_cols[-1] + 1
                                    if self.parametric_cols else 0)}
        for s in self.smooths:
            cols[s.name] = s.cols
        return cols

    @property
    def base_cols(self) -> np.ndarray:
        """Columns of the period-free linear predictor (intercept, extras, smooths)."""
        period = set(self.period_cols.values())
        return np.array([j for j in range(self.n_coef) if j not in period])

    def rows_for(self, dates) -> np.ndarray:
        """Model-matrix rows for new dates (period indicators included)."""
        cols, included = self.spec.partition.indicator_matrix(
            dates, self.spec.periods)
        out = np.zeros((len(dates), self.n_coef))
        out[:, 0] = 1.0
        for j, l in enumerate(included):
            out[:, self.period_cols[l]] = cols[:, j]
        if self.spec.extra_covariates:
            raise DomainError("prediction at new dates is not supported "
                              "with extra covariates")
        for s in self.smooths:
            out[:, s.cols] = s.columns_for(dates)
        return out


def assemble_design(spec: ModelSpec, deaths: DailyCountSeries,
                    pop: PopulationSeries,
                    pop_star: PopulationSeries | None = None) -> DesignMatrix:
    """Build the model matrix, offset, and penalties for aligned series.

    Every post-emergency day falls in at most one indicator column; days in
    periods not included in ``spec`` (or past the last boundary) carry all-zero
    indicators and are treated as background.
    """
    align(deaths, pop)
    if pop_star is not None:
        align(deaths, pop_star)
    if spec.offset_source == "counterfactual":
        if pop_star is None:
            raise DomainError("counterfactual offset requested but no "
                              "counterfactual population supplied")
        offset = np.log(pop_star.values)
    else:
        offset = np.log(pop.values)

    dates = deaths.dates
    names = ["intercept"]
    columns = [np.ones((len(dates), 1))]

    indicator, included = spec.partition.indicator_matrix(dates, spec.periods)
    period_cols = {}
    for j, l in enumerate(included):
        period_cols[l] = len(names)
        names.append(f"period_{l}")
        columns.append(indicator[:, j:j + 1])

    if spec.extra_covariates:
        for name, values in spec.extra_covariates.items():
            values = np.asarray(values, dtype=float)
            if values.shape != (len(dates),):
                raise DomainError(f"covariate {name!r} has length "
                                  f"{values.shape}, expected {len(dates)}")
            check_finite(values, f"covariate {name!r}")
            names.append(name)
            columns.append(values[:, None])

    smooths = []
    start = sum(c.shape[1] for c in columns)

    doy = day_of_year_fractions(dates)
    knots = basis_mod.cyclic_knots(spec.seasonal.basis_dim)
    raw = basis_mod.cyclic_cubic_design(doy, knots)
    _, raw_penalty = basis_mod._cyclic_system(knots)
    seasonal_X, seasonal_S, transform = basis_mod.apply_sum_to_zero(
        raw, raw_penalty)
    smooths.append(SmoothBlock(
        name="seasonal", cols=slice(start, start + seasonal_X.shape[1]),
        penalty=seasonal_S, kind="cyclic_cubic", knots=knots,
        transform=transform))
    names += [f"seasonal_{i}" for i in range(seasonal_X.shape[1])]
    columns.append(seasonal_X)
    start += seasonal_X.shape[1]

    if spec.trend.kind == "linear":
        trend_col, trend_map = basis_mod.build_linear_term(dates)
        smooths.append(SmoothBlock(
            name="trend", cols=slice(start, start + 1), penalty=None,
            kind="linear", knots=None, transform=None, trend_map=trend_map))
        names.append("trend")
        columns.append(trend_col[:, None])
        start += 1
    else:
        trend_col, trend_map = basis_mod.build_linear_term(dates)
        tknots = np.linspace(trend_col.min(), trend_col.max(),
                             spec.trend.basis_dim)
        raw_t, raw_tS = basis_mod.build_natural_basis(trend_col, tknots)
        trend_X, trend_S, t_transform = basis_mod.apply_sum_to_zero(
            raw_t, raw_tS)
        smooths.append(SmoothBlock(
            name="trend", cols=slice(start, start + trend_X.shape[1]),
            penalty=trend_S, kind="cubic", knots=tknots,
            transform=t_transform, trend_map=trend_map))
        names += [f"trend_{i}" for i in range(trend_X.shape[1])]
        columns.append(trend_X)
        start += trend_X.shape[1]

    X = np.hstack(columns)
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise DomainError("design matrix is rank deficient after constraints")

    return DesignMatrix(
        X=X,
        y=deaths.counts.astype(np.int64),
        offset=offset,
        dates=dates,
        names=names,
        period_cols=period_cols,
        row_periods=spec.partition.row_periods(dates),
        smooths=smooths,
        spec=spec,
    )


def wald_test(fit: FitResult, period: int) -> tuple[float, float]:
    """Two-sided normal test of a period coefficient being zero."""
    try:
        col = fit.design.period_cols[period]
    except KeyError:
        raise DomainError(f"period {period} is not in the fitted model") from None
    se = fit.se(col)
    z = float(fit.coef[col] / se) if se > 0 else 0.0
    p = float(2.0 * stats.norm.sf(abs(z)))
    return z, p


@dataclass(frozen=True)
class EffectEstimate:
    period: int
    coef: float
    se: float
    multiplier: float


def multiplicative_effect(fit: FitResult, period: int) -> EffectEstimate:
    """Risk multiplier exp(coefficient) for a period, with coef and se."""
    try:
        col = fit.design.period_cols[period]
    except KeyError:
        raise DomainError(f"period {period} is not in the fitted model") from None
    coef = float(fit.coef[col])
    return EffectEstimate(period, coef, fit.se(col), float(np.exp(coef)))


def _check_nested(null_fit: FitResult, alt_fit: FitResult) -> int:
    nd, ad = null_fit.design, alt_fit.design
    if nd.dates != ad.dates or not np.array_equal(nd.y, ad.y):
        raise DomainError("nested models must share the response rows")
    if not np.allclose(nd.offset, ad.offset):
        raise DomainError("nested models must share the offset")
    null_periods = set(nd.period_cols)
    alt_periods = set(ad.period_cols)
    if not null_periods <= alt_periods:
        raise DomainError("null model periods are not a subset of the "
                          "alternative's")
    null_smooth = [(s.name, s.kind, s.cols.stop - s.cols.start)
                   for s in nd.smooths]
    alt_smooth = [(s.name, s.kind, s.cols.stop - s.cols.start)
                  for s in ad.smooths]
    if null_smooth != alt_smooth:
        raise DomainError("nested models must share their smooth structure")
    return len(alt_periods - null_periods)


def glrt(null_fit: FitResult, alt_fit: FitResult,
         df: int | None = None) -> tuple[float, float]:
    """Deviance-difference test of a null model nested in an alternative.

    ``df`` defaults to the number of parametric indicator terms dropped from
    the alternative. Smooth terms should be held at the alternative's
    smoothing parameters for a clean comparison (see ``fit_nested_pair``).
    """
    dropped = _check_nested(null_fit, alt_fit)
    if df is None:
        df = dropped
    stat = max(0.0, null_fit.deviance - alt_fit.deviance)
    if df == 0:
        return stat, 1.0
    return stat, float(stats.chi2.sf(stat, df))


def fit_nested_pair(spec: ModelSpec, null_periods, deaths, pop,
                    pop_star=None, reselect: bool = False):
    """Fit an alternative model and its nested null for a deviance test.

    By default the null reuses the alternative's REML-selected smoothing
    parameters so the models differ only in their parametric indicators;
    ``reselect=True`` re-runs REML for the null instead.
    """
    alt_design = assemble_design(spec, deaths, pop, pop_star)
    _, alt_fit = select_smoothing(alt_design)
    null_spec = replace(spec, include_periods=tuple(sorted(null_periods)))
    null_design = assemble_design(null_spec, deaths, pop, pop_star)
    if reselect:
        _, null_fit = select_smoothing(null_design)
    else:
        null_fit = pirls_fit(null_design, alt_fit.smoothing)
    return null_fit, alt_fit


@dataclass(frozen=True)
class DiagnosticsReport:
    dispersion: float
    residual_df: float
    acf: np.ndarray
    acf_bound: float
    n_lags_outside: int
    overdispersion_flag: bool
    autocorrelation_flag: bool


def diagnostics(fit: FitResult, max_lag: int = 30,
                dispersion_limit: float = 1.2,
                outside_fraction: float = 0.10) -> DiagnosticsReport:
    """Overdispersion and residual-autocorrelation checks for a fit."""
    if not fit.converged:
        raise DomainError("diagnostics require a converged fit")
    resid = deviance_residuals(fit.design.y.astype(float), fit.mu)
    n = len(resid)
    phi = fit.pearson / max(fit.residual_df, 1e-12)
    centered = resid - resid.mean()
    denom = float(centered @ centered)
    lags = min(max_lag, n - 2)
    acf = np.array([float(centered[:-k] @ centered[k:]) / denom
                    for k in range(1, lags + 1)])
    bound = 1.96 / np.sqrt(n)
    outside = int(np.sum(np.abs(acf) > bound))
    return DiagnosticsReport(
        dispersion=float(phi),
        residual_df=float(fit.residual_df),
        acf=acf,
        acf_bound=float(bound),
        n_lags_outside=outside,
        overdispersion_flag=bool(phi > dispersion_limit),
        autocorrelation_flag=bool(outside > outside_fraction * lags),
    )


class ExcessDeathsGAM(BaseEstimator):
    """Penalized Poisson regression of daily deaths with a population offset.

    Parameters
    ----------
    partition : PeriodPartition
        Post-emergency periods receiving indicator terms.
    include_periods : sequence of int, optional
        Subset of partition periods to give indicators (default: all).
    basis_dim : int
        Cyclic seasonal basis dimension.
    trend : str
        ``"linear"`` or ``"cubic"`` year trend.
    trend_dim : int
        Basis dimension when ``trend="cubic"``.
    smoothing : "reml" or sequence of float
        Penalty multipliers, or ``"reml"`` to select them.
    offset_source : str
        ``"adjusted"`` (default) or ``"counterfactual"`` population offset.
    """

    def __init__(self, partition=None, include_periods=None,
                 basis_dim=SEASONAL_DEFAULT_DIM, trend="linear",
                 trend_dim=TREND_SPLINE_DEFAULT_DIM, smoothing="reml",
                 offset_source="adjusted"):
        self.partition = partition
        self.include_periods = include_periods
        self.basis_dim = basis_dim
        self.trend = trend
        self.trend_dim = trend_dim
        self.smoothing = smoothing
        self.offset_source = offset_source

    def _spec(self) -> ModelSpec:
        if self.partition is None:
            raise DomainError("a PeriodPartition is required to fit")
        trend = (SmoothTerm("linear", 1) if self.trend == "linear"
                 else SmoothTerm("cubic", self.trend_dim))
        include = (tuple(self.include_periods)
                   if self.include_periods is not None else None)
        return ModelSpec(partition=self.partition, include_periods=include,
                         seasonal=SmoothTerm("cyclic_cubic", self.basis_dim),
                         trend=trend, offset_source=self.offset_source)

    def fit(self, deaths: DailyCountSeries, population: PopulationSeries,
            population_counterfactual: PopulationSeries | None = None):
        spec = self._spec()
        design = assemble_design(spec, deaths, population,
                                 population_counterfactual)
        if isinstance(self.smoothing, str) and self.smoothing == "reml":
            lam, result = select_smoothing(design)
        else:
            lam = np.asarray(self.smoothing, dtype=float)
            result = pirls_fit(design, lam)
        self.design_ = design
        self.result_ = result
        self.coef_ = result.coef
        self.cov_ = result.cov
        self.smoothing_ = lam
        self.edf_ = result.edf
        self.deviance_ = result.deviance
        self.converged_ = result.converged
        self.population_ = population
        self.population_counterfactual_ = (population_counterfactual
                                           if population_counterfactual
                                           is not None else population)
        return self

    def predict(self, dates=None, population: PopulationSeries | None = None):
        """Expected deaths per day; fitted rows when no arguments given."""
        if dates is None:
            return self.result_.mu.copy()
        if population is None:
            raise DomainError("population values are required to predict "
                              "at new dates")
        rows = self.design_.rows_for(list(dates))
        offset = np.log([population.value_on(d) for d in dates])
        return np.exp(offset + rows @ self.coef_)

    def wald_test(self, period: int) -> tuple[float, float]:
        return wald_test(self.result_, period)

    def multiplicative_effect(self, period: int) -> EffectEstimate:
        return multiplicative_effect(self.result_, period)

    def diagnostics(self) -> DiagnosticsReport:
        return diagnostics(self.result_)
