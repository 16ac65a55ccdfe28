"""Synthetic daily-mortality scenarios for coverage studies and demos.

Daily deaths are Poisson with mean N_t / 365000 * r_t, where r_t is a rate in
deaths per 1000 person-years built from a baseline, a single-harmonic
seasonal term, a linear trend across years, and multiplicative period
effects. The truth record keeps every generating quantity, including the
exact expected excess per day.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .ingest import interpolate_population
from .timeseries import (DailyCountSeries, PopulationSeries, daterange,
                         day_of_year_fractions, year_offsets)
from .validation import as_date

PERSON_YEARS_SCALE = 365000.0  # person-days per 1000 person-years


@dataclass(frozen=True)
class PeriodEffect:
    """Multiplicative mortality effect over an inclusive date window."""

    start: dt.date
    end: dt.date
    effect: float

    def __post_init__(self):
        object.__setattr__(self, "start", as_date(self.start))
        object.__setattr__(self, "end", as_date(self.end))
        if self.end < self.start:
            raise DomainError(f"effect window end {self.end} precedes start")
        if not self.effect > 0:
            raise DomainError("period effects must be positive multipliers")


@dataclass(frozen=True)
class Scenario:
    """Generating configuration for one synthetic mortality data set.

    ``population`` is a constant, a (start_value, end_value) pair
    interpolated linearly across the range, or a list of
    :class:`PopulationAnchor`.
    """

    start: dt.date
    end: dt.date
    baseline: float  # deaths per 1000 person-years
    population: object = 3.3e6
    seasonal_amplitude: float = 0.0
    seasonal_phase: float = 0.0
    trend_per_year: float = 0.0
    effects: tuple = ()
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "start", as_date(self.start))
        object.__setattr__(self, "end", as_date(self.end))
        if self.end < self.start:
            raise DomainError("scenario end precedes start")
        if not self.baseline > 0:
            raise DomainError("baseline rate must be positive")
        object.__setattr__(self, "effects", tuple(self.effects))
        for eff in self.effects:
            if eff.start < self.start or eff.end > self.end:
                raise DomainError(f"effect window {eff.start}..{eff.end} "
                                  "outside the scenario range")

    @property
    def n_days(self) -> int:
        return (self.end - self.start).days + 1


@dataclass(frozen=True, eq=False)
class Truth:
    """Exact generating quantities, one value per day."""

    dates: list
    rate: np.ndarray          # deaths per 1000 person-years, effects included
    expected: np.ndarray      # expected deaths per day
    effect: np.ndarray        # multiplicative effect per day (1 outside)
    excess: np.ndarray        # expected - expected/effect

    @property
    def cumulative_excess(self) -> float:
        return float(self.excess.sum())


@dataclass(frozen=True, eq=False)
class SimulationResult:
    deaths: DailyCountSeries
    population: PopulationSeries
    truth: Truth
    scenario: Scenario


def _population_values(scenario: Scenario) -> np.ndarray:
    pop = scenario.population
    n = scenario.n_days
    if isinstance(pop, (int, float)):
        if pop <= 0:
            raise DomainError("population must be positive")
        return np.full(n, float(pop))
    if isinstance(pop, tuple) and len(pop) == 2:
        return np.linspace(float(pop[0]), float(pop[1]), n)
    anchors = list(pop)
    series = interpolate_population(anchors, scenario.start, scenario.end,
                                    extrapolate=True)
    return np.asarray(series.values)


def simulate(scenario: Scenario) -> SimulationResult:
    """Generate one Poisson realization of a scenario, with its truth record."""
    dates = daterange(scenario.start, scenario.n_days)
    pop_values = _population_values(scenario)

    doy = day_of_year_fractions(dates)
    mid = dates[0] + (dates[-1] - dates[0]) / 2
    years = year_offsets(dates, mid)

    effect = np.ones(scenario.n_days)
    for eff in scenario.effects:
        i = (eff.start - scenario.start).days
        j = (eff.end - scenario.start).days
        effect[i:j + 1] *= eff.effect

    log_rate = (np.log(scenario.baseline)
                + scenario.seasonal_amplitude
                * np.sin(2.0 * np.pi * doy + scenario.seasonal_phase)
                + scenario.trend_per_year * years
                + np.log(effect))
    rate = np.exp(log_rate)
    expected = pop_values / PERSON_YEARS_SCALE * rate

    rng = np.random.default_rng(scenario.seed)
    counts = rng.poisson(expected)

    truth = Truth(
        dates=dates,
        rate=rate,
        expected=expected,
        effect=effect,
        excess=expected * (1.0 - 1.0 / effect),
    )
    return SimulationResult(
        deaths=DailyCountSeries(scenario.start, counts),
        population=PopulationSeries(scenario.start, pop_values),
        truth=truth,
        scenario=scenario,
    )
