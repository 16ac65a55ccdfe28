"""Dated daily series containers, period partitions, and calendar helpers.

All containers are immutable after construction (arrays are frozen), so they
can be shared freely across threads.
"""

from __future__ import annotations

import calendar
import datetime as dt
from bisect import bisect_left
from dataclasses import dataclass

import numpy as np

from .errors import AlignmentError, DomainError
from .validation import as_date, check_counts, check_positive

ONE_DAY = dt.timedelta(days=1)
DAYS_PER_YEAR = 365.25

#: deaths/person/day -> annualized deaths per 1000 persons
RATE_SCALE = 1000.0 * 365.0


def daterange(start: dt.date, n_days: int) -> list[dt.date]:
    """Return ``n_days`` consecutive dates starting at ``start``."""
    return [start + dt.timedelta(days=i) for i in range(n_days)]


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class DailyCountSeries:
    """Gap-free daily death counts starting at ``start_date``."""

    start_date: dt.date
    counts: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "start_date", as_date(self.start_date))
        counts = check_counts(self.counts, "counts")
        object.__setattr__(self, "counts", _freeze(counts))

    @classmethod
    def from_records(cls, records) -> "DailyCountSeries":
        """Build from (date, count) pairs, rejecting gaps and disorder."""
        records = [(as_date(d), v) for d, v in records]
        if not records:
            raise DomainError("empty death-count records")
        start = records[0][0]
        for i, (d, _) in enumerate(records):
            expected = start + dt.timedelta(days=i)
            if d != expected:
                raise DomainError(
                    f"date gap or disorder: expected {expected}, found {d}"
                )
        return cls(start, np.array([v for _, v in records]))

    def __len__(self) -> int:
        return len(self.counts)

    @property
    def end_date(self) -> dt.date:
        return self.start_date + dt.timedelta(days=len(self) - 1)

    @property
    def dates(self) -> list[dt.date]:
        return daterange(self.start_date, len(self))

    def index_of(self, date) -> int:
        date = as_date(date)
        i = (date - self.start_date).days
        if not 0 <= i < len(self):
            raise DomainError(f"{date} outside series range "
                              f"[{self.start_date}, {self.end_date}]")
        return i

    def window_total(self, start, end) -> int:
        """Sum of counts over the inclusive date window [start, end]."""
        i, j = self.index_of(start), self.index_of(end)
        if j < i:
            raise DomainError(f"window end {end} precedes start {start}")
        return int(self.counts[i : j + 1].sum())

    def slice(self, start, end) -> "DailyCountSeries":
        i, j = self.index_of(start), self.index_of(end)
        if j < i:
            raise DomainError(f"window end {end} precedes start {start}")
        return DailyCountSeries(as_date(start), self.counts[i : j + 1])


@dataclass(frozen=True, eq=False)
class PopulationSeries:
    """Daily population sizes (persons), strictly positive, gap-free."""

    start_date: dt.date
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "start_date", as_date(self.start_date))
        values = np.asarray(self.values, dtype=float)
        if values.size == 0:
            raise DomainError("population series must contain at least one value")
        check_positive(values, "population values")
        object.__setattr__(self, "values", _freeze(values))

    def __len__(self) -> int:
        return len(self.values)

    @property
    def end_date(self) -> dt.date:
        return self.start_date + dt.timedelta(days=len(self) - 1)

    @property
    def dates(self) -> list[dt.date]:
        return daterange(self.start_date, len(self))

    def value_on(self, date) -> float:
        date = as_date(date)
        i = (date - self.start_date).days
        if not 0 <= i < len(self):
            raise DomainError(f"{date} outside series range")
        return float(self.values[i])


@dataclass(frozen=True, eq=False)
class MortalityRateSeries:
    """Annualized deaths per 1000 persons, one value per day."""

    start_date: dt.date
    rates: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "start_date", as_date(self.start_date))
        rates = np.asarray(self.rates, dtype=float)
        if not np.all(np.isfinite(rates)) or np.any(rates < 0):
            raise DomainError("mortality rates must be finite and nonnegative")
        object.__setattr__(self, "rates", _freeze(rates))

    def __len__(self) -> int:
        return len(self.rates)

    @property
    def dates(self) -> list[dt.date]:
        return daterange(self.start_date, len(self))


@dataclass(frozen=True)
class PeriodPartition:
    """Disjoint post-emergency periods delimited by inclusive end dates.

    Period ``l`` (1-based) runs from the day after boundary ``l-1`` through
    boundary ``l``; period 1 starts at ``emergency_date``. Index 0 denotes
    everything before the emergency (and any day past the last boundary).
    """

    emergency_date: dt.date
    boundaries: tuple[dt.date, ...]

    def __post_init__(self):
        object.__setattr__(self, "emergency_date", as_date(self.emergency_date))
        bounds = tuple(as_date(b) for b in self.boundaries)
        if not bounds:
            raise DomainError("at least one period boundary is required")
        if bounds[0] <= self.emergency_date:
            raise DomainError("first boundary must fall after the "
                              "emergency date")
        if any(b2 <= b1 for b1, b2 in zip(bounds, bounds[1:])):
            raise DomainError("period boundaries must be strictly increasing")
        object.__setattr__(self, "boundaries", bounds)

    @property
    def n_periods(self) -> int:
        return len(self.boundaries)

    def period_index(self, date) -> int:
        date = as_date(date)
        if date < self.emergency_date or date > self.boundaries[-1]:
            return 0
        return bisect_left(self.boundaries, date) + 1

    def period_range(self, l: int) -> tuple[dt.date, dt.date]:
        if not 1 <= l <= self.n_periods:
            raise DomainError(f"period index {l} outside 1..{self.n_periods}")
        start = self.emergency_date if l == 1 else self.boundaries[l - 2] + ONE_DAY
        return start, self.boundaries[l - 1]

    def period_label(self, l: int) -> str:
        start, end = self.period_range(l)
        return f"{start.isoformat()}..{end.isoformat()}"

    def row_periods(self, dates) -> np.ndarray:
        return np.array([self.period_index(d) for d in dates], dtype=np.int64)

    def indicator_matrix(self, dates, include=None) -> tuple[np.ndarray, list[int]]:
        """0/1 design columns, one per included period, in period order."""
        include = sorted(include) if include is not None else list(
            range(1, self.n_periods + 1))
        for l in include:
            if not 1 <= l <= self.n_periods:
                raise DomainError(f"period index {l} outside 1..{self.n_periods}")
        rows = self.row_periods(dates)
        cols = np.zeros((len(rows), len(include)))
        for j, l in enumerate(include):
            cols[rows == l, j] = 1.0
        return cols, include


def align(a, b) -> None:
    """Raise :class:`AlignmentError` unless the two series share dates."""
    if a.start_date != b.start_date or len(a) != len(b):
        raise AlignmentError(
            f"series are misaligned: {a.start_date}+{len(a)}d "
            f"vs {b.start_date}+{len(b)}d"
        )


def mortality_rate(deaths: DailyCountSeries,
                   pop: PopulationSeries) -> MortalityRateSeries:
    """Annualized deaths per 1000 persons for each day of an aligned pair."""
    align(deaths, pop)
    rates = deaths.counts / pop.values * RATE_SCALE
    return MortalityRateSeries(deaths.start_date, rates)


def day_of_year_fraction(date) -> float:
    """Position of a date within its year as a value in [0, 1).

    Jan 1 maps to 0; Dec 31 maps to (D-1)/D where D is the year length, so
    leap and common years share one period.
    """
    date = as_date(date)
    days_in_year = 366 if calendar.isleap(date.year) else 365
    return (date.timetuple().tm_yday - 1) / days_in_year


def day_of_year_fractions(dates) -> np.ndarray:
    return np.array([day_of_year_fraction(d) for d in dates])


def year_offsets(dates, origin: dt.date) -> np.ndarray:
    """Signed distance from ``origin`` in units of average years."""
    origin_ord = origin.toordinal()
    return np.array([(d.toordinal() - origin_ord) / DAYS_PER_YEAR for d in dates])
