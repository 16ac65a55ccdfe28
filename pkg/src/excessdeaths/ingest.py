"""CSV ingestion and daily population construction.

Population series are interpolated from sparse anchors: mid-year census
vintage estimates, optionally corrected after an emergency by monthly net
air-passenger movement (departures minus arrivals), which yields derived
month-end anchors. The uncorrected interpolation is the counterfactual
population used by the excess-death estimator.
"""

from __future__ import annotations

import calendar
import csv
import datetime as dt
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DomainError, IngestError
from .timeseries import ONE_DAY, DailyCountSeries, PopulationSeries
from .validation import as_date


class AnchorKind(str, Enum):
    CENSUS_VINTAGE = "census_vintage"
    DERIVED_MONTHEND = "derived_monthend"


@dataclass(frozen=True, order=True)
class PopulationAnchor:
    """A dated point estimate of population size."""

    date: dt.date
    population: float
    kind: AnchorKind = AnchorKind.CENSUS_VINTAGE

    def __post_init__(self):
        object.__setattr__(self, "date", as_date(self.date))
        object.__setattr__(self, "kind", AnchorKind(self.kind))
        if not self.population > 0:
            raise DomainError(f"anchor population must be positive, "
                              f"got {self.population} on {self.date}")


@dataclass(frozen=True)
class NetMovementRecord:
    """Monthly passenger departures and arrivals; net = leaving - arriving."""

    month: dt.date  # first day of the month
    leaving: int
    arriving: int

    def __post_init__(self):
        month = as_date(self.month)
        if month.day != 1:
            month = month.replace(day=1)
        object.__setattr__(self, "month", month)
        if self.leaving < 0 or self.arriving < 0:
            raise DomainError("passenger counts must be nonnegative")

    @property
    def net(self) -> int:
        return self.leaving - self.arriving

    @property
    def month_end(self) -> dt.date:
        last = calendar.monthrange(self.month.year, self.month.month)[1]
        return self.month.replace(day=last)


def _read_rows(path, expected_header):
    try:
        handle = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise IngestError(f"cannot open input file: {exc}", path=path) from exc
    with handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError("file is empty", path=path) from None
        header = [h.strip().lower() for h in header]
        missing = [c for c in expected_header if c not in header]
        if missing:
            raise IngestError(
                f"missing column(s) {missing}; found header {header}",
                path=path, line=1)
        idx = {c: header.index(c) for c in header}
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            rows.append((lineno, [cell.strip() for cell in row], idx))
    return rows


def load_deaths(path, cutoff=None) -> DailyCountSeries:
    """Read a ``date,deaths`` CSV into a gap-free daily count series.

    Rows after ``cutoff`` (inclusive bound) are dropped, which is how
    preliminary or zero-padded trailing records are excluded.
    """
    cutoff = as_date(cutoff) if cutoff is not None else None
    records = []
    prev = None
    for lineno, row, idx in _read_rows(path, ["date", "deaths"]):
        try:
            date = dt.date.fromisoformat(row[idx["date"]])
        except ValueError:
            raise IngestError(f"unparseable date {row[idx['date']]!r}",
                              path=path, line=lineno) from None
        try:
            count = int(row[idx["deaths"]])
        except ValueError:
            raise IngestError(f"unparseable death count {row[idx['deaths']]!r}",
                              path=path, line=lineno) from None
        if count < 0:
            raise IngestError(f"negative death count {count} on {date}",
                              path=path, line=lineno)
        if prev is not None:
            if date <= prev:
                raise IngestError(f"dates not strictly increasing at {date}",
                                  path=path, line=lineno)
            if date != prev + ONE_DAY:
                raise IngestError(
                    f"gap in dates: missing {prev + ONE_DAY} before {date}",
                    path=path, line=lineno)
        prev = date
        if cutoff is not None and date > cutoff:
            break
        records.append((date, count))
    if not records:
        raise IngestError("no usable death-count rows", path=path)
    return DailyCountSeries.from_records(records)


def load_population_anchors(path) -> list[PopulationAnchor]:
    """Read a ``date,population,kind`` CSV into ordered anchors."""
    anchors = []
    for lineno, row, idx in _read_rows(path, ["date", "population", "kind"]):
        try:
            date = dt.date.fromisoformat(row[idx["date"]])
            population = float(row[idx["population"]])
            kind = AnchorKind(row[idx["kind"]])
        except ValueError as exc:
            raise IngestError(f"bad anchor row: {exc}", path=path,
                              line=lineno) from None
        try:
            anchors.append(PopulationAnchor(date, population, kind))
        except DomainError as exc:
            raise IngestError(str(exc), path=path, line=lineno) from None
    if any(b.date <= a.date for a, b in zip(anchors, anchors[1:])):
        raise IngestError("anchor dates must be strictly increasing", path=path)
    return anchors


def load_net_movement(path) -> list[NetMovementRecord]:
    """Read a ``month,leaving,arriving[,net]`` CSV of monthly net movement."""
    records = []
    for lineno, row, idx in _read_rows(path, ["month", "leaving", "arriving"]):
        raw_month = row[idx["month"]]
        try:
            year, month = raw_month.split("-")[:2]
            first = dt.date(int(year), int(month), 1)
            leaving = int(row[idx["leaving"]])
            arriving = int(row[idx["arriving"]])
        except ValueError:
            raise IngestError(f"bad net-movement row {row!r}", path=path,
                              line=lineno) from None
        record = NetMovementRecord(first, leaving, arriving)
        if "net" in idx and len(row) > idx["net"] and row[idx["net"]]:
            declared = int(row[idx["net"]])
            if declared != record.net:
                raise IngestError(
                    f"net column {declared} disagrees with "
                    f"leaving-arriving={record.net}", path=path, line=lineno)
        records.append(record)
    return records


def _next_month(month: dt.date) -> dt.date:
    if month.month == 12:
        return dt.date(month.year + 1, 1, 1)
    return month.replace(month=month.month + 1)


def apply_net_movement(vintage, movements, extend_through=None):
    """Chain monthly net movement off a vintage seed into month-end anchors.

    Each month-end anchor is the previous anchor minus that month's net
    movement, seeded from the latest vintage anchor preceding the first
    movement month. Months past the last record (up to ``extend_through``,
    a date inside the final month wanted) carry the last value forward.
    Vintage anchors at or after the first derived anchor are superseded.
    """
    vintage = sorted(vintage, key=lambda a: a.date)
    if not movements:
        return list(vintage)
    months = [m.month for m in movements]
    for prev, cur in zip(months, months[1:]):
        if cur != _next_month(prev):
            raise DomainError(
                f"net-movement months must be consecutive: {prev} then {cur}")
    first_end = movements[0].month_end
    seeds = [a for a in vintage if a.date <= first_end]
    if not seeds:
        raise DomainError("no vintage anchor precedes the first movement month")
    population = seeds[-1].population

    derived = []
    for record in movements:
        population -= record.net
        if population <= 0:
            raise DomainError(
                f"net movement drives population to {population} "
                f"in {record.month:%Y-%m}")
        derived.append(PopulationAnchor(record.month_end, population,
                                        AnchorKind.DERIVED_MONTHEND))

    if extend_through is not None:
        month = _next_month(movements[-1].month)
        limit = as_date(extend_through)
        while month <= limit:
            carried = NetMovementRecord(month, 0, 0)
            derived.append(PopulationAnchor(carried.month_end, population,
                                            AnchorKind.DERIVED_MONTHEND))
            month = _next_month(month)

    kept = [a for a in vintage if a.date < derived[0].date]
    return kept + derived


def interpolate_population(anchors, start, end,
                           extrapolate=False) -> PopulationSeries:
    """Piecewise-linear daily population over [start, end] from anchors.

    Anchor dates reproduce their values exactly. Dates outside the anchor
    hull require ``extrapolate=True`` and continue the nearest segment.
    """
    anchors = sorted(anchors, key=lambda a: a.date)
    if len(anchors) < 2:
        raise DomainError("at least two population anchors are required")
    start, end = as_date(start), as_date(end)
    if end < start:
        raise DomainError(f"range end {end} precedes start {start}")
    if not extrapolate and (start < anchors[0].date or end > anchors[-1].date):
        raise DomainError(
            f"range [{start}, {end}] outside anchor hull "
            f"[{anchors[0].date}, {anchors[-1].date}]; "
            "pass extrapolate=True to extend the boundary segments")

    xs = np.array([a.date.toordinal() for a in anchors], dtype=float)
    ys = np.array([a.population for a in anchors])
    days = np.arange(start.toordinal(), end.toordinal() + 1, dtype=float)
    values = np.interp(days, xs, ys)
    # np.interp clamps beyond the hull; continue boundary segments linearly
    left = days < xs[0]
    if left.any():
        slope = (ys[1] - ys[0]) / (xs[1] - xs[0])
        values[left] = ys[0] + slope * (days[left] - xs[0])
    right = days > xs[-1]
    if right.any():
        slope = (ys[-1] - ys[-2]) / (xs[-1] - xs[-2])
        values[right] = ys[-1] + slope * (days[right] - xs[-1])
    if np.any(values <= 0):
        raise DomainError("interpolated population is not strictly positive")
    return PopulationSeries(start, values)


def counterfactual_population(vintage, start, end,
                              extrapolate=False) -> PopulationSeries:
    """Population trajectory with no emergency-driven migration applied.

    Interpolates census-vintage anchors only, ignoring derived month-end
    corrections, to produce the no-displacement population.
    """
    vintage_only = [a for a in vintage if a.kind is AnchorKind.CENSUS_VINTAGE]
    if len(vintage_only) < 2:
        raise DomainError("need at least two census-vintage anchors")
    return interpolate_population(vintage_only, start, end,
                                  extrapolate=extrapolate)


def monthend_declines(anchors, reference: float):
    """Percent shortfall of derived month-end anchors below a reference.

    Returns (month-end date, population, percent below reference) tuples,
    in date order.
    """
    if reference <= 0:
        raise DomainError("reference population must be positive")
    rows = []
    for anchor in sorted(anchors, key=lambda a: a.date):
        if anchor.kind is not AnchorKind.DERIVED_MONTHEND:
            continue
        pct = (reference - anchor.population) / reference * 100.0
        rows.append((anchor.date, anchor.population, pct))
    return rows
