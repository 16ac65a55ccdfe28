import datetime as dt

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from excessdeaths.errors import AlignmentError, DomainError
from excessdeaths.timeseries import (DailyCountSeries, PeriodPartition,
                                     PopulationSeries, align,
                                     day_of_year_fraction, mortality_rate)


class TestDailyCountSeries:
    def test_from_records(self):
        s = DailyCountSeries.from_records([("2017-09-20", 100),
                                           ("2017-09-21", 90)])
        assert len(s) == 2
        assert s.end_date == dt.date(2017, 9, 21)
        assert list(s.counts) == [100, 90]

    def test_gap_rejected(self):
        with pytest.raises(DomainError, match="2017-09-21"):
            DailyCountSeries.from_records([("2017-09-20", 1),
                                           ("2017-09-22", 2)])

    def test_negative_rejected(self):
        with pytest.raises(DomainError):
            DailyCountSeries("2017-01-01", [3, -1])

    def test_non_integer_rejected(self):
        with pytest.raises(DomainError):
            DailyCountSeries("2017-01-01", [3.5])

    def test_empty_rejected(self):
        with pytest.raises(DomainError):
            DailyCountSeries("2017-01-01", [])

    def test_counts_frozen(self):
        s = DailyCountSeries("2017-01-01", [1, 2])
        with pytest.raises(ValueError):
            s.counts[0] = 5

    def test_window_total(self):
        s = DailyCountSeries("2017-01-01", [1, 2, 3, 4])
        assert s.window_total("2017-01-02", "2017-01-03") == 5


class TestPopulationSeries:
    def test_positive_required(self):
        with pytest.raises(DomainError):
            PopulationSeries("2017-01-01", [100.0, 0.0])

    def test_value_on(self):
        s = PopulationSeries("2017-01-01", [10.0, 20.0])
        assert s.value_on("2017-01-02") == 20.0


class TestMortalityRate:
    def test_zero_deaths(self):
        deaths = DailyCountSeries("2017-01-01", [0])
        pop = PopulationSeries("2017-01-01", [3_000_000.0])
        assert mortality_rate(deaths, pop).rates[0] == 0.0

    def test_reference_value(self):
        # 82 deaths in a population of 3,337,177 -> 8.968... per 1000/yr
        deaths = DailyCountSeries("2017-01-01", [82])
        pop = PopulationSeries("2017-01-01", [3_337_177.0])
        rate = mortality_rate(deaths, pop).rates[0]
        assert rate == pytest.approx(82 / 3_337_177 * 365_000, rel=1e-12)
        assert rate == pytest.approx(8.9686, abs=5e-4)

    def test_misaligned(self):
        deaths = DailyCountSeries("2017-01-01", [1, 2])
        pop = PopulationSeries("2017-01-02", [10.0, 10.0])
        with pytest.raises(AlignmentError):
            mortality_rate(deaths, pop)

    @given(deaths=st.lists(st.integers(0, 500), min_size=1, max_size=40),
           scale=st.floats(0.1, 100.0))
    @settings(max_examples=40, deadline=None)
    def test_scale_invariance(self, deaths, scale):
        d1 = DailyCountSeries("2017-01-01", deaths)
        base = 1e6 + np.arange(len(deaths), dtype=float)
        p1 = PopulationSeries("2017-01-01", base)
        r1 = mortality_rate(d1, p1).rates
        d2 = DailyCountSeries("2017-01-01", [int(c * 2) for c in deaths])
        p2 = PopulationSeries("2017-01-01", 2 * base)
        r2 = mortality_rate(d2, p2).rates
        np.testing.assert_allclose(r1, r2, rtol=1e-12)
        p3 = PopulationSeries("2017-01-01", scale * base)
        r3 = mortality_rate(DailyCountSeries("2017-01-01", deaths), p3).rates
        np.testing.assert_allclose(r3, r1 / scale, rtol=1e-12)


class TestDayOfYearFraction:
    def test_jan_first(self):
        assert day_of_year_fraction("2017-01-01") == 0.0

    def test_midyear(self):
        # Jul 2, 2017 is day 183 of a common year
        assert day_of_year_fraction("2017-07-02") == pytest.approx(182 / 365)

    def test_leap_year_end(self):
        assert day_of_year_fraction("2016-12-31") == pytest.approx(365 / 366)
        assert day_of_year_fraction("2016-12-31") < 1.0

    def test_injective_within_a_year(self):
        days = [dt.date(2017, 1, 1) + dt.timedelta(days=i) for i in range(365)]
        fractions = [day_of_year_fraction(d) for d in days]
        assert all(a < b for a, b in zip(fractions, fractions[1:]))

    @given(st.dates(dt.date(1990, 1, 1), dt.date(2050, 12, 31)))
    @settings(max_examples=60, deadline=None)
    def test_range_and_periodicity(self, date):
        f = day_of_year_fraction(date)
        assert 0.0 <= f < 1.0
        # same calendar day in another common/leap-matching year agrees
        other_year = date.year + (4 if date.month == 2 and date.day == 29
                                  else 1 if (date.month, date.day) != (2, 29)
                                  else 4)
        try:
            other = date.replace(year=other_year)
        except ValueError:
            return
        import calendar
        if calendar.isleap(date.year) == calendar.isleap(other.year):
            assert day_of_year_fraction(other) == pytest.approx(f, abs=1e-12)


class TestPeriodPartition:
    def _partition(self):
        return PeriodPartition("2017-09-20",
                               ["2017-09-30", "2017-10-31", "2017-11-30"])

    def test_period_index(self):
        p = self._partition()
        assert p.period_index("2017-09-19") == 0
        assert p.period_index("2017-09-20") == 1
        assert p.period_index("2017-09-30") == 1
        assert p.period_index("2017-10-01") == 2
        assert p.period_index("2017-11-30") == 3
        assert p.period_index("2017-12-01") == 0

    def test_period_range(self):
        p = self._partition()
        assert p.period_range(2) == (dt.date(2017, 10, 1), dt.date(2017, 10, 31))

    def test_boundaries_must_increase(self):
        with pytest.raises(DomainError):
            PeriodPartition("2017-09-20", ["2017-10-31", "2017-09-30"])

    def test_first_boundary_after_emergency(self):
        with pytest.raises(DomainError):
            PeriodPartition("2017-09-20", ["2017-09-19"])

    def test_indicator_matrix_partitions_days(self):
        p = self._partition()
        dates = [dt.date(2017, 9, 15) + dt.timedelta(days=i) for i in range(90)]
        cols, included = p.indicator_matrix(dates)
        assert included == [1, 2, 3]
        sums = cols.sum(axis=1)
        for date, s in zip(dates, sums):
            inside = dt.date(2017, 9, 20) <= date <= dt.date(2017, 11, 30)
            assert s == (1.0 if inside else 0.0)


class TestAlign:
    def test_align_is_equivalence(self):
        a = DailyCountSeries("2017-01-01", [1, 2, 3])
        b = PopulationSeries("2017-01-01", [1.0, 2.0, 3.0])
        align(a, b)
        align(b, a)
        c = PopulationSeries("2017-01-01", [1.0, 2.0])
        with pytest.raises(AlignmentError):
            align(a, c)
