import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from excessdeaths.errors import DomainError
from excessdeaths.profile import (ProfileLikelihoodModel, SummaryCounts,
                                  anova_precheck, bonferroni_cumulative,
                                  cumulative_excess_mle, fit_profile_model,
                                  log_likelihood, neg2_log_lrt, profile_curve,
                                  profile_interval, restricted_background_mle)
from excessdeaths.timeseries import DailyCountSeries

C = SummaryCounts(50, 10, 40, 5)


def score(counts, background, excess_rate):
    """Profiled score equation x/b - m + y/(b+rho) - n."""
    x, m = counts.pre_deaths, counts.pre_days
    y, n = counts.post_deaths, counts.post_days
    return x / background - m + y / (background + excess_rate) - n


def bisect_score_root(counts, excess_rate, lo=1e-12, hi=1e9, iters=200):
    """Independent numeric root of the score equation by pure bisection."""
    lo = max(lo, -excess_rate + 1e-12) if excess_rate < 0 else lo
    f_lo = score(counts, lo, excess_rate)
    f_hi = score(counts, hi, excess_rate)
    assert f_lo > 0 > f_hi, "oracle bracket failed"
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if score(counts, mid, excess_rate) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


class TestRestrictedBackground:
    def test_pooled_at_zero(self):
        assert restricted_background_mle(C, 0.0) == pytest.approx(6.0,
                                                                  abs=1e-12)

    def test_worked_quadratic(self):
        # (90 - 45 + sqrt(45^2 + 4*15*50*3)) / 30 = (45 + 105) / 30 = 5
        assert restricted_background_mle(C, 3.0) == pytest.approx(5.0,
                                                                  abs=1e-12)

    def test_matches_numeric_root(self):
        for rho in (-3.0, -1.0, 0.5, 2.0, 7.9):
            closed = restricted_background_mle(C, rho)
            numeric = bisect_score_root(C, rho)
            assert closed == pytest.approx(numeric, rel=1e-9)

    def test_zero_pre_deaths_branch(self):
        c = SummaryCounts(0, 10, 40, 5)
        # above y/n the background collapses to zero
        assert restricted_background_mle(c, 8.0) == 0.0
        assert restricted_background_mle(c, 9.5) == 0.0
        # below y/n it is (y - (m+n) rho) / (m+n), verified on a grid
        rho = 1.0
        closed = restricted_background_mle(c, rho)
        assert closed == pytest.approx((40 - 15 * rho) / 15, abs=1e-12)
        grid = np.linspace(1e-9, 10, 20001)
        ll = [log_likelihood(c, b, rho) for b in grid]
        assert closed == pytest.approx(grid[int(np.argmax(ll))], abs=1e-3)

    def test_inactive_at_unrestricted_mle(self):
        for counts in (C, SummaryCounts(3, 7, 11, 4), SummaryCounts(0, 5, 9, 3)):
            rho_hat = counts.excess_rate_mle
            assert restricted_background_mle(counts, rho_hat) == pytest.approx(
                counts.background_mle, abs=1e-12)

    @given(x=st.integers(0, 2000), m=st.integers(1, 400),
           y=st.integers(0, 2000), n=st.integers(1, 400),
           rho=st.floats(-20.0, 50.0))
    @settings(max_examples=80, deadline=None)
    def test_plus_root_solves_score(self, x, m, y, n, rho):
        counts = SummaryCounts(x, m, y, n)
        root = restricted_background_mle(counts, rho)
        # the root satisfies the score equation whenever it is interior
        if root > 1e-9 and root + rho > 1e-9 and x > 0 and y > 0:
            assert abs(score(counts, root, rho)) <= 1e-6 * (m + n)


class TestNeg2LogLrt:
    def test_zero_at_mle(self):
        assert neg2_log_lrt(C, C.excess_rate_mle) == 0.0

    def test_matches_direct_loglik_difference(self):
        for rho in (-2.0, 0.0, 1.5, 6.0):
            restricted = restricted_background_mle(C, rho)
            direct = 2.0 * (log_likelihood(C, 5.0, 3.0)
                            - log_likelihood(C, restricted, rho))
            assert neg2_log_lrt(C, rho) == pytest.approx(direct, abs=1e-12)

    def test_monotone_away_from_mle(self):
        rho_hat = C.excess_rate_mle
        left = profile_curve(C, np.linspace(rho_hat - 4, rho_hat, 40))
        right = profile_curve(C, np.linspace(rho_hat, rho_hat + 4, 40))
        left_vals = [p.neg2loglrt for p in left]
        right_vals = [p.neg2loglrt for p in right]
        assert all(a >= b - 1e-9 for a, b in zip(left_vals, left_vals[1:]))
        assert all(b >= a - 1e-9 for a, b in zip(right_vals, right_vals[1:]))

    @given(x=st.integers(0, 500), m=st.integers(1, 100),
           y=st.integers(0, 500), n=st.integers(1, 100),
           rho=st.floats(-10.0, 30.0))
    @settings(max_examples=80, deadline=None)
    def test_nonnegative(self, x, m, y, n, rho):
        assert neg2_log_lrt(SummaryCounts(x, m, y, n), rho) >= 0.0


class TestProfileInterval:
    def test_no_effect_straddles_zero(self):
        counts = SummaryCounts(50, 10, 25, 5)  # y/n == x/m
        lo, hi = profile_interval(counts, 0.05)
        assert lo < 0.0 < hi
        assert counts.excess_rate_mle == 0.0

    def test_matches_grid_scan(self):
        cutoff = stats.chi2.ppf(0.95, 1)
        lo, hi = profile_interval(C, 0.05)
        grid = np.linspace(C.excess_rate_mle - 8, C.excess_rate_mle + 10,
                           400_001)  # spacing 4.5e-5 < the 1e-4 tolerance
        vals = np.array([neg2_log_lrt(C, r) for r in grid])
        below = grid[vals <= cutoff]
        assert lo == pytest.approx(below.min(), abs=1e-4)
        assert hi == pytest.approx(below.max(), abs=1e-4)

    def test_contains_mle_and_alpha_checked(self):
        lo, hi = profile_interval(C, 0.05)
        assert lo < C.excess_rate_mle < hi
        with pytest.raises(DomainError):
            profile_interval(C, 1.5)

    def test_doubling_counts_narrows_interval(self):
        lo1, hi1 = profile_interval(C, 0.05)
        doubled = SummaryCounts(100, 20, 80, 10)
        lo2, hi2 = profile_interval(doubled, 0.05)
        assert hi2 - lo2 < hi1 - lo1

    def test_statistic_hits_cutoff_at_endpoints(self):
        cutoff = stats.chi2.ppf(0.95, 1)
        lo, hi = profile_interval(C, 0.05)
        assert neg2_log_lrt(C, lo) == pytest.approx(cutoff, abs=1e-5)
        assert neg2_log_lrt(C, hi) == pytest.approx(cutoff, abs=1e-5)


class TestCumulativeExcess:
    def test_direct_formula(self):
        assert cumulative_excess_mle(C) == pytest.approx(15.0)

    def test_zero_when_rates_match(self):
        assert cumulative_excess_mle(SummaryCounts(50, 10, 25, 5)) == 0.0

    def test_scales_with_post_days(self):
        base = SummaryCounts(500, 100, 70, 10)
        longer = SummaryCounts(500, 100, 140, 20)
        assert cumulative_excess_mle(longer) == pytest.approx(
            2 * cumulative_excess_mle(base))

    def test_result_invariants(self):
        result = fit_profile_model(C, 0.05)
        assert result.ci_excess_rate[0] < result.excess_rate_mle \
            < result.ci_excess_rate[1]
        assert result.cumulative_excess == pytest.approx(
            C.post_days * result.excess_rate_mle)
        assert result.ci_cumulative == pytest.approx(
            tuple(C.post_days * b for b in result.ci_excess_rate))


class TestBonferroni:
    def _horizons(self, rng=None, n=6, lam=5.0, rho=2.0, m=40):
        rng = rng or np.random.default_rng(0)
        x = int(rng.poisson(lam * m))
        post = rng.poisson(lam + rho, size=n)
        return [SummaryCounts(x, m, int(post[:k].sum()), k)
                for k in range(1, n + 1)]

    def test_single_horizon_reduces_to_plain_interval(self):
        joint = bonferroni_cumulative([C], alpha=0.05)
        lo, hi = profile_interval(C, 0.05)
        assert joint[0].lo == pytest.approx(C.post_days * lo)
        assert joint[0].hi == pytest.approx(C.post_days * hi)

    def test_contains_pointwise_interval(self):
        horizons = self._horizons()
        joint = bonferroni_cumulative(horizons, alpha=0.05)
        for counts, h in zip(horizons, joint):
            lo, hi = profile_interval(counts, 0.05)
            k = counts.post_days
            assert h.lo <= k * lo + 1e-9
            assert h.hi >= k * hi - 1e-9

    def test_rejects_non_nested(self):
        a = SummaryCounts(50, 10, 10, 2)
        b = SummaryCounts(51, 10, 20, 3)
        with pytest.raises(DomainError):
            bonferroni_cumulative([a, b])


class TestAnova:
    def test_identical_groups(self):
        g = DailyCountSeries("2017-05-01", [4, 6, 5, 7])
        h = DailyCountSeries("2017-06-01", [4, 6, 5, 7])
        f_stat, p = anova_precheck([g, h])
        assert f_stat == pytest.approx(0.0, abs=1e-12)
        assert p == pytest.approx(1.0)

    def test_hand_computed_two_groups(self):
        a = np.array([1.0, 2.0, 3.0])
        b = np.array([4.0, 6.0, 8.0])
        f_stat, p = anova_precheck([a, b])
        grand = np.concatenate([a, b]).mean()
        ss_between = 3 * (a.mean() - grand) ** 2 + 3 * (b.mean() - grand) ** 2
        ss_within = ((a - a.mean()) ** 2).sum() + ((b - b.mean()) ** 2).sum()
        f_expected = (ss_between / 1) / (ss_within / 4)
        assert f_stat == pytest.approx(f_expected, rel=1e-12)
        assert p == pytest.approx(stats.f.sf(f_expected, 1, 4), rel=1e-12)

    def test_null_p_roughly_uniform(self):
        rng = np.random.default_rng(7)
        pvals = []
        for _ in range(400):
            a = rng.poisson(70, size=30)
            b = rng.poisson(70, size=31)
            pvals.append(anova_precheck([a, b])[1])
        # calibration: rejection rate near alpha under the null
        rate = np.mean(np.array(pvals) < 0.05)
        assert 0.02 <= rate <= 0.09

    def test_degenerate_groups_rejected(self):
        with pytest.raises(DomainError):
            anova_precheck([np.array([1.0, 2.0])])
        with pytest.raises(DomainError):
            anova_precheck([np.array([1.0]), np.array([2.0, 3.0])])


class TestEstimator:
    def test_fit_exposes_attributes(self):
        model = ProfileLikelihoodModel(alpha=0.10)
        pre = np.full(10, 5)
        post = np.full(5, 8)
        model.fit(pre, post)
        assert model.counts_ == SummaryCounts(50, 10, 40, 5)
        assert model.excess_rate_ == pytest.approx(3.0)
        assert model.expected_excess(5) == pytest.approx(15.0)
        lo, hi = model.ci_excess_rate_
        assert lo < 3.0 < hi

    def test_get_params_roundtrip(self):
        model = ProfileLikelihoodModel(alpha=0.01)
        assert model.get_params() == {"alpha": 0.01}
        model.set_params(alpha=0.2)
        assert model.alpha == 0.2


class TestFromSeries:
    def test_window_summary(self):
        counts = np.arange(1, 11)
        series = DailyCountSeries("2017-09-10", counts)
        summary = SummaryCounts.from_series(series, "2017-09-12",
                                            "2017-09-15", "2017-09-17")
        assert summary.pre_days == 3
        assert summary.pre_deaths == 3 + 4 + 5
        assert summary.post_days == 3
        assert summary.post_deaths == 6 + 7 + 8

    def test_bad_window(self):
        series = DailyCountSeries("2017-09-10", np.arange(1, 11))
        with pytest.raises(DomainError):
            SummaryCounts.from_series(series, "2017-09-15", "2017-09-12",
                                      "2017-09-17")
