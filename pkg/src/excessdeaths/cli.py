"""Command-line front end: ingestion, model fitting, reports, and figures.

Subcommands: ``model1`` (before/after profile-likelihood comparison),
``model2`` (penalized log-linear model with posterior bands), ``glrt``
(nested-model deviance test), ``population`` (population pipeline report),
and ``simulate`` (synthetic data in the ingest CSV schemas).

Exit codes: 0 success, 1 input/configuration error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import datetime as dt
import sys
from pathlib import Path

import numpy as np
from scipy import stats

from . import figures, reporting
from .config import read_config, scenario_from_mapping
from .errors import ConfigError, ExcessDeathsError, FitError
from .gam import ExcessDeathsGAM, glrt, fit_nested_pair, ModelSpec, SmoothTerm
from .inference import (band_simultaneous, functional_values,
                        interval_pointwise, posterior_draws)
from .ingest import (apply_net_movement, counterfactual_population,
                     interpolate_population, load_deaths, load_net_movement,
                     load_population_anchors, monthend_declines)
from .profile import (SummaryCounts, anova_precheck, bonferroni_cumulative,
                      fit_profile_model, profile_curve)
from .timeseries import PeriodPartition, mortality_rate
from .validation import as_date

def _add_common(parser):
    parser.add_argument("--config", help="key = value config file; explicit "
                        "flags override config values")
    parser.add_argument("--outdir", help="output directory (default: .)")
    parser.add_argument("--alpha", type=float,
                        help="miscoverage level (default 0.05)")


def _add_deaths_options(parser):
    parser.add_argument("--deaths", help="CSV with header date,deaths")
    parser.add_argument("--cutoff", help="drop death rows after this date")
    parser.add_argument("--emergency-date", help="first post-emergency day")


def _add_population_options(parser):
    parser.add_argument("--population-anchors",
                        help="CSV with header date,population,kind")
    parser.add_argument("--net-movement",
                        help="CSV with header month,leaving,arriving[,net]")
    parser.add_argument("--no-adjustment", action="store_true", default=None,
                        help="ignore net movement; offset uses the "
                        "unadjusted population")
    parser.add_argument("--extrapolate", action="store_true", default=None,
                        help="extend population interpolation linearly "
                        "beyond the anchor hull")


def _add_model2_options(parser):
    parser.add_argument("--boundaries", help="comma-separated period end "
                        "dates (inclusive)")
    parser.add_argument("--include-periods", help="comma-separated period "
                        "indices to model (default: all)")
    parser.add_argument("--basis-dim", type=int,
                        help="seasonal basis dimension (default 32)")
    parser.add_argument("--trend", choices=["linear", "cubic"],
                        help="year-trend term (default linear)")
    parser.add_argument("--draws", type=int,
                        help="posterior draws (default 10000)")
    parser.add_argument("--seed", type=int,
                        help="random seed for posterior draws (required)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="excessdeaths",
        description="Estimate excess deaths after an emergency from daily "
                    "death counts and population data.")
    sub = parser.add_subparsers(dest="command", required=True)

    p1 = sub.add_parser("model1", help="before/after profile-likelihood "
                        "estimate with likelihood-ratio intervals")
    _add_common(p1)
    _add_deaths_options(p1)
    p1.add_argument("--pre-start", help="first background day "
                    "(default: series start)")
    p1.add_argument("--post-end", help="last post-emergency day "
                    "(default: series end)")

    p2 = sub.add_parser("model2", help="penalized log-linear model with "
                        "posterior confidence bands")
    _add_common(p2)
    _add_deaths_options(p2)
    _add_population_options(p2)
    _add_model2_options(p2)

    pg = sub.add_parser("glrt", help="generalized likelihood-ratio test of "
                        "nested period sets")
    _add_common(pg)
    _add_deaths_options(pg)
    _add_population_options(pg)
    _add_model2_options(pg)
    pg.add_argument("--null-periods", help="comma-separated period indices "
                    "of the null model (required)")
    pg.add_argument("--reselect", action="store_true", default=None,
                    help="re-run smoothing selection for the null model "
                    "instead of pinning the alternative's parameters")

    pp = sub.add_parser("population", help="population pipeline report: "
                        "adjusted vs counterfactual and month-end declines")
    _add_common(pp)
    pp.add_argument("--population-anchors")
    pp.add_argument("--net-movement")
    pp.add_argument("--extrapolate", action="store_true", default=None)
    pp.add_argument("--start", help="first day of the reported range")
    pp.add_argument("--end", help="last day of the reported range")

    ps = sub.add_parser("simulate", help="generate synthetic inputs in the "
                        "ingest CSV schemas")
    ps.add_argument("scenario", help="scenario config file")
    ps.add_argument("--outdir")
    return parser


class _Options:
    """Flag/config merger: explicit flags win, then config, then defaults."""

    def __init__(self, args):
        self.args = vars(args)
        self.raw_config = None
        self.config = {}
        if self.args.get("config"):
            self.config, self.raw_config = read_config(self.args["config"])
        self.resolved = {}

    def get(self, key, default=None, coerce=None, required=False):
        value = self.args.get(key, None)
        if value is None and key in self.config:
            value = self.config[key]
            if isinstance(value, list):
                raise ConfigError(f"config key {key!r} given more than once")
        if value is None:
            value = default
        if value is None and required:
            raise ConfigError(f"missing required option --{key.replace('_', '-')}")
        if value is not None and coerce is not None:
            value = coerce(value)
        self.resolved[key] = value
        return value

    def flag(self, key):
        value = self.args.get(key, None)
        if value is None and key in self.config:
            raw = str(self.config[key]).lower()
            value = raw in ("1", "true", "yes", "on")
        value = bool(value)
        self.resolved[key] = value
        return value

    def manifest_options(self):
        # outdir is where the manifest itself lives; keeping it out makes
        # reruns into different directories byte-identical
        return {k: v for k, v in self.resolved.items() if k != "outdir"}


def _dates_list(raw):
    if isinstance(raw, str):
        parts = [p for p in raw.split(",") if p.strip()]
    else:
        parts = list(raw)
    return [as_date(p) for p in parts]


def _int_list(raw):
    if isinstance(raw, str):
        return [int(p) for p in raw.split(",") if p.strip()]
    return [int(p) for p in raw]


def _render_p(p: float) -> str:
    return "<0.0001" if p < 1e-4 else f"{p:.4f}"


def _monthly_groups(deaths, pre_start, emergency_date):
    """Background daily counts grouped by complete calendar months.

    Months truncated by the window (typically the emergency month) are
    dropped so the homogeneity check compares like with like.
    """
    import calendar

    groups = {}
    i0 = deaths.index_of(pre_start)
    i1 = deaths.index_of(emergency_date)
    for offset in range(i0, i1):
        date = deaths.start_date + dt.timedelta(days=offset)
        groups.setdefault((date.year, date.month), []).append(
            int(deaths.counts[offset]))
    complete = []
    for (year, month), counts in groups.items():
        if len(counts) == calendar.monthrange(year, month)[1]:
            complete.append(np.array(counts))
    return complete


def cmd_model1(args) -> int:
    opt = _Options(args)
    outdir = Path(opt.get("outdir", "."))
    outdir.mkdir(parents=True, exist_ok=True)
    alpha = opt.get("alpha", 0.05, float)
    deaths_path = opt.get("deaths", required=True)
    cutoff = opt.get("cutoff", coerce=as_date)
    deaths = load_deaths(deaths_path, cutoff=cutoff)
    emergency = opt.get("emergency_date", required=True, coerce=as_date)
    pre_start = opt.get("pre_start", deaths.start_date, as_date)
    post_end = opt.get("post_end", deaths.end_date, as_date)

    counts = SummaryCounts.from_series(deaths, pre_start, emergency, post_end)
    result = fit_profile_model(counts, alpha)

    anova = None
    groups = _monthly_groups(deaths, pre_start, emergency)
    if len(groups) >= 2:
        f_stat, p = anova_precheck(groups)
        anova = {"F": f_stat, "p": p, "p_rendered": _render_p(p),
                 "n_groups": len(groups)}

    lo, hi = result.ci_excess_rate
    pad = 0.15 * (hi - lo)
    grid = np.linspace(lo - pad, hi + pad, 201)
    points = profile_curve(counts, grid)

    horizons = [SummaryCounts.from_series(deaths, pre_start, emergency,
                                          emergency + dt.timedelta(days=k))
                for k in range(counts.post_days)]
    joint = bonferroni_cumulative(horizons, alpha)

    reporting.write_json(outdir / "model1_result.json", {
        "alpha": alpha,
        "window": {"pre_start": pre_start, "emergency_date": emergency,
                   "post_end": post_end},
        "counts": {"pre_deaths": counts.pre_deaths,
                   "pre_days": counts.pre_days,
                   "post_deaths": counts.post_deaths,
                   "post_days": counts.post_days},
        "background_rate": result.background_mle,
        "excess_rate": result.excess_rate_mle,
        "cumulative_excess": result.cumulative_excess,
        "ci_excess_rate": list(result.ci_excess_rate),
        "ci_cumulative": list(result.ci_cumulative),
        "anova_precheck": anova,
        "profile_curve": [{"excess_rate": p.excess_rate,
                           "restricted_background": p.restricted_background,
                           "neg2loglrt": p.neg2loglrt} for p in points],
    })
    reporting.write_csv(
        outdir / "model1_cumulative.csv",
        ["horizon_end", "days", "excess_mle", "lo", "hi"],
        [(emergency + dt.timedelta(days=h.horizon_days - 1),
          h.horizon_days, h.estimate, h.lo, h.hi) for h in joint])
    cutoff_stat = float(stats.chi2.ppf(1.0 - alpha, df=1))
    figures.plot_profile_curve(points, cutoff_stat, result.ci_cumulative,
                               counts.post_days,
                               outdir / "model1_profile.svg")
    reporting.write_manifest(outdir, "model1", opt.manifest_options(),
                             [deaths_path], opt.raw_config)
    print(f"cumulative excess {result.cumulative_excess:.1f} "
          f"({result.ci_cumulative[0]:.1f}, {result.ci_cumulative[1]:.1f}) "
          f"over {counts.post_days} days at {1 - alpha:.0%} confidence")
    return 0


def _load_populations(opt, deaths):
    anchors_path = opt.get("population_anchors", required=True)
    anchors = load_population_anchors(anchors_path)
    extrapolate = opt.flag("extrapolate")
    no_adjust = opt.flag("no_adjustment")
    movement_path = opt.get("net_movement")
    inputs = [anchors_path]

    pop_star = counterfactual_population(anchors, deaths.start_date,
                                         deaths.end_date,
                                         extrapolate=extrapolate)
    if no_adjust or movement_path is None:
        return pop_star, pop_star, inputs
    movements = load_net_movement(movement_path)
    inputs.append(movement_path)
    adjusted = apply_net_movement(anchors, movements,
                                  extend_through=deaths.end_date)
    pop = interpolate_population(adjusted, deaths.start_date, deaths.end_date,
                                 extrapolate=extrapolate)
    return pop, pop_star, inputs


def _model2_inputs(opt):
    deaths_path = opt.get("deaths", required=True)
    cutoff = opt.get("cutoff", coerce=as_date)
    deaths = load_deaths(deaths_path, cutoff=cutoff)
    emergency = opt.get("emergency_date", required=True, coerce=as_date)
    boundaries = opt.get("boundaries", required=True, coerce=_dates_list)
    partition = PeriodPartition(emergency, boundaries)
    include = opt.get("include_periods", coerce=_int_list)
    pop, pop_star, inputs = _load_populations(opt, deaths)
    return deaths, partition, include, pop, pop_star, [deaths_path] + inputs


def cmd_model2(args) -> int:
    opt = _Options(args)
    outdir = Path(opt.get("outdir", "."))
    outdir.mkdir(parents=True, exist_ok=True)
    alpha = opt.get("alpha", 0.05, float)
    draws_n = opt.get("draws", 10000, int)
    seed = opt.get("seed", required=True, coerce=int)
    basis_dim = opt.get("basis_dim", 32, int)
    trend = opt.get("trend", "linear")

    deaths, partition, include, pop, pop_star, inputs = _model2_inputs(opt)
    model = ExcessDeathsGAM(partition=partition, include_periods=include,
                            basis_dim=basis_dim, trend=trend)
    try:
        model.fit(deaths, pop, pop_star)
    except FitError as exc:
        reporting.write_json(outdir / "fit_trace.json",
                             {"error": str(exc), "trace": exc.trace})
        raise
    fit = model.result_

    coefficients = {"intercept": {"coef": float(fit.coef[0]),
                                  "se": fit.se(0)}}
    for l in sorted(fit.design.period_cols):
        effect = model.multiplicative_effect(l)
        z, p = model.wald_test(l)
        coefficients[f"period_{l}"] = {
            "window": partition.period_label(l),
            "coef": effect.coef, "se": effect.se,
            "multiplicative_effect": effect.multiplier,
            "z": z, "p": p, "p_rendered": _render_p(p),
        }
    report = model.diagnostics()

    draws = posterior_draws(fit, size=draws_n, seed=seed)
    est_d, val_d = functional_values(fit, draws, pop, pop_star, "excess")
    est_c, val_c = functional_values(fit, draws, pop, pop_star, "cumulative")
    est_r, val_r = functional_values(fit, draws, pop, pop_star, "rate")
    bands = {
        "daily_pw": interval_pointwise(est_d, val_d, alpha),
        "daily_sim": band_simultaneous(est_d, val_d, alpha),
        "cum_pw": interval_pointwise(est_c, val_c, alpha),
        "cum_sim": band_simultaneous(est_c, val_c, alpha),
        "rate_sim": band_simultaneous(est_r, val_r, alpha),
    }

    reporting.write_json(outdir / "model2_fit.json", {
        "alpha": alpha, "draws": draws_n, "seed": seed,
        "basis_dim": basis_dim, "trend": trend,
        "converged": fit.converged, "iterations": fit.iterations,
        "deviance": fit.deviance, "pearson": fit.pearson,
        "smoothing": list(fit.smoothing),
        "edf": fit.edf, "edf_total": fit.edf_total,
        "coefficients": coefficients,
        "diagnostics": {
            "dispersion": report.dispersion,
            "residual_df": report.residual_df,
            "acf": list(report.acf), "acf_bound": report.acf_bound,
            "n_lags_outside": report.n_lags_outside,
            "overdispersion_flag": report.overdispersion_flag,
            "autocorrelation_flag": report.autocorrelation_flag,
        },
    })

    dates = fit.design.dates
    i0 = (partition.emergency_date - dates[0]).days
    reporting.write_csv(
        outdir / "excess_daily.csv",
        ["date", "excess", "lo_pointwise", "hi_pointwise",
         "lo_simultaneous", "hi_simultaneous"],
        [(dates[i], est_d[i], bands["daily_pw"].lo[i], bands["daily_pw"].hi[i],
          bands["daily_sim"].lo[i], bands["daily_sim"].hi[i])
         for i in range(i0, len(dates))])
    reporting.write_csv(
        outdir / "excess_cumulative.csv",
        ["date", "cumulative_excess", "lo_pointwise", "hi_pointwise",
         "lo_simultaneous", "hi_simultaneous"],
        [(dates[i], est_c[i], bands["cum_pw"].lo[i], bands["cum_pw"].hi[i],
          bands["cum_sim"].lo[i], bands["cum_sim"].hi[i])
         for i in range(i0, len(dates))])

    observed = mortality_rate(deaths, pop)
    figures.plot_fit_band(dates, observed.rates, est_r, bands["rate_sim"],
                          outdir / "fit_band.svg")
    figures.plot_cumulative_band(dates[i0:], est_c[i0:],
                                 bands["cum_pw"].slice(i0),
                                 bands["cum_sim"].slice(i0),
                                 outdir / "cumulative_band.svg")
    figures.plot_population(dates, pop.values, pop_star.values,
                            outdir / "population.svg")
    reporting.write_manifest(outdir, "model2", opt.manifest_options(), inputs,
                             opt.raw_config)

    for name, entry in coefficients.items():
        if name == "intercept":
            continue
        print(f"{name} [{entry['window']}]: coef={entry['coef']:.3f} "
              f"(se {entry['se']:.3f}) effect={entry['multiplicative_effect']:.3f} "
              f"p={entry['p_rendered']}")
    end = dates[-1]
    total = est_c[-1]
    lo, hi = bands["cum_pw"].lo[-1], bands["cum_pw"].hi[-1]
    print(f"cumulative excess through {end}: {total:.1f} ({lo:.1f}, {hi:.1f}) "
          f"pointwise at {1 - alpha:.0%}")
    return 0


def cmd_glrt(args) -> int:
    opt = _Options(args)
    outdir = Path(opt.get("outdir", "."))
    outdir.mkdir(parents=True, exist_ok=True)
    basis_dim = opt.get("basis_dim", 32, int)
    trend = opt.get("trend", "linear")
    null_periods = opt.get("null_periods", required=True, coerce=_int_list)
    reselect = opt.flag("reselect")

    deaths, partition, include, pop, pop_star, inputs = _model2_inputs(opt)
    spec = ModelSpec(
        partition=partition,
        include_periods=tuple(include) if include else None,
        seasonal=SmoothTerm("cyclic_cubic", basis_dim),
        trend=(SmoothTerm("linear", 1) if trend == "linear"
               else SmoothTerm("cubic", 8)))
    null_fit, alt_fit = fit_nested_pair(spec, null_periods, deaths, pop,
                                        pop_star, reselect=reselect)
    stat, p = glrt(null_fit, alt_fit)
    df = len(alt_fit.design.period_cols) - len(null_fit.design.period_cols)
    reporting.write_json(outdir / "glrt_result.json", {
        "stat": stat, "df": df, "p": p, "p_rendered": _render_p(p),
        "null_periods": sorted(null_fit.design.period_cols),
        "alt_periods": sorted(alt_fit.design.period_cols),
        "null_deviance": null_fit.deviance,
        "alt_deviance": alt_fit.deviance,
        "smoothing_pinned": not reselect,
    })
    reporting.write_manifest(outdir, "glrt", opt.manifest_options(), inputs,
                             opt.raw_config)
    print(f"GLRT: stat={stat:.4f} df={df} p={_render_p(p)}")
    return 0


def cmd_population(args) -> int:
    opt = _Options(args)
    outdir = Path(opt.get("outdir", "."))
    outdir.mkdir(parents=True, exist_ok=True)
    anchors_path = opt.get("population_anchors", required=True)
    anchors = load_population_anchors(anchors_path)
    movement_path = opt.get("net_movement", required=True)
    movements = load_net_movement(movement_path)
    extrapolate = opt.flag("extrapolate")

    adjusted_anchors = apply_net_movement(anchors, movements)
    first_end = movements[0].month_end
    seed_anchor = [a for a in anchors if a.date <= first_end][-1]
    declines = monthend_declines(adjusted_anchors, seed_anchor.population)

    start = opt.get("start", anchors[0].date, as_date)
    end = opt.get("end", adjusted_anchors[-1].date, as_date)
    pop = interpolate_population(adjusted_anchors, start, end,
                                 extrapolate=extrapolate)
    pop_star = counterfactual_population(anchors, start, end,
                                         extrapolate=True)

    reporting.write_json(outdir / "population_declines.json", {
        "reference_population": seed_anchor.population,
        "reference_date": seed_anchor.date,
        "declines": [{"month_end": d, "population": v,
                      "pct_below_reference": pct}
                     for d, v, pct in declines],
    })
    reporting.write_csv(outdir / "population_daily.csv",
                        ["date", "adjusted", "counterfactual"],
                        [(d, a, c) for d, a, c in
                         zip(pop.dates, pop.values, pop_star.values)])
    figures.plot_population(pop.dates, pop.values, pop_star.values,
                            outdir / "population.svg")
    reporting.write_manifest(outdir, "population", opt.manifest_options(),
                             [anchors_path, movement_path], opt.raw_config)
    print("month-end population vs reference "
          f"{seed_anchor.population:.0f} ({seed_anchor.date}):")
    for date, value, pct in declines:
        print(f"  {date}: {value:.0f}  ({pct:.2f}% below)")
    return 0


def cmd_simulate(args) -> int:
    from .simulate import simulate

    values, raw = read_config(args.scenario)
    scenario = scenario_from_mapping(values)
    outdir = Path(args.outdir or ".")
    outdir.mkdir(parents=True, exist_ok=True)
    result = simulate(scenario)

    reporting.write_csv(outdir / "deaths.csv", ["date", "deaths"],
                        list(zip(result.deaths.dates, result.deaths.counts)))
    pop = result.population
    if isinstance(scenario.population, (int, float, tuple)):
        anchor_rows = [(pop.dates[0], pop.values[0], "census_vintage"),
                       (pop.dates[-1], pop.values[-1], "census_vintage")]
    else:
        anchor_rows = [(a.date, a.population, a.kind.value)
                       for a in scenario.population]
    reporting.write_csv(outdir / "population_anchors.csv",
                        ["date", "population", "kind"], anchor_rows)
    reporting.write_json(outdir / "truth.json", {
        "scenario": {
            "start": scenario.start, "end": scenario.end,
            "baseline": scenario.baseline,
            "seasonal_amplitude": scenario.seasonal_amplitude,
            "seasonal_phase": scenario.seasonal_phase,
            "trend_per_year": scenario.trend_per_year,
            "seed": scenario.seed,
            "effects": [{"start": e.start, "end": e.end, "effect": e.effect}
                        for e in scenario.effects],
        },
        "dates": result.truth.dates,
        "expected": result.truth.expected,
        "effect": result.truth.effect,
        "excess": result.truth.excess,
        "cumulative_excess": result.truth.cumulative_excess,
    })
    reporting.write_manifest(outdir, "simulate",
                             {"scenario": str(args.scenario)},
                             [args.scenario], raw)
    print(f"wrote {result.deaths.counts.sum()} deaths over "
          f"{scenario.n_days} days to {outdir}")
    return 0


_COMMANDS = {
    "model1": cmd_model1,
    "model2": cmd_model2,
    "glrt": cmd_glrt,
    "population": cmd_population,
    "simulate": cmd_simulate,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    command = _COMMANDS[args.command]
    try:
        return command(args)
    except FitError as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return 2
    except (ExcessDeathsError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # message first, then the traceback
        print(f"error: unexpected failure: {exc}", file=sys.stderr)
        raise


if __name__ == "__main__":
    sys.exit(main())
