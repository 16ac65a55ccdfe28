"""Excess-death estimation from daily death counts and population data.

Two complementary models: a before/after Poisson comparison with
profile-likelihood confidence intervals, and a penalized Poisson log-linear
model with a cyclic seasonal smooth, period indicators, population offsets,
and posterior-simulation confidence bands.
"""

from .errors import (AlignmentError, ConfigError, DomainError,
                     ExcessDeathsError, FitError, IngestError)
from .gam import (DiagnosticsReport, EffectEstimate, ExcessDeathsGAM,
                  ModelSpec, SmoothTerm, assemble_design, diagnostics,
                  fit_nested_pair, glrt, multiplicative_effect, wald_test)
from .inference import (Band, ExcessCurve, PosteriorDraws, band_simultaneous,
                        cumulative_excess, excess_curve, functional_values,
                        interval_pointwise, posterior_band, posterior_draws)
from .ingest import (AnchorKind, NetMovementRecord, PopulationAnchor,
                     apply_net_movement, counterfactual_population,
                     interpolate_population, load_deaths, load_net_movement,
                     load_population_anchors, monthend_declines)
from .pirls import FitResult, pirls_fit, reml_criterion, select_smoothing
from .profile import (HorizonInterval, Model1Result, ProfileLikelihoodModel,
                      ProfilePoint, SummaryCounts, anova_precheck,
                      bonferroni_cumulative, cumulative_excess_mle,
                      fit_profile_model, neg2_log_lrt, profile_curve,
                      profile_interval, restricted_background_mle)
from .simulate import PeriodEffect, Scenario, SimulationResult, simulate
from .timeseries import (DailyCountSeries, MortalityRateSeries,
                         PeriodPartition, PopulationSeries,
                         day_of_year_fraction, mortality_rate)

__version__ = "0.1.0"
