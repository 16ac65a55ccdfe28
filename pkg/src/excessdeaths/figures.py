"""SVG figure output for the CLI reports."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "excessdeaths"

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def plot_profile_curve(points, cutoff, ci_cumulative, post_days, path):
    """Likelihood-ratio statistic against cumulative excess deaths."""
    cum = np.array([p.excess_rate * post_days for p in points])
    stat = np.array([p.neg2loglrt for p in points])
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(cum, stat, color="tab:blue")
    ax.axhline(cutoff, color="tab:gray", linestyle="--",
               label="chi-square cutoff")
    for bound in ci_cumulative:
        ax.axvline(bound, color="tab:red", linestyle=":")
    ax.set_xlabel("cumulative excess deaths")
    ax.set_ylabel("-2 log likelihood ratio")
    ax.legend(loc="upper center")
    fig.tight_layout()
    _save(fig, path)


def plot_population(dates, adjusted, counterfactual, path):
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(dates, counterfactual, color="tab:gray", label="no displacement")
    ax.plot(dates, adjusted, color="tab:blue", label="net-movement adjusted")
    ax.set_ylabel("population")
    ax.legend()
    fig.autofmt_xdate()
    fig.tight_layout()
    _save(fig, path)


def plot_fit_band(dates, observed_rate, fitted_rate, band, path):
    fig, ax = plt.subplots(figsize=(8, 4.5))
    ax.plot(dates, observed_rate, ".", color="0.6", markersize=2.5,
            label="observed")
    ax.fill_between(dates, band.lo, band.hi, color="tab:blue", alpha=0.25,
                    label=f"{band.level:.0%} simultaneous band")
    ax.plot(dates, fitted_rate, color="tab:blue", label="model fit")
    ax.set_ylabel("deaths per 1000 person-years")
    ax.legend()
    fig.autofmt_xdate()
    fig.tight_layout()
    _save(fig, path)


def plot_cumulative_band(dates, cumulative, pointwise, simultaneous, path):
    fig, ax = plt.subplots(figsize=(8, 4.5))
    ax.fill_between(dates, simultaneous.lo, simultaneous.hi,
                    color="tab:red", alpha=0.15,
                    label=f"{simultaneous.level:.0%} simultaneous band")
    ax.plot(dates, pointwise.lo, color="black", linewidth=0.8,
            label=f"{pointwise.level:.0%} pointwise bounds")
    ax.plot(dates, pointwise.hi, color="black", linewidth=0.8)
    ax.plot(dates, cumulative, color="tab:red", label="estimate")
    ax.set_ylabel("cumulative excess deaths")
    ax.legend(loc="upper left")
    fig.autofmt_xdate()
    fig.tight_layout()
    _save(fig, path)
