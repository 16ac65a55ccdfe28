import numpy as np
import pytest

from excessdeaths.gam import DesignMatrix, ModelSpec, SmoothTerm
from excessdeaths.simulate import PeriodEffect, Scenario, simulate
from excessdeaths.timeseries import PeriodPartition


def bare_design(X, y, offset=None, smooths=()):
    """DesignMatrix around plain arrays, for exercising the GLM core."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    offset = np.zeros(len(y)) if offset is None else np.asarray(offset,
                                                                dtype=float)
    return DesignMatrix(
        X=X, y=y, offset=offset, dates=[],
        names=[f"c{j}" for j in range(X.shape[1])],
        period_cols={}, row_periods=np.zeros(len(y), dtype=np.int64),
        smooths=list(smooths), spec=None)


def newton_poisson_glm(X, y, offset, tol=1e-12, max_iter=100):
    """Straightforward unpenalized Poisson-GLM Newton solver (oracle)."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    coef = np.zeros(X.shape[1])
    for _ in range(max_iter):
        mu = np.exp(offset + X @ coef)
        grad = X.T @ (y - mu)
        hess = (X.T * mu) @ X
        step = np.linalg.solve(hess, grad)
        coef = coef + step
        if np.max(np.abs(step)) < tol:
            break
    return coef


@pytest.fixture(scope="session")
def storm_partition():
    return PeriodPartition("2017-09-20", ["2017-09-30", "2017-10-31",
                                          "2017-11-30", "2017-12-31"])


@pytest.fixture(scope="session")
def storm_scenario(storm_partition):
    return Scenario(
        start="2015-01-01", end="2018-02-28", baseline=8.5,
        population=3.3e6, seasonal_amplitude=0.10, seasonal_phase=1.2,
        trend_per_year=0.01,
        effects=(PeriodEffect("2017-09-20", "2017-09-30", 1.517),
                 PeriodEffect("2017-10-01", "2017-10-31", 1.272),
                 PeriodEffect("2017-11-01", "2017-11-30", 1.150),
                 PeriodEffect("2017-12-01", "2017-12-31", 1.064)),
        seed=42)


@pytest.fixture(scope="session")
def storm_sim(storm_scenario):
    return simulate(storm_scenario)


@pytest.fixture(scope="session")
def storm_spec(storm_partition):
    return ModelSpec(partition=storm_partition)


@pytest.fixture(scope="session")
def small_spec(storm_partition):
    """Reduced basis for fast fitting in tests that only need plumbing."""
    return ModelSpec(partition=storm_partition,
                     seasonal=SmoothTerm("cyclic_cubic", 8))
