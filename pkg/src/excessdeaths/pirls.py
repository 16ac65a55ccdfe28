"""Penalized Poisson regression: IRLS fitting and REML smoothing selection.

The fitting loop maximizes the Poisson log-likelihood minus quadratic
curvature penalties by iteratively reweighted penalized least squares.
Smoothing parameters are chosen by minimizing the Laplace-approximate
restricted marginal likelihood over their logs: a coarse log-spaced grid
scan followed by golden-section (one penalty) or Nelder-Mead (several).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, optimize
from scipy.special import gammaln, xlogy

from .errors import DomainError, FitError

MAX_ITER = 200
DEVIANCE_RTOL = 1e-9
SCORE_TOL = 1e-8
_RIDGE = 1e-10
_ETA_CAP = 300.0  # exp overflow guard on the linear predictor


def poisson_deviance(y: np.ndarray, mu: np.ndarray) -> float:
    return float(2.0 * np.sum(xlogy(y, y / np.maximum(mu, 1e-300)) - (y - mu)))


def poisson_loglik(y: np.ndarray, mu: np.ndarray) -> float:
    return float(np.sum(xlogy(y, mu) - mu - gammaln(y + 1.0)))


def deviance_residuals(y: np.ndarray, mu: np.ndarray) -> np.ndarray:
    unit = 2.0 * (xlogy(y, y / np.maximum(mu, 1e-300)) - (y - mu))
    return np.sign(y - mu) * np.sqrt(np.maximum(unit, 0.0))


@dataclass
class FitResult:
    """Converged penalized Poisson fit and its posterior quantities."""

    design: object
    coef: np.ndarray
    cov: np.ndarray
    smoothing: np.ndarray
    edf: dict
    edf_total: float
    deviance: float
    pearson: float
    loglik: float
    penalty_value: float
    converged: bool
    iterations: int
    mu: np.ndarray = field(repr=False, default=None)
    eta: np.ndarray = field(repr=False, default=None)

    @property
    def residual_df(self) -> float:
        return len(self.design.y) - self.edf_total

    def se(self, col: int) -> float:
        return float(np.sqrt(self.cov[col, col]))


def penalty_total(design, smoothing) -> np.ndarray:
    """Embed the weighted block penalties into the full coefficient space."""
    p = design.X.shape[1]
    total = np.zeros((p, p))
    for lam, block in zip(smoothing, design.penalized_blocks):
        sl = block.cols
        total[sl, sl] += lam * block.penalty
    return total


def _chol_factor(A: np.ndarray):
    """Cholesky factor with a small ridge retry when nearly singular."""
    try:
        return linalg.cho_factor(A, lower=True)
    except linalg.LinAlgError:
        ridge = _RIDGE * max(1.0, float(np.trace(A)) / len(A))
        return linalg.cho_factor(A + ridge * np.eye(len(A)), lower=True)


def pirls_fit(design, smoothing=(), max_iter: int = MAX_ITER,
              deviance_rtol: float = DEVIANCE_RTOL,
              score_tol: float = SCORE_TOL) -> FitResult:
    """Fit the penalized Poisson model at fixed smoothing parameters.

    Convergence requires either a relative penalized-deviance change below
    ``deviance_rtol`` or a penalized score sup-norm (on unit-scaled columns)
    below ``score_tol``. Raises :class:`FitError` with the deviance trace on
    failure.
    """
    X, y, offset = design.X, design.y.astype(float), design.offset
    smoothing = np.asarray(smoothing, dtype=float)
    if len(smoothing) != len(design.penalized_blocks):
        raise DomainError(
            f"expected {len(design.penalized_blocks)} smoothing parameters, "
            f"got {len(smoothing)}")
    if np.any(smoothing <= 0):
        raise DomainError("smoothing parameters must be strictly positive")
    S = penalty_total(design, smoothing)
    col_scale = np.sqrt((X * X).sum(axis=0))
    col_scale[col_scale == 0.0] = 1.0

    # working state for the first weighted solve; the first step is
    # accepted unconditionally (pdev starts at +inf)
    mu = y + 0.5
    eta = np.log(mu)
    coef = np.zeros(X.shape[1])
    pdev = math.inf
    trace = []
    converged = False
    iteration = 0
    for iteration in range(1, max_iter + 1):
        w = np.maximum(mu, 1e-10)
        z = (eta - offset) + (y - mu) / w
        XtW = X.T * w
        factor = _chol_factor(XtW @ X + S)
        new_coef = linalg.cho_solve(factor, XtW @ z)
        if not np.all(np.isfinite(new_coef)):
            raise FitError("diverging coefficients (separation?)", trace)

        step = new_coef - coef
        t = 1.0
        while True:
            trial = coef + t * step
            eta_t = offset + X @ trial
            if np.all(eta_t < _ETA_CAP):
                mu_t = np.exp(eta_t)
                pdev_t = poisson_deviance(y, mu_t) + float(trial @ S @ trial)
                if pdev_t <= pdev + 1e-10 * (abs(pdev) + 1.0) \
                        or not math.isfinite(pdev):
                    break
            t *= 0.5
            if t < 1e-10:
                raise FitError("step halving failed to reduce the penalized "
                               "deviance", trace)
        change = abs(pdev - pdev_t) if math.isfinite(pdev) else math.inf
        coef, eta, mu, pdev = trial, eta_t, mu_t, pdev_t
        trace.append(pdev)

        score = X.T @ (y - mu) - S @ coef
        score_norm = float(np.max(np.abs(score / col_scale)))
        if change < deviance_rtol * (abs(pdev) + deviance_rtol) \
                or score_norm < score_tol:
            converged = True
            break
    if not converged:
        raise FitError(f"no convergence in {max_iter} iterations", trace)

    w = np.maximum(mu, 1e-10)
    XtWX = (X.T * w) @ X
    factor = _chol_factor(XtWX + S)
    cov = linalg.cho_solve(factor, np.eye(X.shape[1]))
    cov = 0.5 * (cov + cov.T)
    edf_diag = np.diag(cov @ XtWX)
    edf = {name: float(edf_diag[cols].sum())
           for name, cols in design.term_columns.items()}
    return FitResult(
        design=design,
        coef=coef,
        cov=cov,
        smoothing=smoothing,
        edf=edf,
        edf_total=float(edf_diag.sum()),
        deviance=poisson_deviance(y, mu),
        pearson=float(np.sum((y - mu) ** 2 / w)),
        loglik=poisson_loglik(y, mu),
        penalty_value=float(coef @ S @ coef),
        converged=True,
        iterations=iteration,
        mu=mu,
        eta=eta,
    )


def _penalty_logdet_parts(design):
    """Per-block rank and positive-eigenvalue log-determinant of each penalty."""
    parts = []
    for block in design.penalized_blocks:
        eigvals = np.linalg.eigvalsh(block.penalty)
        tol = max(eigvals.max(), 0.0) * 1e-10 + 1e-300
        positive = eigvals[eigvals > tol]
        parts.append((len(positive), float(np.sum(np.log(positive)))))
    return parts


def reml_criterion(design, log_smoothing, _logdet_parts=None,
                   fit: FitResult | None = None) -> float:
    """Negative Laplace-approximate restricted marginal likelihood.

    Smaller is better. ``log_smoothing`` holds natural logs of the penalty
    multipliers. Penalized blocks must be disjoint (they are, by
    construction of the design) for the generalized determinant to factor
    per block.
    """
    lam = np.exp(np.asarray(log_smoothing, dtype=float))
    if fit is None:
        fit = pirls_fit(design, lam)
    parts = _logdet_parts or _penalty_logdet_parts(design)
    logdet_S = sum(rank * math.log(l) + base
                   for l, (rank, base) in zip(lam, parts))
    rank_S = sum(rank for rank, _ in parts)
    null_dim = design.X.shape[1] - rank_S

    w = np.maximum(fit.mu, 1e-10)
    H = (design.X.T * w) @ design.X + penalty_total(design, lam)
    c, _ = _chol_factor(H)
    logdet_H = 2.0 * float(np.sum(np.log(np.diag(c))))

    laml = (fit.loglik - 0.5 * fit.penalty_value + 0.5 * logdet_S
            - 0.5 * logdet_H + 0.5 * null_dim * math.log(2.0 * math.pi))
    return -laml


_GRID_LOG10 = np.linspace(-4.0, 6.0, 7)


def select_smoothing(design, grid_log10=_GRID_LOG10,
                     max_iter: int = MAX_ITER):
    """Choose smoothing parameters by REML and return the refit optimum.

    A 7-point log-spaced scan per penalty seeds golden-section search (one
    penalty) or Nelder-Mead (several).
    """
    n_pen = len(design.penalized_blocks)
    if n_pen == 0:
        raise DomainError("model has no penalized smooth term")
    parts = _penalty_logdet_parts(design)

    def crit(log_lam):
        try:
            return reml_criterion(design, np.atleast_1d(log_lam),
                                  _logdet_parts=parts)
        except (FitError, linalg.LinAlgError):
            return math.inf

    grid = np.log(10.0) * np.asarray(grid_log10, dtype=float)
    best_val = math.inf
    best_combo = None
    scan = {}
    for combo in itertools.product(range(len(grid)), repeat=n_pen):
        point = grid[list(combo)]
        value = crit(point)
        scan[combo] = value
        if value < best_val:
            best_val, best_combo = value, combo
    if best_combo is None or not math.isfinite(best_val):
        raise FitError("REML criterion is infinite on the whole scan grid",
                       list(scan.values()))
    best_point = grid[list(best_combo)]

    if n_pen == 1:
        i = best_combo[0]
        lo = grid[i] - math.log(100.0) if i == 0 else grid[i - 1]
        hi = grid[i] + math.log(100.0) if i == len(grid) - 1 else grid[i + 1]
        mid = grid[i]
        if crit(np.array([lo])) > best_val and crit(np.array([hi])) > best_val:
            res = optimize.minimize_scalar(
                lambda t: crit(np.array([t])), bracket=(lo, mid, hi),
                method="golden", options={"xtol": 1e-4})
        else:
            res = optimize.minimize_scalar(
                lambda t: crit(np.array([t])), bounds=(lo, hi),
                method="bounded", options={"xatol": 1e-4})
        optimum = np.array([float(res.x)])
        if res.fun > best_val:
            optimum = best_point
    else:
        res = optimize.minimize(crit, best_point, method="Nelder-Mead",
                                options={"xatol": 1e-3, "fatol": 1e-6,
                                         "maxiter": 400})
        optimum = res.x if res.fun <= best_val else best_point

    lam = np.exp(optimum)
    fit = pirls_fit(design, lam, max_iter=max_iter)
    return lam, fit
