"""Smooth-term bases and curvature penalties.

Splines are parameterized by their values at the knots, so coefficients stay
interpretable and the wiggliness penalty (integrated squared second
derivative) has an exact closed form. The seasonal basis is cyclic: the
represented function and its first two derivatives match at the endpoints of
[0, 1], making day-of-year wrap seamlessly across New Year.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .timeseries import DAYS_PER_YEAR
from .validation import check_finite


def cyclic_knots(basis_dim: int) -> np.ndarray:
    """Evenly spaced knots on [0, 1]; the last knot is the wrap point."""
    if basis_dim < 4:
        raise DomainError(f"cyclic basis needs at least 4 knots, got {basis_dim}")
    return np.linspace(0.0, 1.0, basis_dim)


def _cyclic_system(knots: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Map knot values to knot second derivatives for a periodic cubic spline.

    Returns (B^{-1} D, S) where B g = D f links second derivatives g to knot
    values f through first-derivative continuity (indices wrap), and
    S = D' B^{-1} D is the integrated squared second derivative in the
    value parameterization.
    """
    h = np.diff(knots)
    k = len(knots) - 1  # free values; f(knot[k]) is identified with f(knot[0])
    B = np.zeros((k, k))
    D = np.zeros((k, k))
    for j in range(k):
        prev = (j - 1) % k
        nxt = (j + 1) % k
        h_prev, h_j = h[prev], h[j]
        B[j, j] += (h_prev + h_j) / 3.0
        B[j, prev] += h_prev / 6.0
        B[j, nxt] += h_j / 6.0
        D[j, j] += -1.0 / h_prev - 1.0 / h_j
        D[j, prev] += 1.0 / h_prev
        D[j, nxt] += 1.0 / h_j
    curvature = np.linalg.solve(B, D)
    penalty = D.T @ curvature
    return curvature, 0.5 * (penalty + penalty.T)


def cyclic_cubic_design(x: np.ndarray, knots: np.ndarray) -> np.ndarray:
    """Rows evaluating the periodic interpolating spline at points in [0, 1)."""
    x = np.asarray(x, dtype=float)
    check_finite(x, "cyclic basis inputs")
    if np.any((x < 0.0) | (x >= 1.0)):
        raise DomainError("cyclic basis inputs must lie in [0, 1)")
    curvature, _ = _cyclic_system(knots)
    k = len(knots) - 1
    h = np.diff(knots)
    j = np.clip(np.searchsorted(knots, x, side="right") - 1, 0, k - 1)
    hj = h[j]
    a = (knots[j + 1] - x) / hj
    b = (x - knots[j]) / hj
    c = (a**3 - a) * hj**2 / 6.0
    d = (b**3 - b) * hj**2 / 6.0
    design = c[:, None] * curvature[j] + d[:, None] * curvature[(j + 1) % k]
    rows = np.arange(len(x))
    design[rows, j] += a
    design[rows, (j + 1) % k] += b
    return design


def build_cyclic_basis(values, basis_dim: int = 32):
    """Cyclic cubic regression spline design and penalty for [0,1) inputs.

    Returns the n x (k-1) design (the wrap knot shares the first column's
    coefficient) and the (k-1) x (k-1) curvature penalty, whose null space
    is the constant function.
    """
    knots = cyclic_knots(basis_dim)
    _, penalty = _cyclic_system(knots)
    return cyclic_cubic_design(values, knots), penalty


def _natural_system(knots: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Interior second derivatives and penalty for a natural cubic spline."""
    h = np.diff(knots)
    k = len(knots)
    interior = k - 2
    R = np.zeros((interior, interior))
    Q = np.zeros((k, interior))
    for j in range(interior):
        R[j, j] = (h[j] + h[j + 1]) / 3.0
        if j + 1 < interior:
            R[j, j + 1] = h[j + 1] / 6.0
            R[j + 1, j] = h[j + 1] / 6.0
        Q[j, j] = 1.0 / h[j]
        Q[j + 1, j] = -1.0 / h[j] - 1.0 / h[j + 1]
        Q[j + 2, j] = 1.0 / h[j + 1]
    curvature = np.linalg.solve(R, Q.T)  # maps knot values -> interior g
    penalty = Q @ curvature
    return curvature, 0.5 * (penalty + penalty.T)


def natural_cubic_design(x: np.ndarray, knots: np.ndarray) -> np.ndarray:
    """Rows evaluating a natural interpolating cubic spline at arbitrary x.

    Outside the knot range the spline continues linearly, matching the
    boundary slope (zero curvature at the end knots).
    """
    x = np.asarray(x, dtype=float)
    check_finite(x, "spline inputs")
    k = len(knots)
    if k < 3:
        raise DomainError("natural cubic spline needs at least 3 knots")
    h = np.diff(knots)
    interior_curv, _ = _natural_system(knots)
    curvature = np.zeros((k, k))
    curvature[1:-1] = interior_curv  # end-knot curvature is zero

    design = np.zeros((len(x), k))
    inside = (x >= knots[0]) & (x <= knots[-1])
    if inside.any():
        xi = x[inside]
        j = np.clip(np.searchsorted(knots, xi, side="right") - 1, 0, k - 2)
        hj = h[j]
        a = (knots[j + 1] - xi) / hj
        b = (xi - knots[j]) / hj
        c = (a**3 - a) * hj**2 / 6.0
        d = (b**3 - b) * hj**2 / 6.0
        block = c[:, None] * curvature[j] + d[:, None] * curvature[j + 1]
        rows = np.arange(len(xi))
        block[rows, j] += a
        block[rows, j + 1] += b
        design[inside] = block

    left = x < knots[0]
    if left.any():
        # f(x) = f(t0) + f'(t0) (x - t0), f'(t0) = (f1-f0)/h0 - h0 g1 / 6
        slope_rows = -curvature[1] * h[0] / 6.0
        slope_rows[0] += -1.0 / h[0]
        slope_rows[1] += 1.0 / h[0]
        base = np.zeros(k)
        base[0] = 1.0
        design[left] = base + np.outer(x[left] - knots[0], slope_rows)
    right = x > knots[-1]
    if right.any():
        slope_rows = curvature[-2] * h[-1] / 6.0
        slope_rows[-2] += -1.0 / h[-1]
        slope_rows[-1] += 1.0 / h[-1]
        base = np.zeros(k)
        base[-1] = 1.0
        design[right] = base + np.outer(x[right] - knots[-1], slope_rows)
    return design


def build_natural_basis(values, knots):
    """Natural cubic spline design and curvature penalty on given knots."""
    knots = np.asarray(knots, dtype=float)
    _, penalty = _natural_system(knots)
    return natural_cubic_design(values, knots), penalty


def apply_sum_to_zero(design, penalty=None, weights=None):
    """Reparameterize a smooth block so its fitted values sum to zero.

    Columns are rotated into the null space of the (weighted) column-sum
    constraint, dropping one dimension; the returned transform maps reduced
    coefficients back to the original parameterization for prediction at new
    points. A block that already satisfies the constraint is returned
    unchanged with an identity transform (so the operation is idempotent in
    fitted-function space).
    """
    design = np.asarray(design, dtype=float)
    if design.shape[1] < 2:
        raise DomainError("sum-to-zero constraint needs at least 2 columns")
    w = np.ones(design.shape[0]) if weights is None else np.asarray(weights,
                                                                    dtype=float)
    col_sums = design.T @ w
    scale = max(1.0, float(np.abs(design).max()) * len(w))
    if np.linalg.norm(col_sums) < 1e-12 * scale:
        transform = np.eye(design.shape[1])
        return design, penalty, transform
    q, _ = np.linalg.qr(col_sums[:, None], mode="complete")
    transform = q[:, 1:]
    constrained = design @ transform
    before = np.linalg.matrix_rank(design)
    after = np.linalg.matrix_rank(constrained)
    if before - after > 1:
        raise DomainError("sum-to-zero constraint lost more than one rank")
    constrained_penalty = None
    if penalty is not None:
        constrained_penalty = transform.T @ penalty @ transform
        constrained_penalty = 0.5 * (constrained_penalty
                                     + constrained_penalty.T)
    return constrained, constrained_penalty, transform


@dataclass(frozen=True)
class LinearTrend:
    """Centered linear time term: (date - midpoint) in average years."""

    origin_ordinal: float
    mean_offset: float

    def column(self, dates) -> np.ndarray:
        years = np.array([(d.toordinal() - self.origin_ordinal) / DAYS_PER_YEAR
                          for d in dates])
        return years - self.mean_offset


def build_linear_term(dates) -> tuple[np.ndarray, LinearTrend]:
    """Single mean-zero column measuring time in years from the range midpoint."""
    if not dates:
        raise DomainError("at least one date is required")
    ordinals = np.array([d.toordinal() for d in dates], dtype=float)
    origin = 0.5 * (ordinals[0] + ordinals[-1])
    years = (ordinals - origin) / DAYS_PER_YEAR
    trend = LinearTrend(origin, float(years.mean()))
    return years - years.mean(), trend
