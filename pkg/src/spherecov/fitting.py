"""Coefficient estimation from data or empirical correlation curves.

Pipeline: bin observation pairs by geodesic cosine into an empirical
correlation curve, project it onto the polynomial basis under the
nonnegativity constraint the covariance theorems demand (active-set
nonnegative least squares), and optionally shape the coefficients into a
nonincreasing sequence (pool adjacent violators) when the dominance of the
early harmonics is wanted in the model.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .covariance import SchoenbergSequence
from .errors import DomainError, InsufficientDataError, ModelValidationError
from .harmonics import GegenbauerBasis

__all__ = [
    "CorrelationBin",
    "FitResult",
    "empirical_isotropic_correlation",
    "nonnegative_least_squares",
    "fit_nonnegative",
    "decreasing_projection",
    "monotone_shape",
]

DEGENERATE_VARIANCE_RTOL = 1e-20


@dataclass(frozen=True)
class CorrelationBin:
    """One cosine bin of the empirical correlation curve."""

    x: float
    correlation: float
    count: int


def empirical_isotropic_correlation(records, num_bins: int, time_window: float):
    """Bin observation pairs by geodesic cosine; report per-bin correlation.

    Pairs with |t_i - t_j| <= time_window enter; each nonempty bin reports
    the mean pair cosine, the correlation estimate
    mean[(v_i - vbar)(v_j - vbar)] / var(v), and the pair count.  Identical
    values everywhere (zero sample variance) degenerate to correlation 1.
    """
    records = list(records)
    if len(records) < 2:
        raise InsufficientDataError("need at least 2 records")
    if int(num_bins) != num_bins or num_bins < 1:
        raise DomainError("num_bins must be a positive integer")
    num_bins = int(num_bins)
    time_window = float(time_window)
    if time_window < 0.0:
        raise DomainError("time_window must be >= 0")

    coords = np.array([r.location().coords for r in records])
    times = np.array([r.t for r in records])
    values = np.array([r.value for r in records])
    vbar = float(values.mean())
    centered = values - vbar
    variance = float(np.mean(centered**2))

    counts, sum_x, sum_prod = _kernels.pair_bin_stats(
        coords, times, centered, time_window, num_bins
    )
    total = int(counts.sum())
    if total < 2:
        raise InsufficientDataError(
            "fewer than 2 usable pairs within the time window"
        )
    degenerate = variance <= DEGENERATE_VARIANCE_RTOL * max(1.0, vbar * vbar)
    bins = []
    for b in range(num_bins):
        if counts[b] == 0:
            continue
        x_center = sum_x[b] / counts[b]
        corr = 1.0 if degenerate else (sum_prod[b] / counts[b]) / variance
        bins.append(
            CorrelationBin(x=float(x_center), correlation=float(corr), count=int(counts[b]))
        )
    return bins


def nonnegative_least_squares(design: np.ndarray, target: np.ndarray, max_iter=None):
    """Solve min ||design @ beta - target||_2 subject to beta >= 0.

    Lawson-Hanson active-set iteration.  Returns (beta, residual_norm).
    """
    A = np.asarray(design, dtype=np.float64)
    b = np.asarray(target, dtype=np.float64)
    if A.ndim != 2 or b.ndim != 1 or A.shape[0] != b.shape[0]:
        raise DomainError("design must be (m, n) and target (m,)")
    m, n = A.shape
    if max_iter is None:
        max_iter = 3 * n + 30
    tol = 10.0 * np.finfo(np.float64).eps * np.linalg.norm(A, 1) * max(m, n)

    x = np.zeros(n)
    passive = np.zeros(n, dtype=bool)
    grad = A.T @ b
    for _ in range(max_iter):
        if passive.all():
            break
        candidates = np.where(~passive, grad, -np.inf)
        j = int(np.argmax(candidates))
        if candidates[j] <= tol:
            break
        passive[j] = True
        while True:
            s = np.zeros(n)
            s[passive] = np.linalg.lstsq(A[:, passive], b, rcond=None)[0]
            if s[passive].min() > 0.0:
                break
            blocking = passive & (s <= 0.0)
            alpha = np.min(x[blocking] / (x[blocking] - s[blocking]))
            x = x + alpha * (s - x)
            passive &= x > tol
            x[~passive] = 0.0
        x = s
        grad = A.T @ (b - A @ x)
    return x, float(np.linalg.norm(b - A @ x))


@dataclass(frozen=True)
class FitResult:
    """Fitted sequence plus the weighted residual norm of the projection."""

    sequence: SchoenbergSequence
    residual: float


def fit_nonnegative(curve, basis: GegenbauerBasis, max_degree: int) -> FitResult:
    """Weighted nonnegative projection of a curve onto the polynomial basis.

    ``curve`` is a sequence of (x, y, weight) points.  Solves
    min sum w * (y - scale * sum_n a_n P_n(x))^2 over a_n >= 0,
    sum a_n = 1, scale > 0 by substituting beta_n = scale * a_n and running
    nonnegative least squares, then normalizing.
    """
    if int(max_degree) != max_degree or max_degree < 0:
        raise DomainError("max_degree must be a nonnegative integer")
    max_degree = int(max_degree)
    if max_degree > basis.max_degree:
        raise DomainError(
            "max_degree %d exceeds basis max_degree %d" % (max_degree, basis.max_degree)
        )
    pts = [(float(x), float(y), float(w)) for x, y, w in curve]
    if len(pts) < max_degree + 1:
        raise InsufficientDataError(
            "need at least max_degree + 1 = %d curve points, got %d"
            % (max_degree + 1, len(pts))
        )
    xs = np.array([p[0] for p in pts])
    ys = np.array([p[1] for p in pts])
    ws = np.array([p[2] for p in pts])
    if np.any(np.abs(xs) > 1.0 + 1e-14):
        raise DomainError("curve abscissae must lie in [-1, 1]")
    if np.any(ws <= 0.0):
        raise DomainError("curve weights must be positive")

    table = _kernels.gegenbauer_table(basis.lam, max_degree, np.clip(xs, -1.0, 1.0))
    sqrt_w = np.sqrt(ws)
    beta, residual = nonnegative_least_squares(sqrt_w[:, None] * table, sqrt_w * ys)
    scale = float(beta.sum())
    if scale <= 0.0:
        raise ModelValidationError("data inconsistent with positive scale")
    return FitResult(
        sequence=SchoenbergSequence(scale=scale, coefficients=beta / scale),
        residual=residual,
    )


def decreasing_projection(values, weights=None) -> np.ndarray:
    """Weighted L2 projection onto the cone of nonincreasing sequences.

    Pool-adjacent-violators; preserves the weighted mean.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1 or values.shape[0] == 0:
        raise DomainError("values must be a nonempty 1-d sequence")
    if weights is None:
        weights = np.ones_like(values)
    else:
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != values.shape or np.any(weights <= 0.0):
            raise DomainError("weights must be positive and match values")
    return _kernels.pava_decreasing(values, weights)


def monotone_shape(values, weights=None) -> np.ndarray:
    """Nonincreasing reshaping of nonnegative coefficients, renormalized.

    Projects onto the nonincreasing cone and rescales the result to sum to
    1 (left untouched when the projection sums to 0).
    """
    values = np.asarray(values, dtype=np.float64)
    if np.any(values < 0.0):
        raise DomainError("coefficients must be nonnegative")
    projected = decreasing_projection(values, weights)
    np.maximum(projected, 0.0, out=projected)  # clip fp dust from pooling zeros
    total = projected.sum()
    if total > 0.0:
        projected = projected / total
    return projected
