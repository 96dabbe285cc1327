"""Simple kriging on sphere and sphere-time point sets.

Prediction at a target is the known prior mean plus a weighted combination
of the observed anomalies, the weights solving the Gram system against the
covariance vector to the target.  Gram matrices from smooth models sit near
singularity, so the solve escalates through a small jitter ladder before
declaring failure (with the condition number attached).
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .covariance import SpaceTimeModel
from .errors import DimensionMismatchError, DomainError, InsufficientDataError, NumericalError
from .geometry import geodesic_cosine
from .validation import GramMatrix, condition_number

__all__ = [
    "KrigingSystem",
    "KrigeResult",
    "solve_spd",
    "krige",
    "krige_neighborhood",
]

JITTER_LADDER = (0.0, 1e-12, 1e-10, 1e-8)
VARIANCE_CLAMP_RTOL = 1e-10
SOLVE_RESIDUAL_RTOL = 1e-9
PIVOT_CONDITION_LIMIT = 1e10
RANK_CLIP_RTOL = 1e-12
INDEFINITE_RTOL = 1e-8


def solve_spd(matrix: np.ndarray, rhs: np.ndarray):
    """Solve a PSD covariance system with jitter escalation.

    Tries Cholesky on matrix + eps * (trace/n) * I for eps in the ladder
    (starting at 0).  A level is accepted only when the pivot-ratio
    condition estimate stays moderate and the refined solve leaves a small
    residual: Cholesky can factor a numerically singular matrix without
    complaint, and past ~1e10 the near-null components of the solution are
    rounding noise.  When the whole ladder is effectively singular the
    solve falls back to the eigenvalue pseudo-inverse (minimum-norm
    weights), which is the meaningful limit for rank-deficient Gram
    matrices; genuinely indefinite input raises :class:`NumericalError`
    with the condition number attached.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    rhs = np.asarray(rhs, dtype=np.float64)
    n = matrix.shape[0]
    mean_diag = float(np.trace(matrix)) / n
    rhs_norm = float(np.linalg.norm(rhs))
    for eps in JITTER_LADDER:
        jittered = matrix + (eps * mean_diag) * np.eye(n) if eps else matrix
        try:
            factor = cho_factor(jittered, lower=True)
        except LinAlgError:
            continue
        pivots = np.abs(np.diag(factor[0]))
        if (pivots.max() / pivots.min()) ** 2 > PIVOT_CONDITION_LIMIT:
            continue
        x = cho_solve(factor, rhs)
        x = x + cho_solve(factor, rhs - jittered @ x)  # one refinement step
        if np.linalg.norm(rhs - jittered @ x) <= SOLVE_RESIDUAL_RTOL * rhs_norm:
            return x
    eigvals, eigvecs = np.linalg.eigh(0.5 * (matrix + matrix.T))
    if eigvals[0] < -INDEFINITE_RTOL * mean_diag:
        raise NumericalError(
            "covariance system is indefinite beyond the jitter ladder",
            condition_number=condition_number(GramMatrix(0.5 * (matrix + matrix.T))),
        )
    cut = RANK_CLIP_RTOL * max(eigvals[-1], 0.0)
    inv = np.where(eigvals > cut, 1.0 / np.where(eigvals > cut, eigvals, 1.0), 0.0)
    return eigvecs @ (inv * (eigvecs.T @ rhs))


@dataclass
class KrigingSystem:
    """Observations for kriging: Gram matrix, values, and known prior mean."""

    gram: GramMatrix
    values: np.ndarray
    mean: float
    _weights_cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.ndim != 1 or values.shape[0] != self.gram.size:
            raise DimensionMismatchError(
                "values length %d does not match Gram size %d"
                % (values.shape[0], self.gram.size)
            )
        values.setflags(write=False)
        self.values = values
        self.mean = float(self.mean)
        if self.gram.points is None:
            raise DimensionMismatchError(
                "kriging needs the Gram matrix built from points (use build_gram)"
            )


@dataclass(frozen=True)
class KrigeResult:
    prediction: float
    variance: float
    weights: np.ndarray
    excluded_count: int = 0


def _krige_core(model, points, gram_entries, values, mean, target, excluded=0):
    k = model.covariance_cross([target], list(points))[0]
    weights = solve_spd(gram_entries, k)
    prediction = mean + float(weights @ (values - mean))
    c_target = model.covariance(target, target)
    variance = c_target - float(weights @ k)
    clamp = VARIANCE_CLAMP_RTOL * max(1.0, abs(c_target))
    if variance < -clamp:
        raise NumericalError(
            "kriging variance %.3g below the corruption threshold %.3g"
            % (variance, -clamp)
        )
    return KrigeResult(
        prediction=prediction,
        variance=max(variance, 0.0),
        weights=weights,
        excluded_count=excluded,
    )


def krige(system: KrigingSystem, model: SpaceTimeModel, target) -> KrigeResult:
    """Simple-kriging prediction, variance and weights at a target point.

    Exact interpolator at observation points when the nugget is 0; the
    variance is clamped to 0 when within a small negative round-off band
    and treated as corruption below it.
    """
    return _krige_core(
        model,
        system.gram.points,
        system.gram.entries,
        system.values,
        system.mean,
        target,
    )


def krige_neighborhood(
    system: KrigingSystem,
    model: SpaceTimeModel,
    target,
    x_min: float,
    t_max: float,
) -> KrigeResult:
    """Kriging restricted to observations near the target.

    Keeps observations with every geodesic cosine to the target >= x_min
    and every |time difference| <= t_max; the count of dropped observations
    is reported on the result.
    """
    x_min = float(x_min)
    if not -1.0 <= x_min <= 1.0:
        raise DomainError("x_min must lie in [-1, 1]")
    t_max = float(t_max)
    if not t_max > 0.0:
        raise DomainError("t_max must be positive")
    points = system.gram.points
    model._check_point(target)
    keep = []
    for i, p in enumerate(points):
        ok = True
        for sp, sq in zip(target.spheres, p.spheres):
            if geodesic_cosine(sp, sq) < x_min:
                ok = False
                break
        if ok:
            for tp, tq in zip(target.times, p.times):
                if abs(tp - tq) > t_max:
                    ok = False
                    break
        if ok:
            keep.append(i)
    if not keep:
        raise InsufficientDataError("no observation within the neighborhood")
    idx = np.array(keep)
    sub_points = [points[i] for i in keep]
    sub_gram = system.gram.entries[np.ix_(idx, idx)]
    return _krige_core(
        model,
        sub_points,
        sub_gram,
        system.values[idx],
        system.mean,
        target,
        excluded=len(points) - len(keep),
    )
