"""Desk-scale variational and ensemble data assimilation.

The quadratic cost weighs the departure from the background state against
the departure of the mapped state from the observations, each through the
inverse of its error covariance (no 1/2 convention: the minimizer is
unaffected).  The minimizer -- the analysis -- is found by conjugate
gradients on the equivalent SPD normal system; the background covariance is
held factored and only ever applied through solves, never inverted and
stored, so block or separable structure can be exploited at larger scale.

The ensemble update is the stochastic (perturbed-observation) variant:
each member moves by the Kalman gain built from the ensemble sample
covariance, against observations perturbed with fresh noise drawn from the
observation-error covariance.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .errors import DimensionMismatchError, ModelValidationError, NumericalError
from .simulation import psd_square_root

__all__ = [
    "VarProblem",
    "AnalysisResult",
    "cost",
    "grad_cost",
    "solve_3dvar",
    "closed_form_analysis",
    "enkf_update",
]

PSD_CHECK_RTOL = 1e-10


def _check_covariance(matrix, name):
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ModelValidationError("%s must be square" % name)
    gap = float(np.max(np.abs(matrix - matrix.T)))
    scale = max(float(np.max(np.abs(matrix))), 1.0)
    if gap > 1e-12 * scale:
        raise ModelValidationError("%s must be symmetric" % name)
    eigmin = float(np.linalg.eigvalsh(matrix)[0])
    if eigmin < -PSD_CHECK_RTOL * float(np.trace(matrix)) / matrix.shape[0]:
        raise ModelValidationError(
            "%s must be positive semidefinite (min eigenvalue %.3g)" % (name, eigmin)
        )
    return matrix


@dataclass
class VarProblem:
    """Background state, observations, linear operator, and error covariances.

    ``observation_floor`` is added to the observation-covariance diagonal
    when needed to keep it invertible.
    """

    background: np.ndarray
    observations: np.ndarray
    observation_operator: np.ndarray
    background_covariance: np.ndarray
    observation_covariance: np.ndarray
    observation_floor: float = 0.0
    _factors: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        xb = np.array(self.background, dtype=np.float64, copy=True)
        yo = np.array(self.observations, dtype=np.float64, copy=True)
        H = np.array(self.observation_operator, dtype=np.float64, copy=True)
        if xb.ndim != 1 or yo.ndim != 1 or H.ndim != 2:
            raise ModelValidationError(
                "background/observations must be vectors, operator a matrix"
            )
        n, p = xb.shape[0], yo.shape[0]
        if H.shape != (p, n):
            raise DimensionMismatchError(
                "operator shape %s does not map state dim %d to obs dim %d"
                % (H.shape, n, p)
            )
        B = _check_covariance(self.background_covariance, "background covariance")
        if B.shape != (n, n):
            raise DimensionMismatchError("background covariance must be %dx%d" % (n, n))
        R = np.array(
            _check_covariance(self.observation_covariance, "observation covariance"),
            copy=True,
        )
        if R.shape != (p, p):
            raise DimensionMismatchError("observation covariance must be %dx%d" % (p, p))
        floor = float(self.observation_floor)
        if floor < 0.0 or not math.isfinite(floor):
            raise ModelValidationError("observation_floor must be finite and >= 0")
        if floor > 0.0:
            diag = np.diag_indices(p)
            R[diag] = np.maximum(R[diag], floor)
        self.background = xb
        self.observations = yo
        self.observation_operator = H
        self.background_covariance = np.array(B, copy=True)
        self.observation_covariance = R
        for arr in (xb, yo, H, self.background_covariance, R):
            arr.setflags(write=False)

    @property
    def state_dim(self) -> int:
        return self.background.shape[0]

    @property
    def obs_dim(self) -> int:
        return self.observations.shape[0]

    def _factor(self, which):
        if which not in self._factors:
            matrix = (
                self.background_covariance
                if which == "B"
                else self.observation_covariance
            )
            try:
                self._factors[which] = cho_factor(matrix, lower=True)
            except LinAlgError:
                raise NumericalError(
                    "%s covariance is singular; raise observation_floor or regularize"
                    % ("background" if which == "B" else "observation")
                ) from None
        return self._factors[which]

    def solve_background(self, v):
        """Apply the inverse background covariance through the cached factor."""
        return cho_solve(self._factor("B"), v)

    def solve_observation(self, v):
        return cho_solve(self._factor("R"), v)


def _check_state(problem, x):
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (problem.state_dim,):
        raise DimensionMismatchError(
            "state vector must have dimension %d" % problem.state_dim
        )
    return x


def cost(problem: VarProblem, x) -> float:
    """Quadratic analysis cost: background misfit plus observation misfit.

    Nonnegative, and 0 exactly when x equals the background and maps onto
    the observations simultaneously.
    """
    x = _check_state(problem, x)
    dx = x - problem.background
    dy = problem.observations - problem.observation_operator @ x
    return float(dx @ problem.solve_background(dx) + dy @ problem.solve_observation(dy))


def grad_cost(problem: VarProblem, x) -> np.ndarray:
    """Gradient of :func:`cost`: 2 B^-1 dx - 2 H' R^-1 dy."""
    x = _check_state(problem, x)
    dx = x - problem.background
    dy = problem.observations - problem.observation_operator @ x
    return 2.0 * problem.solve_background(dx) - 2.0 * (
        problem.observation_operator.T @ problem.solve_observation(dy)
    )


@dataclass(frozen=True)
class AnalysisResult:
    state: np.ndarray
    iterations: int
    relative_residual: float


def solve_3dvar(problem: VarProblem, tol: float = 1e-12, max_iters: int = None) -> AnalysisResult:
    """Minimize the cost by conjugate gradients on the SPD normal system.

    Solves (B^-1 + H' R^-1 H) x = B^-1 x_b + H' R^-1 y_o, applying B and R
    only through solves against their factorizations.  Terminates when the
    residual norm falls to ``tol`` times the initial residual norm; raises
    with a residual report when ``max_iters`` is exhausted.
    """
    n = problem.state_dim
    if max_iters is None:
        max_iters = 20 * n + 200
    H = problem.observation_operator

    def apply(v):
        return problem.solve_background(v) + H.T @ problem.solve_observation(H @ v)

    rhs = problem.solve_background(problem.background) + H.T @ problem.solve_observation(
        problem.observations
    )
    x = problem.background.copy()
    r = rhs - apply(x)
    r0_norm = float(np.linalg.norm(r))
    if r0_norm == 0.0:
        return AnalysisResult(state=x, iterations=0, relative_residual=0.0)
    p = r.copy()
    rs = float(r @ r)
    for it in range(1, int(max_iters) + 1):
        Ap = apply(p)
        alpha = rs / float(p @ Ap)
        x = x + alpha * p
        r = r - alpha * Ap
        rs_new = float(r @ r)
        rel = math.sqrt(rs_new) / r0_norm
        if rel <= tol:
            return AnalysisResult(state=x, iterations=it, relative_residual=rel)
        p = r + (rs_new / rs) * p
        rs = rs_new
    raise NumericalError(
        "conjugate gradients exhausted %d iterations (relative residual %.3g)"
        % (max_iters, math.sqrt(rs) / r0_norm)
    )


def closed_form_analysis(problem: VarProblem) -> np.ndarray:
    """Dense closed-form analysis x_b + B H' (H B H' + R)^-1 (y_o - H x_b).

    The small-dimension oracle the iterative solver is verified against.
    """
    H = problem.observation_operator
    B = problem.background_covariance
    innovation_cov = H @ B @ H.T + problem.observation_covariance
    innovation = problem.observations - H @ problem.background
    gain = B @ H.T @ np.linalg.solve(innovation_cov, np.eye(problem.obs_dim))
    return problem.background + gain @ innovation


def enkf_update(ensemble, observations, observation_operator, observation_covariance, rng_seed):
    """Stochastic ensemble Kalman analysis update (perturbed observations).

    Each member moves by K (y + eta - H x) with eta ~ N(0, R) and
    K = P H' (H P H' + R)^-1, P the unbiased ensemble sample covariance.
    Deterministic for a fixed seed.  A zero-spread ensemble has K = 0 and
    passes through unchanged.
    """
    ens = np.array(ensemble, dtype=np.float64, copy=True)
    if ens.ndim != 2 or ens.shape[0] < 2:
        raise ModelValidationError("ensemble must be (members >= 2, state_dim)")
    members, n = ens.shape
    yo = np.asarray(observations, dtype=np.float64)
    H = np.asarray(observation_operator, dtype=np.float64)
    R = np.asarray(observation_covariance, dtype=np.float64)
    p = yo.shape[0]
    if H.shape != (p, n) or R.shape != (p, p):
        raise DimensionMismatchError("operator/covariance shapes do not match")

    sample_cov = np.atleast_2d(np.cov(ens, rowvar=False, ddof=1))
    innovation_cov = H @ sample_cov @ H.T + R
    try:
        factor = cho_factor(innovation_cov, lower=True)
    except LinAlgError:
        raise NumericalError("innovation covariance is singular") from None
    gain = cho_solve(factor, H @ sample_cov).T  # = P H' S^-1

    rng = np.random.default_rng(rng_seed)
    noise = rng.standard_normal((members, p)) @ psd_square_root(R).T
    innovations = yo[None, :] + noise - ens @ H.T
    return ens + innovations @ gain.T
