"""Gaussian random field sampling at arbitrary sphere-time point sets.

Mean-zero draws with the model's covariance, by a symmetric-eigenvalue
square root of the Gram matrix.  Randomness comes from numpy's default
PCG64 generator; the master seed is split per draw through
``numpy.random.SeedSequence(seed).spawn``, so draw d is reproducible on its
own and independent of how many draws are requested -- draws can therefore
be generated in parallel without changing the output.
"""

from dataclasses import dataclass

import numpy as np

from .covariance import SpaceTimeModel, SphereFactor
from .errors import DomainError, NumericalError
from .geometry import SpaceTimePoint, SpherePoint
from .validation import build_gram

__all__ = [
    "EnsembleResult",
    "psd_square_root",
    "random_points",
    "sample_field",
    "enkf_ensemble",
]

EIGENVALUE_FLOOR_RTOL = 1e-8


def psd_square_root(matrix: np.ndarray) -> np.ndarray:
    """Factor L with L @ L.T equal to the PSD input.

    Symmetric eigendecomposition with small negative eigenvalues (round-off
    from an exactly singular Gram) clipped to zero; eigenvalues below
    -EIGENVALUE_FLOOR_RTOL * trace/n are treated as a genuine failure.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    eigvals, eigvecs = np.linalg.eigh(matrix)
    floor = -EIGENVALUE_FLOOR_RTOL * float(np.trace(matrix)) / matrix.shape[0]
    if eigvals[0] < floor:
        raise NumericalError(
            "matrix is not positive semidefinite (min eigenvalue %.3g)" % eigvals[0]
        )
    return eigvecs * np.sqrt(np.maximum(eigvals, 0.0))


def random_points(model: SpaceTimeModel, count: int, rng, time_scale: float = 1.0):
    """Random point set matching a model's factor structure.

    Sphere locations are uniform on each sphere (normalized Gaussians),
    times are standard normal scaled by ``time_scale``.
    """
    if int(count) != count or count < 1:
        raise DomainError("count must be a positive integer")
    points = []
    sphere_dims = [
        f.basis.sphere_dim for f in model.factors if isinstance(f, SphereFactor)
    ]
    for _ in range(int(count)):
        spheres = []
        for d in sphere_dims:
            v = rng.standard_normal(d + 1)
            spheres.append(SpherePoint(v / np.linalg.norm(v)))
        times = time_scale * rng.standard_normal(model.line_count)
        points.append(SpaceTimePoint(spheres=spheres, times=times))
    return points


def sample_field(
    model: SpaceTimeModel, points, num_draws: int, rng_seed: int
) -> np.ndarray:
    """Matrix of ``num_draws`` mean-zero Gaussian draws with the model's Gram.

    Row d is the d-th draw over the point list; deterministic for a fixed
    seed, and row d does not depend on num_draws.
    """
    if int(num_draws) != num_draws or num_draws < 1:
        raise DomainError("num_draws must be a positive integer")
    num_draws = int(num_draws)
    points = list(points)
    gram = build_gram(model, points)
    factor = psd_square_root(gram.entries)
    n = len(points)
    draws = np.empty((num_draws, n))
    children = np.random.SeedSequence(rng_seed).spawn(num_draws)
    for d in range(num_draws):
        z = np.random.default_rng(children[d]).standard_normal(n)
        draws[d] = factor @ z
    return draws


@dataclass(frozen=True)
class EnsembleResult:
    """Field ensemble plus its unbiased sample covariance."""

    ensemble: np.ndarray
    sample_covariance: np.ndarray


def enkf_ensemble(
    model: SpaceTimeModel, points, ensemble_size: int, rng_seed: int
) -> EnsembleResult:
    """Ensemble of field draws with the sample covariance that approximates
    the true Gram -- the Monte-Carlo covariance feeding the ensemble update."""
    if int(ensemble_size) != ensemble_size or ensemble_size < 2:
        raise DomainError("ensemble_size must be an integer >= 2")
    ensemble = sample_field(model, points, int(ensemble_size), rng_seed)
    sample_cov = np.atleast_2d(np.cov(ensemble, rowvar=False, ddof=1))
    return EnsembleResult(ensemble=ensemble, sample_covariance=sample_cov)
