"""Ultraspherical (Gegenbauer) polynomial machinery.

Evaluation by three-term recurrence in the Szego normalization, the
unit-at-one normalization used for uniform bounds, Gauss quadrature for the
weight (1-x^2)^(lambda-1/2) on [-1, 1], and extraction of expansion
coefficients from an isotropic correlation function.

The circle case (sphere dimension 1, ``lam == 0``) is handled through the
cosine form T_n(x) = cos(n arccos x), which is the stable limit of the
degenerate recurrence.  Sphere dimension 2 gives the Legendre polynomials.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal

from . import _kernels
from .errors import DomainError, ModelValidationError

__all__ = [
    "GegenbauerBasis",
    "ExtractionResult",
    "eval_gegenbauer",
    "eval_normalized",
    "laplacian_eigenvalue",
    "gegenbauer_quadrature",
    "extract_coefficients",
    "expansion_function",
]

NEGATIVE_COEFF_TOL = 1e-10


@dataclass(frozen=True)
class GegenbauerBasis:
    """Polynomial family for the sphere S^d: index lam = (d - 1) / 2."""

    sphere_dim: int
    max_degree: int

    def __post_init__(self):
        if int(self.sphere_dim) != self.sphere_dim or self.sphere_dim < 1:
            raise ModelValidationError("sphere_dim must be an integer >= 1")
        if int(self.max_degree) != self.max_degree or self.max_degree < 0:
            raise ModelValidationError("max_degree must be an integer >= 0")
        object.__setattr__(self, "sphere_dim", int(self.sphere_dim))
        object.__setattr__(self, "max_degree", int(self.max_degree))

    @property
    def lam(self) -> float:
        return 0.5 * (self.sphere_dim - 1)


def _check_degree(basis: GegenbauerBasis, n: int) -> int:
    if int(n) != n or n < 0 or n > basis.max_degree:
        raise DomainError(
            "degree %r outside [0, %d]" % (n, basis.max_degree)
        )
    return int(n)


def _check_argument(x):
    arr = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if np.any(np.abs(arr) > 1.0 + 1e-14):
        raise DomainError("polynomial argument must lie in [-1, 1]")
    return np.clip(arr, -1.0, 1.0)


def eval_gegenbauer(basis: GegenbauerBasis, n: int, x):
    """Degree-n polynomial value(s) at x, Szego normalization.

    Legendre for sphere_dim == 2, Tchebycheff (cosine form) for
    sphere_dim == 1.  Scalar in, scalar out; array in, array out.
    """
    n = _check_degree(basis, n)
    arr = _check_argument(x)
    vals = _kernels.gegenbauer_table(basis.lam, n, arr)[:, n]
    return float(vals[0]) if np.isscalar(x) or np.ndim(x) == 0 else vals


def value_at_one(basis: GegenbauerBasis, n: int) -> float:
    """P_n at x = 1 (the normalizer of the unit-at-one form)."""
    n = _check_degree(basis, n)
    return float(_kernels.gegenbauer_table(basis.lam, n, np.array([1.0]))[0, n])


def eval_normalized(basis: GegenbauerBasis, n: int, x):
    """Unit-at-one normalization: polynomial value divided by its value at 1.

    Uniformly bounded by 1 in modulus on [-1, 1] for every degree.
    """
    n = _check_degree(basis, n)
    arr = _check_argument(x)
    table = _kernels.gegenbauer_table(basis.lam, n, np.concatenate([arr, [1.0]]))
    at_one = table[-1, n]
    if at_one == 0.0:
        raise DomainError("degree-%d polynomial vanishes at 1" % n)
    vals = table[:-1, n] / at_one
    return float(vals[0]) if np.isscalar(x) or np.ndim(x) == 0 else vals


def laplacian_eigenvalue(basis: GegenbauerBasis, n: int) -> float:
    """Eigenvalue -n(n + 2 lam) of the sphere Laplacian on degree-n harmonics."""
    if int(n) != n or n < 0:
        raise DomainError("degree must be a nonnegative integer")
    return -float(n) * (float(n) + 2.0 * basis.lam)


def weight_total_mass(basis: GegenbauerBasis) -> float:
    """Integral of (1-x^2)^(lam-1/2) over [-1, 1] (beta-function value)."""
    lam = basis.lam
    return math.sqrt(math.pi) * math.gamma(lam + 0.5) / math.gamma(lam + 1.0)


def gegenbauer_quadrature(basis: GegenbauerBasis, num_nodes: int):
    """Gauss nodes and weights on [-1, 1] for the weight (1-x^2)^(lam-1/2).

    Exact for polynomials of degree <= 2*num_nodes - 1.  Computed from the
    symmetric tridiagonal eigenproblem on the recurrence coefficients
    (Golub-Welsch); weights are positive and nodes strictly increasing
    inside (-1, 1).
    """
    if int(num_nodes) != num_nodes or num_nodes < 1:
        raise DomainError("num_nodes must be a positive integer")
    num_nodes = int(num_nodes)
    lam = basis.lam
    diag = np.zeros(num_nodes)
    if num_nodes > 1:
        off = np.empty(num_nodes - 1)
        off[0] = 1.0 / (2.0 * (lam + 1.0))
        k = np.arange(2.0, num_nodes)
        off[1:] = k * (k + 2.0 * lam - 1.0) / (4.0 * (k + lam) * (k + lam - 1.0))
        nodes, vecs = eigh_tridiagonal(diag, np.sqrt(off))
    else:
        nodes, vecs = np.zeros(1), np.ones((1, 1))
    weights = weight_total_mass(basis) * vecs[0, :] ** 2
    return nodes, weights


@dataclass(frozen=True)
class ExtractionResult:
    """Expansion coefficients recovered by quadrature.

    ``coefficients`` are the convex weights of the unit-at-one expansion
    g(x) = scale * sum_n a_n P_n(x)/P_n(1); ``negatives`` lists any entries
    below -1e-10 as (degree, value) pairs -- they are reported, never
    silently clipped, so callers can decide between rejection and clipping.
    """

    scale: float
    coefficients: np.ndarray
    negatives: tuple


def extract_coefficients(g, basis: GegenbauerBasis, num_nodes: int) -> ExtractionResult:
    """Recover expansion coefficients of ``g`` on [-1, 1] by Gauss quadrature.

    Raw projections b_n = <g, P_n>_w / <P_n, P_n>_w (both inner products by
    the same quadrature) are refolded into a scale c = sum_n b_n P_n(1) and
    convex weights a_n = b_n P_n(1) / c.  Requires num_nodes >= max_degree+1
    so the Gram diagonal is exact.
    """
    if num_nodes < basis.max_degree + 1:
        raise DomainError(
            "need at least max_degree + 1 = %d quadrature nodes" % (basis.max_degree + 1)
        )
    nodes, weights = gegenbauer_quadrature(basis, num_nodes)
    gvals = np.array([float(g(t)) for t in nodes])
    table = _kernels.gegenbauer_table(basis.lam, basis.max_degree, nodes)
    num = table.T @ (weights * gvals)
    den = np.einsum("ij,ij->j", table, weights[:, None] * table)
    raw = num / den
    at_one = _kernels.gegenbauer_table(basis.lam, basis.max_degree, np.array([1.0]))[0]
    scale = float(raw @ at_one)
    if scale <= 0.0:
        raise ModelValidationError("not a covariance candidate at this truncation")
    coeffs = raw * at_one / scale
    negatives = tuple(
        (int(n), float(coeffs[n]))
        for n in range(coeffs.shape[0])
        if coeffs[n] < -NEGATIVE_COEFF_TOL
    )
    return ExtractionResult(scale=scale, coefficients=coeffs, negatives=negatives)


def expansion_function(scale: float, coefficients, basis: GegenbauerBasis):
    """Callable g(x) = scale * sum_n coefficients[n] * P_n(x) / P_n(1).

    The synthesis side of :func:`extract_coefficients`: extracting from the
    returned function recovers ``(scale, coefficients)``.
    """
    coeffs = np.asarray(coefficients, dtype=np.float64)
    if coeffs.shape[0] - 1 > basis.max_degree:
        raise DomainError("coefficient list exceeds basis max_degree")
    nmax = coeffs.shape[0] - 1
    at_one = _kernels.gegenbauer_table(basis.lam, nmax, np.array([1.0]))[0]
    folded = scale * coeffs / at_one

    def g(x):
        arr = _check_argument(x)
        vals = _kernels.gegenbauer_table(basis.lam, nmax, arr) @ folded
        return float(vals[0]) if np.ndim(x) == 0 else vals

    return g
