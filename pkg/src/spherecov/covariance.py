"""Positive-definite covariance models on spheres and sphere-line products.

The building block is a convex mixture of ultraspherical polynomials (for a
single sphere), optionally damped per degree by characteristic functions of
time differences (sphere cross line), and in general a sparse convex
combination of separable factor products over any number of spheres and
lines.  The class is closed under pointwise products and convex
combinations, which :func:`separable_product` and :func:`convex_combine`
realize on the coefficient maps directly.

Also here: chordal (Yadrenko) restriction of Euclidean isotropic kernels to
the sphere together with its lower-bound diagnostic, discrete-spectral
Euclidean kernels, transport (Lagrangian) covariances by Monte Carlo, the
nugget term, index truncation, and range-based taper diagnostics.
"""

import json
import math
from collections.abc import Mapping
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import gamma as gamma_fn
from scipy.special import j0, j1, jv

from . import _kernels
from .errors import (
    DimensionMismatchError,
    DomainError,
    ModelValidationError,
)
from .geometry import SpaceTimePoint, geodesic_cosine
from .harmonics import GegenbauerBasis

__all__ = [
    "SchoenbergSequence",
    "TemporalFactor",
    "CauchyTemporal",
    "ConstantTemporal",
    "TableTemporal",
    "SphereFactor",
    "LineFactor",
    "SpaceTimeModel",
    "EuclideanSpectralModel",
    "TruncationResult",
    "TaperReport",
    "evaluate_series",
    "evaluate_space_time_series",
    "sequence_model",
    "sequence_space_time_model",
    "separable_product",
    "convex_combine",
    "yadrenko_lift",
    "gneiting_floor",
    "gneiting_minimizer",
    "lagrangian_covariance",
    "truncate_index",
    "taper_report",
    "model_to_dict",
    "model_from_dict",
    "save_model",
    "load_model",
]

WEIGHT_SUM_TOL = 1e-12


# --------------------------------------------------------------------------
# coefficient sequences
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SchoenbergSequence:
    """Scale c > 0 and convex weights a_0..a_N of an isotropic expansion."""

    scale: float
    coefficients: np.ndarray

    def __post_init__(self):
        scale = float(self.scale)
        if not math.isfinite(scale) or scale <= 0.0:
            raise ModelValidationError("scale must be finite and positive")
        coeffs = np.array(self.coefficients, dtype=np.float64, copy=True)
        if coeffs.ndim != 1 or coeffs.shape[0] == 0:
            raise ModelValidationError("coefficients must be a nonempty 1-d sequence")
        if not np.all(np.isfinite(coeffs)):
            raise ModelValidationError("coefficients must be finite")
        if np.any(coeffs < 0.0):
            raise ModelValidationError("coefficients must be nonnegative")
        total = float(coeffs.sum())
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise ModelValidationError(
                "coefficients must sum to 1 within %g (sum = %.17g)"
                % (WEIGHT_SUM_TOL, total)
            )
        coeffs.setflags(write=False)
        object.__setattr__(self, "scale", scale)
        object.__setattr__(self, "coefficients", coeffs)

    @property
    def max_degree(self) -> int:
        return self.coefficients.shape[0] - 1


# --------------------------------------------------------------------------
# temporal factors (characteristic functions of time differences)
# --------------------------------------------------------------------------

class TemporalFactor:
    """Characteristic function phi of a time difference, with phi(0) = 1."""

    def phi(self, t):
        raise NotImplementedError


@dataclass(frozen=True)
class CauchyTemporal(TemporalFactor):
    """phi(t) = exp(-|t| / scale), the Cauchy scale family."""

    scale: float

    def __post_init__(self):
        if not (math.isfinite(self.scale) and self.scale > 0.0):
            raise ModelValidationError("temporal scale must be finite and positive")
        object.__setattr__(self, "scale", float(self.scale))

    def phi(self, t):
        return np.exp(-np.abs(np.asarray(t, dtype=np.float64)) / self.scale)


@dataclass(frozen=True)
class ConstantTemporal(TemporalFactor):
    """phi identically 1: no temporal decay."""

    def phi(self, t):
        return np.ones_like(np.asarray(t, dtype=np.float64))


@dataclass(frozen=True)
class TableTemporal(TemporalFactor):
    """phi given on a grid of nonnegative lags, linearly interpolated.

    Evaluation uses |t| (stationary kernels are even in the lag).  Lags
    beyond the grid raise: the positive-definiteness of an extrapolated
    tail cannot be certified.
    """

    grid: tuple
    values: tuple

    def __init__(self, grid, values):
        grid = tuple(float(t) for t in grid)
        values = tuple(float(v) for v in values)
        if len(grid) < 2 or len(grid) != len(values):
            raise ModelValidationError("table needs >= 2 matching grid/value entries")
        if grid[0] != 0.0:
            raise ModelValidationError("table grid must start at lag 0")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ModelValidationError("table grid must be strictly increasing")
        if values[0] != 1.0:
            raise ModelValidationError("table must have phi(0) = 1")
        if any(abs(v) > 1.0 + 1e-12 for v in values):
            raise ModelValidationError("table values must satisfy |phi| <= 1")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_grid_arr", np.array(grid))
        object.__setattr__(self, "_values_arr", np.array(values))

    def phi(self, t):
        lag = np.abs(np.asarray(t, dtype=np.float64))
        if np.any(lag > self.grid[-1]):
            raise DomainError(
                "lag beyond table grid end %g; refusing to extrapolate" % self.grid[-1]
            )
        return np.interp(lag, self._grid_arr, self._values_arr)


def _resolve_temporal(assignment, index):
    if isinstance(assignment, TemporalFactor):
        return assignment
    try:
        return assignment[index]
    except KeyError:
        raise ModelValidationError(
            "no temporal factor assigned for index %d" % index
        ) from None


# --------------------------------------------------------------------------
# series evaluation (single sphere, sphere cross line)
# --------------------------------------------------------------------------

def _check_x(x):
    arr = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if np.any(np.abs(arr) > 1.0 + 1e-14):
        raise DomainError("cosine argument must lie in [-1, 1]")
    return np.clip(arr, -1.0, 1.0)


def evaluate_series(seq: SchoenbergSequence, basis: GegenbauerBasis, x):
    """Isotropic covariance on the sphere: scale * sum_n a_n P_n(x)."""
    if basis.max_degree < seq.max_degree:
        raise DimensionMismatchError(
            "basis max_degree %d below sequence degree %d"
            % (basis.max_degree, seq.max_degree)
        )
    arr = _check_x(x)
    table = _kernels.gegenbauer_table(basis.lam, seq.max_degree, arr)
    vals = seq.scale * (table @ seq.coefficients)
    return float(vals[0]) if np.ndim(x) == 0 else vals


def evaluate_space_time_series(seq, basis, temporal, x, t):
    """Sphere-cross-line covariance: scale * sum_n a_n P_n(x) phi_n(t).

    ``temporal`` is one TemporalFactor shared by every degree, or a mapping
    degree -> TemporalFactor.  Reduces to :func:`evaluate_series` at t = 0.
    """
    if basis.max_degree < seq.max_degree:
        raise DimensionMismatchError(
            "basis max_degree %d below sequence degree %d"
            % (basis.max_degree, seq.max_degree)
        )
    arrx = _check_x(x)
    arrt = np.atleast_1d(np.asarray(t, dtype=np.float64))
    arrx, arrt = np.broadcast_arrays(arrx, arrt)
    table = _kernels.gegenbauer_table(basis.lam, seq.max_degree, np.ravel(arrx))
    acc = np.zeros(table.shape[0])
    flat_t = np.ravel(arrt)
    for n, a_n in enumerate(seq.coefficients):
        if a_n == 0.0:
            continue
        phi = np.asarray(_resolve_temporal(temporal, n).phi(flat_t), dtype=np.float64)
        acc += a_n * table[:, n] * phi
    vals = seq.scale * acc.reshape(arrx.shape)
    if np.ndim(x) == 0 and np.ndim(t) == 0:
        return float(vals.reshape(-1)[0])
    return vals


# --------------------------------------------------------------------------
# product models
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SphereFactor:
    """A spherical factor with its polynomial family."""

    basis: GegenbauerBasis


@dataclass(frozen=True)
class LineFactor:
    """A (half-)line factor: time, height, or any other real coordinate."""


class SpaceTimeModel:
    """Sparse convex combination of separable covariances over factor products.

    ``coefficients`` maps multi-indices (one entry per factor, in factor
    order) to nonnegative weights summing to 1.  Sphere entries select the
    polynomial degree, line entries select which temporal factor phi_n
    applies.  ``temporal`` supplies, for each line factor in order, either a
    single shared :class:`TemporalFactor` or a mapping index -> factor
    covering every index used by the coefficients.

    The optional nugget adds extra variance at *exact* point coincidence
    only; whether that models measurement error or micro-scale variability
    is the caller's interpretation.

    Models are immutable after construction; evaluation is pure.

    ``allow_indefinite=True`` admits negative weights (sum-to-one still
    enforced) so that a suspect, hand-edited model can be *constructed* and
    then convicted spectrally by the validation module; every other
    operation keeps the nonnegativity invariant.
    """

    def __init__(
        self, factors, coefficients, scale, nugget=0.0, temporal=(), allow_indefinite=False
    ):
        factors = tuple(factors)
        if not factors:
            raise ModelValidationError("model needs at least one factor")
        for fac in factors:
            if not isinstance(fac, (SphereFactor, LineFactor)):
                raise ModelValidationError(
                    "factors must be SphereFactor or LineFactor instances"
                )
        scale = float(scale)
        if not (math.isfinite(scale) and scale > 0.0):
            raise ModelValidationError("scale must be finite and positive")
        nugget = float(nugget)
        if not (math.isfinite(nugget) and nugget >= 0.0):
            raise ModelValidationError("nugget must be finite and nonnegative")

        cleaned = {}
        for key, weight in dict(coefficients).items():
            key = tuple(int(k) for k in key)
            if len(key) != len(factors):
                raise ModelValidationError(
                    "multi-index %r does not match the %d factors" % (key, len(factors))
                )
            weight = float(weight)
            if not math.isfinite(weight) or (weight < 0.0 and not allow_indefinite):
                raise ModelValidationError("weights must be finite and nonnegative")
            for pos, (fac, idx) in enumerate(zip(factors, key)):
                if idx < 0:
                    raise ModelValidationError("multi-index entries must be >= 0")
                if isinstance(fac, SphereFactor) and idx > fac.basis.max_degree:
                    raise ModelValidationError(
                        "index %d exceeds max_degree %d of sphere factor %d"
                        % (idx, fac.basis.max_degree, pos)
                    )
            cleaned[key] = cleaned.get(key, 0.0) + weight
        if not cleaned:
            raise ModelValidationError("coefficient map must be nonempty")
        total = math.fsum(cleaned.values())
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise ModelValidationError(
                "weights must sum to 1 within %g (sum = %.17g)" % (WEIGHT_SUM_TOL, total)
            )

        line_positions = tuple(
            pos for pos, fac in enumerate(factors) if isinstance(fac, LineFactor)
        )
        temporal = tuple(temporal)
        if len(temporal) != len(line_positions):
            raise ModelValidationError(
                "need one temporal assignment per line factor (%d given, %d needed)"
                % (len(temporal), len(line_positions))
            )
        for slot, pos in enumerate(line_positions):
            assignment = temporal[slot]
            used = {key[pos] for key in cleaned}
            if isinstance(assignment, TemporalFactor):
                continue
            if isinstance(assignment, Mapping):
                for idx in used:
                    fac = _resolve_temporal(assignment, idx)
                    if not isinstance(fac, TemporalFactor):
                        raise ModelValidationError(
                            "temporal map entries must be TemporalFactor instances"
                        )
            else:
                raise ModelValidationError(
                    "temporal assignment must be a TemporalFactor or a mapping"
                )

        self._factors = factors
        self._coefficients = cleaned
        self._scale = scale
        self._nugget = nugget
        self._temporal = temporal
        self._line_positions = line_positions
        self._sphere_positions = tuple(
            pos for pos, fac in enumerate(factors) if isinstance(fac, SphereFactor)
        )
        keys = sorted(cleaned)
        self._index_matrix = np.array(keys, dtype=np.int64).reshape(len(keys), len(factors))
        self._weights = np.array([cleaned[k] for k in keys])

    # -- read-only views ---------------------------------------------------

    @property
    def factors(self):
        return self._factors

    @property
    def coefficients(self):
        return dict(self._coefficients)

    @property
    def scale(self):
        return self._scale

    @property
    def nugget(self):
        return self._nugget

    @property
    def temporal(self):
        return self._temporal

    @property
    def sphere_count(self):
        return len(self._sphere_positions)

    @property
    def line_count(self):
        return len(self._line_positions)

    def __repr__(self):
        return "SpaceTimeModel(%d factors, %d terms, scale=%g, nugget=%g)" % (
            len(self._factors),
            self._index_matrix.shape[0],
            self._scale,
            self._nugget,
        )

    # -- evaluation --------------------------------------------------------

    def _check_point(self, p: SpaceTimePoint):
        if len(p.spheres) != self.sphere_count or len(p.times) != self.line_count:
            raise DimensionMismatchError(
                "point has %d sphere / %d time entries, model expects %d / %d"
                % (len(p.spheres), len(p.times), self.sphere_count, self.line_count)
            )
        for s, pos in enumerate(self._sphere_positions):
            want = self._factors[pos].basis.sphere_dim
            if p.spheres[s].dim != want:
                raise DimensionMismatchError(
                    "sphere factor %d expects dimension %d, point has %d"
                    % (s, want, p.spheres[s].dim)
                )

    def _point_arrays(self, points):
        for p in points:
            self._check_point(p)
        sphere_arrays = [
            np.array([p.spheres[s].coords for p in points])
            for s in range(self.sphere_count)
        ]
        times = np.array([p.times for p in points], dtype=np.float64).reshape(
            len(points), self.line_count
        )
        return sphere_arrays, times

    def _mixture_values(self, cos_cols, dt_cols):
        """Core mixture sum over flattened separation columns (no nugget)."""
        blocks = []
        col_maps = []
        offset = 0
        si = 0
        li = 0
        for pos, fac in enumerate(self._factors):
            degs = self._index_matrix[:, pos]
            if isinstance(fac, SphereFactor):
                maxdeg = int(degs.max())
                table = _kernels.gegenbauer_table(fac.basis.lam, maxdeg, cos_cols[si])
                blocks.append(table)
                col_maps.append({n: offset + n for n in range(maxdeg + 1)})
                offset += maxdeg + 1
                si += 1
            else:
                assignment = self._temporal[li]
                used = sorted({int(n) for n in degs})
                dt = dt_cols[li]
                if isinstance(assignment, TemporalFactor):
                    col = np.asarray(assignment.phi(dt), dtype=np.float64)
                    blocks.append(col.reshape(-1, 1))
                    col_maps.append({n: offset for n in used})
                    offset += 1
                else:
                    mat = np.empty((dt.shape[0], len(used)))
                    cmap = {}
                    for k, n in enumerate(used):
                        mat[:, k] = _resolve_temporal(assignment, n).phi(dt)
                        cmap[n] = offset + k
                    blocks.append(mat)
                    col_maps.append(cmap)
                    offset += len(used)
                li += 1
        tables = blocks[0] if len(blocks) == 1 else np.concatenate(blocks, axis=1)
        colmat = np.empty_like(self._index_matrix)
        for pos in range(len(self._factors)):
            cmap = col_maps[pos]
            colmat[:, pos] = [cmap[int(n)] for n in self._index_matrix[:, pos]]
        return self._scale * _kernels.weighted_product_sum(
            tables, colmat, self._weights
        )

    def covariance_cross(self, points_a, points_b) -> np.ndarray:
        """Covariance matrix between two point lists, shape (len(a), len(b))."""
        points_a = list(points_a)
        points_b = list(points_b)
        sa, ta = self._point_arrays(points_a)
        sb, tb = self._point_arrays(points_b)
        na, nb = len(points_a), len(points_b)
        cos_cols = [
            np.clip(A @ B.T, -1.0, 1.0).ravel() for A, B in zip(sa, sb)
        ]
        dt_cols = [
            (ta[:, j][:, None] - tb[:, j][None, :]).ravel()
            for j in range(self.line_count)
        ]
        vals = self._mixture_values(cos_cols, dt_cols).reshape(na, nb)
        if self._nugget > 0.0:
            mask = np.ones((na, nb), dtype=bool)
            for A, B in zip(sa, sb):
                mask &= (A[:, None, :] == B[None, :, :]).all(axis=2)
            for j in range(self.line_count):
                mask &= ta[:, j][:, None] == tb[:, j][None, :]
            vals = vals + self._nugget * mask
        return vals

    def covariance_pairs(self, points_a, points_b) -> np.ndarray:
        """Elementwise covariance of paired points (equal-length lists)."""
        points_a = list(points_a)
        points_b = list(points_b)
        if len(points_a) != len(points_b):
            raise DimensionMismatchError("paired point lists must have equal length")
        sa, ta = self._point_arrays(points_a)
        sb, tb = self._point_arrays(points_b)
        cos_cols = [
            np.clip(np.einsum("ij,ij->i", A, B), -1.0, 1.0) for A, B in zip(sa, sb)
        ]
        dt_cols = [ta[:, j] - tb[:, j] for j in range(self.line_count)]
        vals = self._mixture_values(cos_cols, dt_cols)
        if self._nugget > 0.0:
            mask = np.ones(len(points_a), dtype=bool)
            for A, B in zip(sa, sb):
                mask &= (A == B).all(axis=1)
            for j in range(self.line_count):
                mask &= ta[:, j] == tb[:, j]
            vals = vals + self._nugget * mask
        return vals

    def covariance(self, p: SpaceTimePoint, q: SpaceTimePoint) -> float:
        """Covariance between two space-time points (nugget at coincidence)."""
        return float(self.covariance_pairs([p], [q])[0])

    def covariance_matrix(self, points) -> np.ndarray:
        """Symmetric covariance matrix over one point list."""
        vals = self.covariance_cross(points, points)
        return 0.5 * (vals + vals.T)

    def separation_values(self, cosines=(), lags=()) -> np.ndarray:
        """Evaluate on raw separation arguments instead of points.

        ``cosines``: one array per sphere factor (geodesic cosines in
        [-1, 1]); ``lags``: one array per line factor (time differences).
        The nugget contributes where every cosine is exactly 1 and every
        lag exactly 0.
        """
        cosines = [_check_x(c) for c in cosines]
        lags = [np.atleast_1d(np.asarray(t, dtype=np.float64)) for t in lags]
        if len(cosines) != self.sphere_count or len(lags) != self.line_count:
            raise DimensionMismatchError(
                "expected %d cosine and %d lag columns"
                % (self.sphere_count, self.line_count)
            )
        lengths = {c.shape[0] for c in cosines} | {t.shape[0] for t in lags}
        if len(lengths) != 1:
            raise DimensionMismatchError("separation columns must share one length")
        vals = self._mixture_values(cosines, lags)
        if self._nugget > 0.0:
            mask = np.ones(lengths.pop(), dtype=bool)
            for c in cosines:
                mask &= c == 1.0
            for t in lags:
                mask &= t == 0.0
            vals = vals + self._nugget * mask
        return vals


def sequence_model(seq: SchoenbergSequence, basis: GegenbauerBasis, nugget=0.0):
    """Single-sphere model realizing an isotropic series."""
    coeffs = {(n,): float(a) for n, a in enumerate(seq.coefficients) if a > 0.0}
    return SpaceTimeModel(
        factors=[SphereFactor(basis)],
        coefficients=coeffs,
        scale=seq.scale,
        nugget=nugget,
    )


def sequence_space_time_model(seq, basis, temporal, nugget=0.0):
    """Sphere-cross-line model with per-degree temporal factors phi_n."""
    coeffs = {(n, n): float(a) for n, a in enumerate(seq.coefficients) if a > 0.0}
    return SpaceTimeModel(
        factors=[SphereFactor(basis), LineFactor()],
        coefficients=coeffs,
        scale=seq.scale,
        nugget=nugget,
        temporal=(temporal,),
    )


def separable_product(m1: SpaceTimeModel, m2: SpaceTimeModel) -> SpaceTimeModel:
    """Pointwise (Schur) product of two models on the concatenated factors.

    Both operands must be nugget-free: a nugget only fires at *joint*
    coincidence, so the product of models with nuggets is not representable
    in this form.  Add any nugget to the returned model instead.
    """
    if m1.nugget != 0.0 or m2.nugget != 0.0:
        raise ModelValidationError(
            "separable_product requires nugget-free operands; add the nugget afterwards"
        )
    coeffs = {}
    for k1, w1 in m1.coefficients.items():
        for k2, w2 in m2.coefficients.items():
            coeffs[k1 + k2] = w1 * w2
    return SpaceTimeModel(
        factors=m1.factors + m2.factors,
        coefficients=coeffs,
        scale=m1.scale * m2.scale,
        nugget=0.0,
        temporal=m1.temporal + m2.temporal,
    )


def convex_combine(models, weights) -> SpaceTimeModel:
    """Convex combination of models sharing identical factor structure.

    Evaluation of the result equals the weighted sum of member evaluations.
    Factor tuples and temporal assignments must agree exactly; merging
    distinct temporal families under one index map has no closed form.
    """
    models = list(models)
    weights = np.asarray(weights, dtype=np.float64)
    if not models:
        raise ModelValidationError("need at least one model")
    if weights.shape != (len(models),):
        raise ModelValidationError("one weight per model required")
    if np.any(weights < 0.0) or not np.all(np.isfinite(weights)):
        raise ModelValidationError("weights must be finite and nonnegative")
    if abs(float(weights.sum()) - 1.0) > WEIGHT_SUM_TOL:
        raise ModelValidationError("weights must sum to 1 within %g" % WEIGHT_SUM_TOL)
    head = models[0]
    for m in models[1:]:
        if m.factors != head.factors:
            raise DimensionMismatchError("models must share an identical factor tuple")
        if m.temporal != head.temporal:
            raise DimensionMismatchError(
                "models must share identical temporal assignments"
            )
    combined = {}
    for m, w in zip(models, weights):
        if w == 0.0:
            continue
        for key, a in m.coefficients.items():
            combined[key] = combined.get(key, 0.0) + w * m.scale * a
    new_scale = math.fsum(combined.values())
    new_coeffs = {k: v / new_scale for k, v in combined.items()}
    new_nugget = float(np.dot(weights, [m.nugget for m in models]))
    return SpaceTimeModel(
        factors=head.factors,
        coefficients=new_coeffs,
        scale=new_scale,
        nugget=new_nugget,
        temporal=head.temporal,
    )


# --------------------------------------------------------------------------
# chordal restriction from Euclidean space, and its floor
# --------------------------------------------------------------------------

def yadrenko_lift(f, theta):
    """Restrict a Euclidean isotropic kernel to the sphere: f(2 sin(theta/2)).

    ``theta`` is the geodesic angle in [0, pi]; the argument handed to ``f``
    is the chordal distance.
    """
    th = np.asarray(theta, dtype=np.float64)
    if np.any(th < 0.0) or np.any(th > math.pi + 1e-15):
        raise DomainError("angle must lie in [0, pi]")
    arg = 2.0 * np.sin(th / 2.0)
    if th.ndim == 0:
        return float(f(float(arg)))
    return np.array([float(f(float(a))) for a in arg.ravel()]).reshape(th.shape)


def _radial_kernel(dim, z):
    """Normalized radial Bessel kernel with limit 1 at z = 0."""
    z = np.asarray(z, dtype=np.float64)
    if dim == 2:
        return np.sinc(z / math.pi)  # sin(z)/z
    if dim == 1:
        return j0(z)
    out = np.ones_like(z)
    nz = z != 0.0
    if dim == 3:
        out[nz] = 2.0 * j1(z[nz]) / z[nz]
    else:
        nu = 0.5 * (dim - 1.0)
        out[nz] = gamma_fn(nu + 1.0) * (2.0 / z[nz]) ** nu * jv(nu, z[nz])
    return out


@dataclass(frozen=True)
class EuclideanSpectralModel:
    """Isotropic Euclidean kernel from a discrete spectral measure.

    ``dim`` is the sphere dimension d the kernel is meant to be lifted to
    (the ambient Euclidean space is R^(d+1)); atoms are radial frequencies
    with positive masses summing to 1, so the kernel equals 1 at the
    origin.  dims 1..3 use the closed half-integer forms, higher dims the
    general Bessel formula.
    """

    dim: int
    atoms: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise ModelValidationError("dim must be an integer >= 1")
        atoms = np.array(self.atoms, dtype=np.float64, copy=True)
        masses = np.array(self.masses, dtype=np.float64, copy=True)
        if atoms.ndim != 1 or atoms.shape != masses.shape or atoms.shape[0] == 0:
            raise ModelValidationError("atoms and masses must be matching 1-d arrays")
        if np.any(atoms <= 0.0) or not np.all(np.isfinite(atoms)):
            raise ModelValidationError("atoms must be finite and positive")
        if np.any(masses <= 0.0) or not np.all(np.isfinite(masses)):
            raise ModelValidationError("masses must be finite and positive")
        if abs(float(masses.sum()) - 1.0) > WEIGHT_SUM_TOL:
            raise ModelValidationError("masses must sum to 1 within %g" % WEIGHT_SUM_TOL)
        atoms.setflags(write=False)
        masses.setflags(write=False)
        object.__setattr__(self, "dim", int(self.dim))
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "masses", masses)

    def evaluate(self, t):
        """Kernel value at Euclidean distance(s) t >= 0; equals 1 at t = 0."""
        arr = np.atleast_1d(np.asarray(t, dtype=np.float64))
        if np.any(arr < 0.0):
            raise DomainError("distance must be nonnegative")
        vals = np.zeros_like(arr)
        for r, m in zip(self.atoms, self.masses):
            vals += m * _radial_kernel(self.dim, r * arr)
        return float(vals[0]) if np.ndim(t) == 0 else vals


def gneiting_minimizer(dim: int) -> float:
    """Location t* > 0 of the minimum of sin(t)/t (satisfies tan t* = t*)."""
    if dim != 2:
        raise DomainError("floor is only computed for sphere dimension 2")
    return float(
        brentq(
            lambda t: t * math.cos(t) - math.sin(t),
            math.pi,
            1.5 * math.pi,
            xtol=1e-14,
            rtol=8.9e-16,
        )
    )


def gneiting_floor(dim: int) -> float:
    """inf over t > 0 of sin(t)/t: the chordal-restriction lower bound (~ -0.2172).

    Every kernel obtained by :func:`yadrenko_lift` of a valid Euclidean
    isotropic kernel with dim = 2 stays above this value.
    """
    t_star = gneiting_minimizer(dim)
    return math.sin(t_star) / t_star


# --------------------------------------------------------------------------
# transport (Lagrangian) covariance
# --------------------------------------------------------------------------

def lagrangian_covariance(spatial, velocity_sampler, h, t, num_samples, rng_seed):
    """Monte-Carlo covariance of a field advected by a random velocity.

    Averages spatial(h - t * V) over ``num_samples`` draws V from
    ``velocity_sampler(rng)``; deterministic for a fixed seed.  A constant
    sampler reproduces the prevailing-wind case exactly.
    """
    if int(num_samples) != num_samples or num_samples < 1:
        raise DomainError("num_samples must be a positive integer")
    rng = np.random.default_rng(rng_seed)
    h = np.asarray(h, dtype=np.float64)
    t = float(t)
    acc = 0.0
    for _ in range(int(num_samples)):
        v = np.asarray(velocity_sampler(rng), dtype=np.float64)
        acc += float(spatial(h - t * v))
    return acc / float(num_samples)


# --------------------------------------------------------------------------
# truncation and taper diagnostics
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TruncationResult:
    """Truncated model plus the coefficient mass that was dropped."""

    model: SpaceTimeModel
    dropped_mass: float


def truncate_index(model: SpaceTimeModel, max_degrees) -> TruncationResult:
    """Drop multi-indices exceeding per-factor bounds.

    Surviving weights are renormalized to sum to 1 and the scale is
    multiplied by the kept mass, so each kept term's contribution -- and in
    particular the truncated series' value at zero separation -- is
    preserved exactly.  The dropped mass is reported, never hidden.
    """
    bounds = tuple(int(b) for b in max_degrees)
    if len(bounds) != len(model.factors):
        raise DimensionMismatchError("need one degree bound per factor")
    if any(b < 0 for b in bounds):
        raise DomainError("degree bounds must be >= 0")
    kept = {
        key: w
        for key, w in model.coefficients.items()
        if all(k <= b for k, b in zip(key, bounds))
    }
    kept_mass = math.fsum(kept.values())
    if not kept or kept_mass <= 0.0:
        raise ModelValidationError("truncation would drop all coefficient mass")
    new_coeffs = {k: w / kept_mass for k, w in kept.items()}
    truncated = SpaceTimeModel(
        factors=model.factors,
        coefficients=new_coeffs,
        scale=model.scale * kept_mass,
        nugget=model.nugget,
        temporal=model.temporal,
    )
    return TruncationResult(model=truncated, dropped_mass=1.0 - kept_mass)


@dataclass(frozen=True)
class TaperReport:
    """Which pairs fall inside a spatial/temporal range, and what was cut.

    ``max_excluded_abs_covariance`` bounds what a neighborhood truncation at
    (x_min, t_max) throws away; it is 0 when nothing is excluded.
    """

    in_range: np.ndarray
    excluded_count: int
    max_excluded_abs_covariance: float


def taper_report(model: SpaceTimeModel, pairs, x_min: float, t_max: float) -> TaperReport:
    """Flag the pairs with every cosine >= x_min and every |lag| <= t_max.

    Feeds spatial/temporal truncation decisions upstream (kriging
    neighborhoods): the report carries the largest absolute covariance among
    the excluded pairs.
    """
    x_min = float(x_min)
    if not -1.0 <= x_min <= 1.0:
        raise DomainError("x_min must lie in [-1, 1]")
    t_max = float(t_max)
    if not t_max > 0.0:
        raise DomainError("t_max must be positive")
    pairs = list(pairs)
    ps = [p for p, _ in pairs]
    qs = [q for _, q in pairs]
    in_range = np.ones(len(pairs), dtype=bool)
    for i, (p, q) in enumerate(pairs):
        model._check_point(p)
        model._check_point(q)
        for sp, sq in zip(p.spheres, q.spheres):
            if geodesic_cosine(sp, sq) < x_min:
                in_range[i] = False
        for tp, tq in zip(p.times, q.times):
            if abs(tp - tq) > t_max:
                in_range[i] = False
    excluded = ~in_range
    if excluded.any():
        vals = model.covariance_pairs(
            [p for p, keep in zip(ps, in_range) if not keep],
            [q for q, keep in zip(qs, in_range) if not keep],
        )
        max_abs = float(np.max(np.abs(vals)))
    else:
        max_abs = 0.0
    return TaperReport(
        in_range=in_range,
        excluded_count=int(excluded.sum()),
        max_excluded_abs_covariance=max_abs,
    )


# --------------------------------------------------------------------------
# serialization (JSON-compatible structured text)
# --------------------------------------------------------------------------

def _temporal_factor_to_dict(factor: TemporalFactor) -> dict:
    if isinstance(factor, CauchyTemporal):
        return {"kind": "cauchy", "scale": factor.scale}
    if isinstance(factor, ConstantTemporal):
        return {"kind": "constant"}
    if isinstance(factor, TableTemporal):
        return {"kind": "table", "t": list(factor.grid), "phi": list(factor.values)}
    raise ModelValidationError("unknown temporal factor %r" % (factor,))


def _temporal_factor_from_dict(d: dict) -> TemporalFactor:
    kind = d.get("kind")
    if kind == "cauchy":
        return CauchyTemporal(scale=float(d["scale"]))
    if kind == "constant":
        return ConstantTemporal()
    if kind == "table":
        return TableTemporal(grid=d["t"], values=d["phi"])
    raise ModelValidationError("unknown temporal factor kind %r" % (kind,))


def _assignment_to_dict(assignment) -> dict:
    if isinstance(assignment, TemporalFactor):
        return _temporal_factor_to_dict(assignment)
    return {
        "kind": "per_index",
        "factors": {
            str(idx): _temporal_factor_to_dict(fac)
            for idx, fac in sorted(assignment.items())
        },
    }


def _assignment_from_dict(d: dict):
    if d.get("kind") == "per_index":
        return {
            int(idx): _temporal_factor_from_dict(fac)
            for idx, fac in d["factors"].items()
        }
    return _temporal_factor_from_dict(d)


def model_to_dict(model: SpaceTimeModel) -> dict:
    """JSON-compatible representation; lossless for double-precision inputs."""
    factors = []
    for fac in model.factors:
        if isinstance(fac, SphereFactor):
            factors.append(
                {
                    "kind": "sphere",
                    "dimension": fac.basis.sphere_dim,
                    "max_degree": fac.basis.max_degree,
                }
            )
        else:
            factors.append({"kind": "line"})
    coefficients = [
        [list(key), w] for key, w in sorted(model.coefficients.items())
    ]
    return {
        "factors": factors,
        "coefficients": coefficients,
        "scale": model.scale,
        "nugget": model.nugget,
        "temporal": [_assignment_to_dict(a) for a in model.temporal],
    }


def model_from_dict(d: dict, allow_indefinite: bool = False) -> SpaceTimeModel:
    try:
        factors = []
        for fd in d["factors"]:
            kind = fd.get("kind")
            if kind == "sphere":
                factors.append(
                    SphereFactor(
                        GegenbauerBasis(
                            sphere_dim=int(fd["dimension"]),
                            max_degree=int(fd["max_degree"]),
                        )
                    )
                )
            elif kind == "line":
                factors.append(LineFactor())
            else:
                raise ModelValidationError("unknown factor kind %r" % (kind,))
        coefficients = {tuple(key): float(w) for key, w in d["coefficients"]}
        temporal = tuple(_assignment_from_dict(a) for a in d.get("temporal", []))
        return SpaceTimeModel(
            factors=factors,
            coefficients=coefficients,
            scale=float(d["scale"]),
            nugget=float(d.get("nugget", 0.0)),
            temporal=temporal,
            allow_indefinite=allow_indefinite,
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ModelValidationError):
            raise
        raise ModelValidationError("malformed model document: %s" % exc) from None


def save_model(model: SpaceTimeModel, path, extra=None):
    """Write a model document; ``extra`` merges additional top-level keys
    (e.g. a provenance block) into the JSON."""
    doc = model_to_dict(model)
    if extra:
        doc.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path, allow_indefinite: bool = False) -> SpaceTimeModel:
    """Read a model document; unknown top-level keys are ignored."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelValidationError("invalid model file: %s" % exc) from None
    return model_from_dict(doc, allow_indefinite=allow_indefinite)
