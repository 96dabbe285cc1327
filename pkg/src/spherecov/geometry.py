"""Points on unit spheres and sphere-line products, and lat/lon/time ingestion.

Locations live on S^d embedded in R^(d+1) as unit vectors; separations are
measured by the geodesic (great-circle) distance or, equivalently, by its
cosine, which is the natural argument of the covariance expansions in
:mod:`spherecov.covariance`.  All values here are immutable after
construction and safe to share across threads.
"""

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, DomainError, IngestError, ModelValidationError

UNIT_NORM_TOL = 1e-12


@dataclass(frozen=True)
class SpherePoint:
    """A point on the unit sphere S^d, stored as a unit vector in R^(d+1)."""

    coords: np.ndarray

    def __post_init__(self):
        coords = np.array(self.coords, dtype=np.float64, copy=True)
        if coords.ndim != 1 or coords.shape[0] < 2:
            raise ModelValidationError(
                "sphere point needs at least 2 coordinates (d >= 1), got shape %s"
                % (coords.shape,)
            )
        if not np.all(np.isfinite(coords)):
            raise ModelValidationError("sphere point coordinates must be finite")
        norm = np.linalg.norm(coords)
        if abs(norm - 1.0) > UNIT_NORM_TOL:
            raise ModelValidationError(
                "sphere point must have unit norm within %g (norm = %.17g)"
                % (UNIT_NORM_TOL, norm)
            )
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)

    @property
    def dim(self) -> int:
        """Sphere dimension d (ambient space is R^(d+1))."""
        return self.coords.shape[0] - 1


@dataclass(frozen=True)
class SpaceTimePoint:
    """A point on a product of spheres and lines: sphere locations plus times.

    ``times`` are raw real scalars; the library is unit-agnostic, and any
    calendar handling is the caller's business.
    """

    spheres: tuple
    times: tuple

    def __init__(self, spheres=(), times=()):
        spheres = tuple(spheres)
        for p in spheres:
            if not isinstance(p, SpherePoint):
                raise ModelValidationError("spheres must contain SpherePoint values")
        times = tuple(float(t) for t in times)
        for t in times:
            if not math.isfinite(t):
                raise ModelValidationError("times must be finite")
        object.__setattr__(self, "spheres", spheres)
        object.__setattr__(self, "times", times)


@dataclass(frozen=True)
class ObservationRecord:
    """One lat/lon/time/value data row (angles in degrees)."""

    lat: float
    lon: float
    t: float
    value: float

    def __post_init__(self):
        object.__setattr__(self, "lat", float(self.lat))
        object.__setattr__(self, "lon", float(self.lon))
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "value", float(self.value))
        if not -90.0 <= self.lat <= 90.0:
            raise ModelValidationError("latitude %r outside [-90, 90]" % (self.lat,))
        if not -180.0 < self.lon <= 180.0:
            raise ModelValidationError("longitude %r outside (-180, 180]" % (self.lon,))
        if not math.isfinite(self.t):
            raise ModelValidationError("time must be finite")
        if not math.isfinite(self.value):
            raise ModelValidationError("value must be finite")

    def location(self) -> SpherePoint:
        return from_lat_lon(self.lat, self.lon)


def geodesic_cosine(p: SpherePoint, q: SpherePoint) -> float:
    """Cosine of the geodesic distance between two points on the same sphere.

    Returns the dot product of the unit vectors, clamped to [-1, 1] to guard
    floating-point overshoot at coincident or antipodal points.
    """
    if p.dim != q.dim:
        raise DimensionMismatchError(
            "points live on spheres of different dimension (%d vs %d)" % (p.dim, q.dim)
        )
    if p.coords is q.coords or np.array_equal(p.coords, q.coords):
        return 1.0  # dot(u, u) can round below 1; coincidence is exact
    return float(min(1.0, max(-1.0, float(np.dot(p.coords, q.coords)))))


def geodesic_distance(p: SpherePoint, q: SpherePoint) -> float:
    """Geodesic (great-circle) distance in [0, pi] on the unit sphere."""
    return math.acos(geodesic_cosine(p, q))


def from_lat_lon(lat: float, lon: float) -> SpherePoint:
    """Geographic degrees to a point on S^2.

    Convention: 0 deg longitude is the +x axis, 90 deg E the +y axis, the
    north pole +z.
    """
    lat = float(lat)
    lon = float(lon)
    if not -90.0 <= lat <= 90.0:
        raise DomainError("latitude %r outside [-90, 90]" % (lat,))
    phi = math.radians(lat)
    lam = math.radians(lon)
    return SpherePoint(
        np.array(
            [math.cos(phi) * math.cos(lam), math.cos(phi) * math.sin(lam), math.sin(phi)]
        )
    )


_CSV_HEADER = ["lat", "lon", "t", "value"]


def ingest_csv(stream) -> list:
    """Parse a ``lat,lon,t,value`` CSV into validated observation records.

    Accepts a text or UTF-8 byte stream.  Row order is preserved; any
    malformed or out-of-range row raises :class:`IngestError` naming the
    offending line (the header is line 1).
    """
    if isinstance(stream, (bytes, bytearray)):
        stream = io.BytesIO(stream)
    if hasattr(stream, "read") and isinstance(stream.read(0), bytes):
        stream = io.TextIOWrapper(stream, encoding="utf-8")
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise IngestError("empty input: expected header 'lat,lon,t,value'") from None
    if [h.strip() for h in header] != _CSV_HEADER:
        raise IngestError(
            "line 1: expected header 'lat,lon,t,value', got %r" % (",".join(header),)
        )
    records = []
    for lineno, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != 4:
            raise IngestError("line %d: expected 4 fields, got %d" % (lineno, len(row)))
        try:
            fields = [float(v) for v in row]
        except ValueError as exc:
            raise IngestError("line %d: %s" % (lineno, exc)) from None
        try:
            records.append(ObservationRecord(*fields))
        except ModelValidationError as exc:
            raise IngestError("line %d: %s" % (lineno, exc)) from None
    return records
