"""Coordinate frames and geodetic conversions.

The transform chain from a capture-frame pose to a simulated GPS fix:

    capture --(FrameMapping, signed permutation)--> NED
    NED <--> ENU            (n, e, d) <-> (e, n, -d)
    ENU --(tangent plane at origin)--> ECEF --> geodetic (WGS84)

Local points carry an explicit frame tag; mixing frames is an error, never
a silent mis-rotation.  All functions here are pure and safe to call from
any thread.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

from .ingest import Quat, Vec3

EARTH_SEMI_MAJOR_M = 6378137.0
EARTH_FLATTENING = 1.0 / 298.257223563

# Below this horizontal speed the course over ground is undefined in practice.
COG_SPEED_THRESHOLD_MS = 0.05

INT16_MIN, INT16_MAX = -32768, 32767


class GeodesyError(Exception):
    pass


class FrameMismatch(GeodesyError):
    pass


class NonConvergence(GeodesyError):
    pass


class Overflow(GeodesyError):
    pass


class Frame(Enum):
    CAPTURE = "capture"
    NED = "ned"
    ENU = "enu"


@dataclass(frozen=True, slots=True)
class LocalPoint:
    """A 3-vector in meters, tagged with the frame it lives in."""

    xyz: Vec3
    frame: Frame

    def require(self, frame: Frame) -> "LocalPoint":
        if self.frame is not frame:
            raise FrameMismatch(f"expected a {frame.value} point, got {self.frame.value}")
        return self


@dataclass(frozen=True, slots=True)
class GeodeticPoint:
    """WGS84 geodetic coordinates; altitude is height above the ellipsoid."""

    latitude_deg: float
    longitude_deg: float
    altitude_m: float

    def __post_init__(self) -> None:
        if not -90.0 <= self.latitude_deg <= 90.0:
            raise ValueError(f"latitude {self.latitude_deg} outside [-90, 90]")
        lon = (self.longitude_deg + 180.0) % 360.0 - 180.0
        if lon == -180.0:
            lon = 180.0
        object.__setattr__(self, "longitude_deg", lon)


@dataclass(frozen=True, slots=True)
class EllipsoidParams:
    """Reference ellipsoid; defaults are the WGS84 defining constants."""

    semi_major_axis_m: float = EARTH_SEMI_MAJOR_M
    flattening: float = EARTH_FLATTENING

    def __post_init__(self) -> None:
        if self.semi_major_axis_m <= 0:
            raise ValueError("semi-major axis must be > 0")
        if not 0.0 < self.flattening < 1.0:
            raise ValueError("flattening must be within (0, 1)")

    @property
    def e2(self) -> float:
        """First eccentricity squared, f * (2 - f)."""
        return self.flattening * (2.0 - self.flattening)

    @property
    def semi_minor_axis_m(self) -> float:
        return self.semi_major_axis_m * (1.0 - self.flattening)


WGS84 = EllipsoidParams()


class FrameMapping:
    """Signed permutation taking capture-frame axes into NED axes.

    Must be a proper rotation (determinant +1): the capture frame is
    right-handed and so is NED, so any valid axis relabeling preserves
    handedness.  Rows are (N, E, D) expressed in capture coordinates.
    """

    def __init__(self, rows: Sequence[Sequence[int]]) -> None:
        m = [[int(v) for v in row] for row in rows]
        if len(m) != 3 or any(len(r) != 3 for r in m):
            raise ValueError("mapping must be 3x3")
        for r in m:
            if sorted(abs(v) for v in r) != [0, 0, 1]:
                raise ValueError(f"row {r} is not a signed unit row")
        cols = [[m[i][j] for i in range(3)] for j in range(3)]
        for c in cols:
            if sorted(abs(v) for v in c) != [0, 0, 1]:
                raise ValueError("mapping columns must each contain exactly one nonzero entry")
        det = (
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        )
        if det != 1:
            raise ValueError(f"mapping determinant is {det}, must be +1 (proper rotation)")
        self.rows = tuple(tuple(r) for r in m)
        # (source index, sign) per output axis: application is exact
        self._plan = tuple(
            next((j, r[j]) for j in range(3) if r[j] != 0) for r in self.rows
        )

    @classmethod
    def identity(cls) -> "FrameMapping":
        return cls([[1, 0, 0], [0, 1, 0], [0, 0, 1]])

    @classmethod
    def default(cls) -> "FrameMapping":
        """Capture X-forward / Y-left / Z-up: N = +X, E = -Y, D = -Z."""
        return cls([[1, 0, 0], [0, -1, 0], [0, 0, -1]])

    @classmethod
    def from_flat(cls, values: Sequence[int]) -> "FrameMapping":
        if len(values) != 9:
            raise ValueError("frame mapping needs exactly 9 row-major entries")
        return cls([values[0:3], values[3:6], values[6:9]])

    def apply(self, v: Vec3) -> Vec3:
        (j0, s0), (j1, s1), (j2, s2) = self._plan
        return (s0 * v[j0], s1 * v[j1], s2 * v[j2])

    def quaternion(self) -> Quat:
        """Unit quaternion (w, x, y, z) equivalent to this rotation."""
        m = self.rows
        tr = m[0][0] + m[1][1] + m[2][2]
        if tr > 0:
            s = math.sqrt(tr + 1.0) * 2.0
            return (0.25 * s, (m[2][1] - m[1][2]) / s, (m[0][2] - m[2][0]) / s, (m[1][0] - m[0][1]) / s)
        if m[0][0] >= m[1][1] and m[0][0] >= m[2][2]:
            s = math.sqrt(1.0 + m[0][0] - m[1][1] - m[2][2]) * 2.0
            return ((m[2][1] - m[1][2]) / s, 0.25 * s, (m[0][1] + m[1][0]) / s, (m[0][2] + m[2][0]) / s)
        if m[1][1] >= m[2][2]:
            s = math.sqrt(1.0 + m[1][1] - m[0][0] - m[2][2]) * 2.0
            return ((m[0][2] - m[2][0]) / s, (m[0][1] + m[1][0]) / s, 0.25 * s, (m[1][2] + m[2][1]) / s)
        s = math.sqrt(1.0 + m[2][2] - m[0][0] - m[1][1]) * 2.0
        return ((m[1][0] - m[0][1]) / s, (m[0][2] + m[2][0]) / s, (m[1][2] + m[2][1]) / s, 0.25 * s)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, FrameMapping) and self.rows == other.rows

    def __repr__(self) -> str:
        return f"FrameMapping({list(list(r) for r in self.rows)})"


def quat_multiply(a: Quat, b: Quat) -> Quat:
    """Hamilton product a*b, both (w, x, y, z)."""
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return (
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    )


def capture_to_ned(p: LocalPoint, mapping: FrameMapping) -> LocalPoint:
    p.require(Frame.CAPTURE)
    return LocalPoint(mapping.apply(p.xyz), Frame.NED)


def ned_to_enu(p: LocalPoint) -> LocalPoint:
    p.require(Frame.NED)
    n, e, d = p.xyz
    return LocalPoint((e, n, -d), Frame.ENU)


def enu_to_ned(p: LocalPoint) -> LocalPoint:
    p.require(Frame.ENU)
    e, n, u = p.xyz
    return LocalPoint((n, e, -u), Frame.NED)


def geodetic_to_ecef(g: GeodeticPoint, ellipsoid: EllipsoidParams = WGS84) -> Vec3:
    """Closed-form geodetic -> Earth-centered Earth-fixed Cartesian (meters)."""
    a = ellipsoid.semi_major_axis_m
    e2 = ellipsoid.e2
    lat = math.radians(g.latitude_deg)
    lon = math.radians(g.longitude_deg)
    sin_lat = math.sin(lat)
    cos_lat = math.cos(lat)
    n = a / math.sqrt(1.0 - e2 * sin_lat * sin_lat)
    h = g.altitude_m
    return (
        (n + h) * cos_lat * math.cos(lon),
        (n + h) * cos_lat * math.sin(lon),
        (n * (1.0 - e2) + h) * sin_lat,
    )


def ecef_to_geodetic(xyz: Vec3, ellipsoid: EllipsoidParams = WGS84) -> GeodeticPoint:
    """Invert geodetic_to_ecef by latitude iteration (Bowring start).

    Iterates until successive latitudes agree to 1e-12 rad; for points
    anywhere near the surface this takes a handful of iterations.
    """
    x, y, z = xyz
    a = ellipsoid.semi_major_axis_m
    b = ellipsoid.semi_minor_axis_m
    e2 = ellipsoid.e2
    p = math.hypot(x, y)
    if p < 1e-9:  # on the polar axis: longitude degenerate, latitude +/-90
        if abs(z) < 1e-9:
            raise ValueError("ECEF origin has no geodetic image")
        return GeodeticPoint(math.copysign(90.0, z), 0.0, abs(z) - b)
    lon = math.atan2(y, x)
    # Bowring's parametric-latitude start, then fixed-point polish
    ep2 = (a * a - b * b) / (b * b)
    beta = math.atan2(z * a, p * b)
    lat = math.atan2(
        z + ep2 * b * math.sin(beta) ** 3,
        p - e2 * a * math.cos(beta) ** 3,
    )
    for _ in range(10):
        sin_lat = math.sin(lat)
        n = a / math.sqrt(1.0 - e2 * sin_lat * sin_lat)
        new_lat = math.atan2(z + e2 * n * sin_lat, p)
        if abs(new_lat - lat) < 1e-12:
            lat = new_lat
            break
        lat = new_lat
    else:
        raise NonConvergence(f"latitude iteration did not converge for {xyz}")
    sin_lat = math.sin(lat)
    cos_lat = math.cos(lat)
    n = a / math.sqrt(1.0 - e2 * sin_lat * sin_lat)
    if abs(lat) < 1.1781:  # ~67.5 deg: pick the better-conditioned height formula
        h = p / cos_lat - n
    else:
        h = z / sin_lat - n * (1.0 - e2)
    return GeodeticPoint(math.degrees(lat), math.degrees(lon), h)


def local_to_geodetic(
    origin: GeodeticPoint, p: LocalPoint, ellipsoid: EllipsoidParams = WGS84
) -> GeodeticPoint:
    """Geodetic coordinates of an ENU offset from a geodetic origin.

    ECEF(result) = ECEF(origin) + R^T(origin) * p with R the standard
    ECEF->ENU rotation at the origin.
    """
    p.require(Frame.ENU)
    lat = math.radians(origin.latitude_deg)
    lon = math.radians(origin.longitude_deg)
    sin_lat, cos_lat = math.sin(lat), math.cos(lat)
    sin_lon, cos_lon = math.sin(lon), math.cos(lon)
    pe, pn, pu = p.xyz
    x0, y0, z0 = geodetic_to_ecef(origin, ellipsoid)
    dx = -sin_lon * pe - sin_lat * cos_lon * pn + cos_lat * cos_lon * pu
    dy = cos_lon * pe - sin_lat * sin_lon * pn + cos_lat * sin_lon * pu
    dz = cos_lat * pn + sin_lat * pu
    return ecef_to_geodetic((x0 + dx, y0 + dy, z0 + dz), ellipsoid)


def round_half_away(x: float) -> int:
    """Round to nearest integer, ties away from zero (wire-format convention)."""
    return math.floor(x + 0.5) if x >= 0 else math.ceil(x - 0.5)


def velocity_capture_to_ned_cms(v: Vec3, mapping: FrameMapping) -> tuple[int, int, int]:
    """Capture-frame velocity (m/s) to integer NED cm/s for HIL_GPS fields."""
    vn, ve, vd = mapping.apply(v)
    out = tuple(round_half_away(c * 100.0) for c in (vn, ve, vd))
    for c in out:
        if not INT16_MIN <= c <= INT16_MAX:
            raise Overflow(f"velocity component {c} cm/s does not fit int16")
    return out  # type: ignore[return-value]


def course_over_ground(
    vn: float, ve: float, speed_threshold: float = COG_SPEED_THRESHOLD_MS
) -> Optional[int]:
    """Course over ground in centidegrees [0, 35999], or None below the speed threshold."""
    if math.hypot(vn, ve) < speed_threshold:
        return None
    deg = math.degrees(math.atan2(ve, vn)) % 360.0
    return round_half_away(deg * 100.0) % 36000
