"""Rigid-body pose ingest: wire format, trajectory simulator, replay logs, UDP source.

One ingest record per line/datagram, UTF-8, space-separated:

    MOCAP1 <frame> <t_s> <name> <x_mm> <y_mm> <z_mm> <qw> <qx> <qy> <qz> <occluded:0|1>

Positions stay in millimeters throughout this module (capture-native unit);
the tracking layer converts to meters exactly once.  A replay log is the
same records in a file behind a `#MOCAPLOG v1` header line.
"""

from __future__ import annotations

import logging
import math
import socket
from dataclasses import dataclass
from typing import IO, Iterator, Optional, Sequence

import numpy as np

from .clocks import Clock

log = logging.getLogger(__name__)

MAGIC = "MOCAP1"
LOG_HEADER = "#MOCAPLOG v1"

SCENARIO_KINDS = ("hover", "circle", "line", "waypoints")
REPLAY_PACINGS = ("realtime", "fast")

Vec3 = tuple[float, float, float]
Quat = tuple[float, float, float, float]


class IngestError(Exception):
    pass


class MalformedRecord(IngestError):
    pass


class NonUnitQuaternion(IngestError):
    pass


class NegativeTime(IngestError):
    pass


class CorruptLog(IngestError):
    pass


class ClockSkew(IngestError):
    pass


@dataclass(frozen=True, slots=True)
class RigidBodySample:
    """One per-frame pose measurement of a named object in the capture frame."""

    frame_number: int
    capture_time: float  # seconds since stream epoch
    object_name: str
    position_mm: Vec3
    orientation: Quat  # unit quaternion (w, x, y, z)
    occluded: bool = False


def parse_ingest_record(record: str | bytes) -> RigidBodySample:
    """Parse one ingest line/datagram into a RigidBodySample.

    Quaternions already unit to 1e-6 are kept bit-exact (so a formatted
    record parses back identically); deviations up to 1e-3 are renormalized;
    anything worse is rejected.
    """
    if isinstance(record, bytes):
        try:
            record = record.decode("utf-8")
        except UnicodeDecodeError as e:
            raise MalformedRecord(f"not UTF-8: {e}") from None
    parts = record.split()
    if len(parts) != 12 or parts[0] != MAGIC:
        raise MalformedRecord(f"expected 12 fields starting with {MAGIC!r}: {record!r}")
    try:
        frame_number = int(parts[1])
        capture_time = float(parts[2])
        name = parts[3]
        x, y, z = (float(v) for v in parts[4:7])
        qw, qx, qy, qz = (float(v) for v in parts[7:11])
        occluded = {"0": False, "1": True}[parts[11]]
    except (ValueError, KeyError) as e:
        raise MalformedRecord(f"bad field in {record!r}: {e}") from None
    if frame_number < 0:
        raise MalformedRecord(f"negative frame number {frame_number}")
    if capture_time < 0:
        raise NegativeTime(f"capture_time {capture_time} < 0")
    norm = math.sqrt(qw * qw + qx * qx + qy * qy + qz * qz)
    if abs(norm - 1.0) > 1e-3:
        raise NonUnitQuaternion(f"|q| = {norm:.6f} deviates from 1 by more than 1e-3")
    if abs(norm - 1.0) > 1e-6:
        qw, qx, qy, qz = qw / norm, qx / norm, qy / norm, qz / norm
    return RigidBodySample(
        frame_number=frame_number,
        capture_time=capture_time,
        object_name=name,
        position_mm=(x, y, z),
        orientation=(qw, qx, qy, qz),
        occluded=occluded,
    )


def format_ingest_record(sample: RigidBodySample) -> str:
    """Render a sample as one wire-format line (no trailing newline).

    Floats use repr so that parse(format(s)) reproduces s bit-for-bit.
    """
    if not sample.object_name or any(c.isspace() for c in sample.object_name):
        raise MalformedRecord(f"object name {sample.object_name!r} not representable on the wire")
    p = sample.position_mm
    q = sample.orientation
    return " ".join(
        [
            MAGIC,
            str(sample.frame_number),
            repr(float(sample.capture_time)),
            sample.object_name,
            repr(float(p[0])),
            repr(float(p[1])),
            repr(float(p[2])),
            repr(float(q[0])),
            repr(float(q[1])),
            repr(float(q[2])),
            repr(float(q[3])),
            "1" if sample.occluded else "0",
        ]
    )


@dataclass(frozen=True)
class ScenarioSpec:
    """Deterministic trajectory scenario for the simulator.

    Kinematics are exact closed forms; Gaussian position noise (i.i.d. per
    axis) and frame drops are derived from (seed, frame index) so any frame
    is reproducible in isolation.
    """

    kind: str = "hover"
    objects: tuple[str, ...] = ("uav1",)
    rate_hz: float = 100.0
    seed: int = 0
    drop_probability: float = 0.0
    noise_std_mm: float | Vec3 = 0.0  # scalar applies to all three axes
    center_mm: Vec3 = (0.0, 0.0, 1000.0)
    radius_mm: float = 2000.0
    omega_rad_s: float = 1.0
    start_mm: Vec3 = (0.0, 0.0, 1000.0)
    velocity_mm_s: Vec3 = (500.0, 0.0, 0.0)
    waypoints_mm: tuple[Vec3, ...] = ()
    speed_mm_s: float = 500.0
    object_spacing_mm: float = 1000.0

    def __post_init__(self) -> None:
        if self.kind not in SCENARIO_KINDS:
            raise ValueError(f"unknown scenario kind {self.kind!r}")
        if self.rate_hz <= 0:
            raise ValueError("rate_hz must be > 0")
        if not 0.0 <= self.drop_probability <= 1.0:
            raise ValueError("drop_probability must be within [0, 1]")
        noise = self.noise_std_mm
        noise = (float(noise),) * 3 if isinstance(noise, (int, float)) else tuple(float(v) for v in noise)
        if len(noise) != 3 or any(v < 0 for v in noise):
            raise ValueError("noise_std_mm must be a scalar >= 0 or three such values")
        object.__setattr__(self, "noise_std_mm", noise)
        if not self.objects:
            raise ValueError("at least one object name required")
        if self.kind == "circle" and self.radius_mm <= 0:
            raise ValueError("circle radius_mm must be > 0")
        if self.kind == "waypoints":
            if len(self.waypoints_mm) < 2:
                raise ValueError("waypoints scenario needs at least 2 points")
            if self.speed_mm_s <= 0:
                raise ValueError("speed_mm_s must be > 0")

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioSpec":
        known = {f.name for f in cls.__dataclass_fields__.values()}  # type: ignore[attr-defined]
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown scenario keys: {sorted(unknown)}")
        coerced = dict(data)
        for key in ("objects",):
            if key in coerced:
                coerced[key] = tuple(coerced[key])
        for key in ("center_mm", "start_mm", "velocity_mm_s"):
            if key in coerced:
                coerced[key] = tuple(float(v) for v in coerced[key])
        if isinstance(coerced.get("noise_std_mm"), (list, tuple)):
            coerced["noise_std_mm"] = tuple(float(v) for v in coerced["noise_std_mm"])
        if "waypoints_mm" in coerced:
            coerced["waypoints_mm"] = tuple(tuple(float(v) for v in p) for p in coerced["waypoints_mm"])
        return cls(**coerced)


def _yaw_quat(yaw: float) -> Quat:
    return (math.cos(yaw / 2.0), 0.0, 0.0, math.sin(yaw / 2.0))


def scenario_pose(spec: ScenarioSpec, obj_index: int, t: float) -> tuple[Vec3, Quat]:
    """Closed-form noiseless pose of one object at time t (positions in mm)."""
    if spec.kind == "hover":
        c = spec.center_mm
        off = obj_index * spec.object_spacing_mm
        return (c[0] + off, c[1], c[2]), (1.0, 0.0, 0.0, 0.0)
    if spec.kind == "circle":
        phase = 2.0 * math.pi * obj_index / len(spec.objects)
        theta = spec.omega_rad_s * t + phase
        c = spec.center_mm
        pos = (
            c[0] + spec.radius_mm * math.cos(theta),
            c[1] + spec.radius_mm * math.sin(theta),
            c[2],
        )
        return pos, _yaw_quat(theta + math.pi / 2.0)  # nose along the tangent
    if spec.kind == "line":
        s = spec.start_mm
        v = spec.velocity_mm_s
        off = obj_index * spec.object_spacing_mm
        return (s[0] + off + v[0] * t, s[1] + v[1] * t, s[2] + v[2] * t), (1.0, 0.0, 0.0, 0.0)
    # waypoints: constant speed along the polyline, clamped at the last point
    pts = spec.waypoints_mm
    dist = spec.speed_mm_s * t
    off = obj_index * spec.object_spacing_mm
    for a, b in zip(pts, pts[1:]):
        seg = math.dist(a, b)
        if dist <= seg:
            u = dist / seg if seg > 0 else 0.0
            p = tuple(a[i] + u * (b[i] - a[i]) for i in range(3))
            return (p[0] + off, p[1], p[2]), (1.0, 0.0, 0.0, 0.0)
        dist -= seg
    last = pts[-1]
    return (last[0] + off, last[1], last[2]), (1.0, 0.0, 0.0, 0.0)


def simulate_step(spec: ScenarioSpec, t: float) -> list[RigidBodySample]:
    """Produce the samples for the frame at time t (empty when the frame drops).

    Deterministic for a given (spec, t): noise and drops come from an RNG
    seeded by (spec.seed, frame_index).
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    k = int(round(t * spec.rate_hz))
    noise = spec.noise_std_mm
    noisy = noise[0] > 0 or noise[1] > 0 or noise[2] > 0
    rng = None
    if spec.drop_probability > 0 or noisy:
        rng = np.random.default_rng((spec.seed, k))
    if spec.drop_probability > 0:
        assert rng is not None
        if rng.random() < spec.drop_probability:
            return []
    samples = []
    for i, name in enumerate(spec.objects):
        pos, quat = scenario_pose(spec, i, t)
        if noisy:
            assert rng is not None
            nx, ny, nz = rng.standard_normal(3)
            pos = (
                pos[0] + float(nx) * noise[0],
                pos[1] + float(ny) * noise[1],
                pos[2] + float(nz) * noise[2],
            )
        samples.append(
            RigidBodySample(
                frame_number=k,
                capture_time=t,
                object_name=name,
                position_mm=pos,
                orientation=quat,
            )
        )
    return samples


# --- replay logs ---------------------------------------------------------


class ReplayLogWriter:
    """Writes samples to a replay log file incrementally."""

    def __init__(self, fileobj: IO[str]) -> None:
        self._f = fileobj
        self._f.write(LOG_HEADER + "\n")

    def write(self, sample: RigidBodySample) -> None:
        self._f.write(format_ingest_record(sample) + "\n")

    def close(self) -> None:
        self._f.close()


def write_replay_log(path: str, samples: Sequence[RigidBodySample]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        w = ReplayLogWriter(f)
        for s in samples:
            w.write(s)


def read_replay_log(path: str) -> Iterator[RigidBodySample]:
    """Yield samples from a replay log, validating header and time order."""
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().rstrip("\n")
        if header != LOG_HEADER:
            raise CorruptLog(f"bad log header {header!r} (expected {LOG_HEADER!r})")
        last_t = None
        for lineno, line in enumerate(f, start=2):
            line = line.strip()
            if not line:
                continue
            try:
                sample = parse_ingest_record(line)
            except IngestError as e:
                raise CorruptLog(f"line {lineno}: {e}") from None
            if last_t is not None and sample.capture_time < last_t:
                raise ClockSkew(
                    f"line {lineno}: capture_time {sample.capture_time} < previous {last_t}"
                )
            last_t = sample.capture_time
            yield sample


# --- sources: timed event streams for a Runtime --------------------------
#
# Each source yields (due, sample) pairs; `due` is the clock time at which
# the sample becomes available (None = immediately).  Exactly one source
# feeds a station, on a single task: samples are immutable values, safe to
# hand to any consumer.


class SimulatorSource:
    """Emits scenario frames on the clock at spec.rate_hz, forever."""

    def __init__(self, spec: ScenarioSpec, clock: Clock) -> None:
        self.spec = spec
        self._clock = clock

    def events(self) -> Iterator[tuple[Optional[float], RigidBodySample]]:
        t0 = self._clock.now()
        rate = self.spec.rate_hz
        k = 0
        while True:
            t = k / rate  # not k * period: keeps capture_time bit-stable
            for sample in simulate_step(self.spec, t):
                yield (t0 + t, sample)
            k += 1

    def close(self) -> None:
        pass


class ReplaySource:
    """Replays a log; realtime pacing maps capture-time offsets onto the clock."""

    def __init__(self, path: str, clock: Clock, pacing: str = "realtime") -> None:
        if pacing not in REPLAY_PACINGS:
            raise ValueError(f"pacing must be one of {REPLAY_PACINGS}")
        self.path = path
        self.pacing = pacing
        self._clock = clock

    def events(self) -> Iterator[tuple[Optional[float], RigidBodySample]]:
        t0 = None
        epoch = None
        for sample in read_replay_log(self.path):
            if self.pacing == "fast":
                yield (None, sample)
                continue
            if t0 is None:
                t0 = self._clock.now()
                epoch = sample.capture_time
            yield (t0 + (sample.capture_time - epoch), sample)

    def close(self) -> None:
        pass


class UdpIngestSource:
    """Receives wire-format datagrams on a bound UDP port (real clock only)."""

    def __init__(self, host: str, port: int) -> None:
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_RCVBUF, 1 << 20)
        self._sock.bind((host, port))
        self._closed = False

    @property
    def bound_port(self) -> int:
        return self._sock.getsockname()[1]

    def events(self) -> Iterator[tuple[Optional[float], RigidBodySample]]:
        while not self._closed:
            try:
                data, _ = self._sock.recvfrom(2048)
            except OSError:
                return  # socket closed by close()
            try:
                yield (None, parse_ingest_record(data))
            except IngestError as e:
                log.warning("dropping malformed ingest datagram: %s", e)

    def close(self) -> None:
        self._closed = True
        self._sock.close()
