"""Per-robot streaming pipeline.

A Sender ticks at its own configured rate, independent of the capture
rate: each tick it reads the latest track snapshot from the station
registry (read-only, never blocking the ingest writer), extrapolates the
state to send time, builds the enabled subset of localization messages,
and fires them at the robot's UDP endpoint.  UDP is fire-and-forget;
failures are counted, never retried.
"""

from __future__ import annotations

import logging
import math
import socket
import threading
from collections import deque
from dataclasses import dataclass
from typing import Callable, Optional

from . import mavlink
from .clocks import Clock, Runtime, TaskHandle
from .geodesy import (
    Frame,
    FrameMapping,
    GeodeticPoint,
    LocalPoint,
    course_over_ground,
    local_to_geodetic,
    ned_to_enu,
    quat_multiply,
    round_half_away,
    velocity_capture_to_ned_cms,
)
from .tracking import FilterParams, StaleTrack, TrackState, predict_to

log = logging.getLogger(__name__)

MESSAGE_SET = ("HIL_GPS", "LOCAL_POSITION_NED", "ATT_POS_MOCAP")

# Sliding window for the measured output rate.
RATE_WINDOW_S = 2.0


class SenderError(Exception):
    pass


class InvalidConfig(SenderError):
    pass


@dataclass(frozen=True, slots=True)
class DroneEndpoint:
    """Where one robot listens; target ids are informational metadata."""

    host: str
    port: int
    target_system_id: int = 1
    target_component_id: int = 1

    def __post_init__(self) -> None:
        if not 1 <= self.port <= 65535:
            raise InvalidConfig(f"port {self.port} outside [1, 65535]")

    @property
    def address(self) -> tuple[str, int]:
        return (self.host, self.port)


@dataclass(frozen=True, slots=True)
class HilGpsDefaults:
    """Fixed fields of the simulated fix; defaults mirror a healthy 3D lock."""

    eph: int = 30  # dilution * 100
    epv: int = 30
    fix_type: int = 3
    satellites_visible: int = 12
    cog_speed_threshold: float = 0.05  # m/s


@dataclass(frozen=True, slots=True)
class SenderConfig:
    object_name: str
    endpoint: DroneEndpoint
    rate_hz: float = 50.0
    enabled_messages: frozenset[str] = frozenset(MESSAGE_SET)
    protocol_version: int = 2
    source_system_id: int = 255
    source_component_id: int = 1

    def __post_init__(self) -> None:
        if not self.object_name:
            raise InvalidConfig("object_name must be non-empty")
        if not 0 < self.rate_hz <= 1000:
            raise InvalidConfig(f"rate_hz {self.rate_hz} outside (0, 1000]")
        msgs = frozenset(self.enabled_messages)
        if not msgs:
            raise InvalidConfig("enabled_messages must not be empty")
        unknown = msgs - set(MESSAGE_SET)
        if unknown:
            raise InvalidConfig(f"unknown message types: {sorted(unknown)}")
        object.__setattr__(self, "enabled_messages", msgs)
        if self.protocol_version not in (1, 2):
            raise InvalidConfig(f"protocol_version {self.protocol_version} not in {{1, 2}}")


@dataclass(frozen=True, slots=True)
class SenderStats:
    ticks_total: int = 0
    frames_sent: int = 0
    deadline_misses: int = 0
    stale_skips: int = 0
    measured_output_rate_hz: float = 0.0


class UdpTransport:
    """One fire-and-forget UDP socket."""

    def __init__(self) -> None:
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)

    def send(self, data: bytes, address: tuple[str, int]) -> None:
        self._sock.sendto(data, address)

    def close(self) -> None:
        self._sock.close()


def build_packets(
    state: TrackState,
    cfg: SenderConfig,
    origin: GeodeticPoint,
    mapping: FrameMapping,
    params: FilterParams,
    encoder: mavlink.FrameEncoder,
    now: float,
    *,
    time_usec: Optional[int] = None,
    time_boot_ms: Optional[int] = None,
    gps: HilGpsDefaults = HilGpsDefaults(),
    last_cog: Optional[int] = None,
) -> tuple[list[bytes], Optional[int]]:
    """Run the full transform chain for one tick and encode the enabled frames.

    Extrapolates the track to `now`, rotates position/velocity/attitude
    into NED, and for HIL_GPS continues NED -> ENU -> geodetic.  Returns
    the encoded frames (sequence numbers consecutive) plus the course-over-
    ground value to hold for the next tick; raises StaleTrack when the
    track is older than the staleness timeout.
    """
    st = predict_to(state, now, params)
    ned = mapping.apply(st.position)
    vel_ned = mapping.apply(st.velocity)
    if time_usec is None:
        time_usec = round_half_away(now * 1e6)
    if time_boot_ms is None:
        time_boot_ms = round_half_away(now * 1e3)

    frames: list[bytes] = []
    enabled = cfg.enabled_messages
    new_cog = last_cog
    if "HIL_GPS" in enabled:
        enu = ned_to_enu(LocalPoint(ned, Frame.NED))
        geo = local_to_geodetic(origin, enu)
        vn_i, ve_i, vd_i = velocity_capture_to_ned_cms(st.velocity, mapping)
        cog = course_over_ground(vel_ned[0], vel_ned[1], gps.cog_speed_threshold)
        if cog is not None:
            new_cog = cog
        msg = mavlink.HilGps(
            time_usec=time_usec,
            lat=round_half_away(geo.latitude_deg * 1e7),
            lon=round_half_away(geo.longitude_deg * 1e7),
            alt=round_half_away(geo.altitude_m * 1e3),
            eph=gps.eph,
            epv=gps.epv,
            vel=round_half_away(math.hypot(vel_ned[0], vel_ned[1]) * 100.0),
            vn=vn_i,
            ve=ve_i,
            vd=vd_i,
            cog=new_cog if new_cog is not None else mavlink.COG_UNKNOWN,
            fix_type=gps.fix_type,
            satellites_visible=gps.satellites_visible,
        )
        frames.append(encoder.encode(msg))
    if "LOCAL_POSITION_NED" in enabled:
        msg = mavlink.LocalPositionNed(
            time_boot_ms=time_boot_ms,
            x=ned[0],
            y=ned[1],
            z=ned[2],
            vx=vel_ned[0],
            vy=vel_ned[1],
            vz=vel_ned[2],
        )
        frames.append(encoder.encode(msg))
    if "ATT_POS_MOCAP" in enabled:
        q = quat_multiply(mapping.quaternion(), st.orientation)
        msg = mavlink.AttPosMocap(
            time_usec=time_usec,
            q=q,
            x=ned[0],
            y=ned[1],
            z=ned[2],
        )
        frames.append(encoder.encode(msg))
    return frames, new_cog


class Sender:
    """Periodic streaming task for one robot.

    Owns its filter extrapolation inputs (read-only registry snapshots),
    MAVLink sequence counter, UDP transport and stats.  Config is replaced
    atomically; changes apply from the next tick.
    """

    def __init__(
        self,
        sender_id: int,
        config: SenderConfig,
        read_track: Callable[[str], Optional[TrackState]],
        clock: Clock,
        transport,
        origin: GeodeticPoint,
        mapping: FrameMapping,
        params: FilterParams,
        gps: HilGpsDefaults = HilGpsDefaults(),
    ) -> None:
        self.sender_id = sender_id
        self._config = config
        self._read_track = read_track
        self._clock = clock
        self._transport = transport
        self._origin = origin
        self._mapping = mapping
        self._params = params
        self._gps = gps
        self._encoder = mavlink.FrameEncoder(
            system_id=config.source_system_id,
            component_id=config.source_component_id,
            protocol_version=config.protocol_version,
        )
        self._lock = threading.Lock()
        self._ticks = 0
        self._frames = 0
        self._misses = 0
        self._stale = 0
        self._emits: deque[float] = deque()
        self._last_cog: Optional[int] = None
        self._last_usec = -1
        self._last_ms = -1
        self._handle: Optional[TaskHandle] = None
        self._runtime: Optional[Runtime] = None

    @property
    def config(self) -> SenderConfig:
        return self._config

    def update_config(self, config: SenderConfig) -> None:
        if config.object_name != self._config.object_name:
            raise InvalidConfig("a sender cannot be re-pointed at a different object")
        self._config = config

    def period(self) -> float:
        return 1.0 / self._config.rate_hz

    def start(self, runtime: Runtime) -> None:
        self._runtime = runtime
        self._handle = runtime.spawn_periodic(
            f"sender-{self.sender_id}-{self._config.object_name}", self.period, self.tick
        )

    def stop(self) -> None:
        if self._handle is not None:
            self._handle.stop()
            self._handle.join()
        self._transport.close()

    def tick(self, now: float, scheduled: float, missed: int) -> None:
        cfg = self._config
        state = self._read_track(cfg.object_name)
        sent = 0
        stale = False
        error = False
        if state is None:
            stale = True
        else:
            self._encoder.system_id = cfg.source_system_id
            self._encoder.component_id = cfg.source_component_id
            self._encoder.protocol_version = cfg.protocol_version
            usec = round_half_away(now * 1e6)
            if usec <= self._last_usec:
                usec = self._last_usec + 1
            ms = round_half_away(now * 1e3)
            if ms <= self._last_ms:
                ms = self._last_ms + 1
            try:
                frames, self._last_cog = build_packets(
                    state,
                    cfg,
                    self._origin,
                    self._mapping,
                    self._params,
                    self._encoder,
                    now,
                    time_usec=usec,
                    time_boot_ms=ms,
                    gps=self._gps,
                    last_cog=self._last_cog,
                )
            except StaleTrack:
                stale = True
            else:
                self._last_usec = usec
                self._last_ms = ms
                for f in frames:
                    try:
                        self._transport.send(f, cfg.endpoint.address)
                        sent += 1
                    except OSError as e:
                        log.warning("sender %d: send to %s failed: %s", self.sender_id, cfg.endpoint.address, e)
                        error = True
        with self._lock:
            self._ticks += 1 + missed
            self._misses += missed
            if stale:
                self._stale += 1
                return
            if error:
                self._misses += 1
            self._frames += sent
            if sent:
                self._emits.append(now)
                horizon = now - RATE_WINDOW_S
                while self._emits and self._emits[0] < horizon:
                    self._emits.popleft()

    def stats(self) -> SenderStats:
        with self._lock:
            rate = 0.0
            if len(self._emits) >= 2:
                span = self._emits[-1] - self._emits[0]
                if span > 0:
                    rate = (len(self._emits) - 1) / span
            return SenderStats(
                ticks_total=self._ticks,
                frames_sent=self._frames,
                deadline_misses=self._misses,
                stale_skips=self._stale,
                measured_output_rate_hz=rate,
            )
