"""Global coordinator: ingest loop, object registry, sender lifecycle, metrics.

Concurrency contract: the ingest task is the single writer of registry
entries; senders and control-plane snapshots are readers.  All registry
access happens under one mutex held only for short copy/update sections,
so a snapshot never blocks ingest for longer than one write section.
Lifecycle mutations (create/update/stop sender) are serialized by a
control lock.
"""

from __future__ import annotations

import logging
import threading
from collections import deque
from dataclasses import dataclass, replace
from typing import Optional, Sequence

from .clocks import Runtime, TaskHandle, VirtualClock
from .config import StationConfig
from .ingest import (
    ReplayLogWriter,
    ReplaySource,
    RigidBodySample,
    SimulatorSource,
    UdpIngestSource,
)
from .sender import Sender, SenderConfig, SenderStats, UdpTransport
from .tracking import (
    FilterParams,
    TimeRegression,
    TrackState,
    kf_init,
    kf_update,
)

log = logging.getLogger(__name__)

FRAME_RING_SIZE = 256
CAPTURE_RATE_WINDOW_S = 1.0


class StationError(Exception):
    pass


class UnknownObject(StationError):
    pass


class UnknownSender(StationError):
    pass


class InsufficientData(StationError):
    pass


def compute_frame_drop_rate(frame_numbers: Sequence[int]) -> float:
    """Fraction of capture frames missing over the recorded window.

    expected = newest - oldest + 1 within the window; the result is
    (expected - received) / expected.
    """
    if len(frame_numbers) < 2:
        raise InsufficientData("need at least 2 recorded frames")
    oldest, newest = frame_numbers[0], frame_numbers[-1]
    expected = newest - oldest + 1
    return (expected - len(frame_numbers)) / expected


@dataclass(frozen=True)
class ObjectView:
    """Point-in-time copy of one registry entry for snapshots."""

    name: str
    latest: RigidBodySample
    track: Optional[TrackState]
    drop_rate: Optional[float]
    capture_rate_hz: float
    first_seen: float
    last_seen: float


class _Entry:
    __slots__ = ("name", "latest", "track", "ring", "arrivals", "first_seen", "last_seen")

    def __init__(self, name: str, first_seen: float) -> None:
        self.name = name
        self.latest: Optional[RigidBodySample] = None
        self.track: Optional[TrackState] = None
        self.ring: deque[int] = deque(maxlen=FRAME_RING_SIZE)
        self.arrivals: deque[float] = deque()
        self.first_seen = first_seen
        self.last_seen = first_seen


class Registry:
    """Latest sample + track state per object, single-writer/multi-reader."""

    def __init__(self, params: FilterParams) -> None:
        self._params = params
        self._lock = threading.Lock()
        self._objects: dict[str, _Entry] = {}

    def apply_sample(self, sample: RigidBodySample, now: float) -> None:
        """Ingest one sample: auto-register, filter-update, account the frame."""
        with self._lock:
            entry = self._objects.get(sample.object_name)
            if entry is None:
                entry = _Entry(sample.object_name, now)
                self._objects[sample.object_name] = entry
                log.info("registered object %r", sample.object_name)
            if entry.latest is not None and sample.frame_number <= entry.latest.frame_number:
                log.warning(
                    "object %r: frame %d not after %d, dropping",
                    sample.object_name, sample.frame_number, entry.latest.frame_number,
                )
                return
            if entry.track is None:
                if not sample.occluded:
                    entry.track = kf_init(sample, self._params)
            else:
                try:
                    entry.track = kf_update(entry.track, sample, self._params)
                except TimeRegression as e:
                    log.warning("object %r: %s, dropping sample", sample.object_name, e)
                    return
            entry.latest = sample
            entry.ring.append(sample.frame_number)
            entry.arrivals.append(now)
            horizon = now - CAPTURE_RATE_WINDOW_S
            while entry.arrivals and entry.arrivals[0] <= horizon:
                entry.arrivals.popleft()
            entry.last_seen = now

    def get_track(self, name: str) -> Optional[TrackState]:
        with self._lock:
            entry = self._objects.get(name)
            return entry.track if entry is not None else None

    def has(self, name: str) -> bool:
        with self._lock:
            return name in self._objects

    def names(self) -> list[str]:
        with self._lock:
            return sorted(self._objects)

    def frame_ring(self, name: str) -> list[int]:
        with self._lock:
            entry = self._objects.get(name)
            if entry is None:
                raise UnknownObject(name)
            return list(entry.ring)

    def snapshot(self, now: float) -> list[ObjectView]:
        views = []
        with self._lock:
            for name in sorted(self._objects):
                e = self._objects[name]
                if e.latest is None:
                    continue
                ring = list(e.ring)
                drop = compute_frame_drop_rate(ring) if len(ring) >= 2 else None
                rate = sum(1 for t in e.arrivals if t > now - CAPTURE_RATE_WINDOW_S)
                views.append(
                    ObjectView(
                        name=name,
                        latest=e.latest,
                        track=e.track,
                        drop_rate=drop,
                        capture_rate_hz=float(rate),
                        first_seen=e.first_seen,
                        last_seen=e.last_seen,
                    )
                )
        return views


class Station:
    """Owns the ingest source, registry, senders and their lifecycles."""

    def __init__(self, config: StationConfig, runtime: Runtime, transport_factory=UdpTransport) -> None:
        self.config = config
        self.runtime = runtime
        self.registry = Registry(config.tracking)
        self._transport_factory = transport_factory
        self._control = threading.Lock()
        self._senders: dict[int, Sender] = {}
        self._stopped: list[tuple[int, SenderConfig, SenderStats]] = []
        self._next_id = 1
        self._source = None
        self._ingest_handle: Optional[TaskHandle] = None
        self._recorder: Optional[ReplayLogWriter] = None
        self._record_file = None
        self._started_at: Optional[float] = None

    # -- lifecycle ---------------------------------------------------------

    def start(self) -> None:
        if self._started_at is not None:
            raise StationError("station already started")
        self._started_at = self.runtime.clock.now()
        if self.config.record_path:
            self._record_file = open(self.config.record_path, "w", encoding="utf-8")
            self._recorder = ReplayLogWriter(self._record_file)
        self._source = self._build_source()
        self._ingest_handle = self.runtime.spawn_stream(
            "ingest", self._source.events(), self._on_sample, on_stop=self._source.close
        )
        for cfg in self.config.senders:
            self.create_sender(cfg, declared=True)

    def stop(self) -> None:
        with self._control:
            senders = list(self._senders.items())
            self._senders.clear()
        for sid, s in senders:
            s.stop()
            with self._control:
                self._stopped.append((sid, s.config, s.stats()))
        if self._ingest_handle is not None:
            self._ingest_handle.stop()
            if self._source is not None:
                self._source.close()
            self._ingest_handle.join()
        if self._recorder is not None:
            self._recorder.close()
            self._recorder = None

    def _build_source(self):
        ingest = self.config.ingest
        if ingest.source == "simulate":
            return SimulatorSource(ingest.scenario, self.runtime.clock)
        if ingest.source == "replay":
            return ReplaySource(ingest.replay_path, self.runtime.clock, ingest.replay_pacing)
        if isinstance(self.runtime.clock, VirtualClock):
            raise StationError("udp ingest cannot run on a virtual clock")
        return UdpIngestSource(ingest.udp_host, ingest.udp_port)

    def _on_sample(self, sample: RigidBodySample) -> None:
        self.registry.apply_sample(sample, self.runtime.clock.now())
        if self._recorder is not None:
            self._recorder.write(sample)

    # -- sender lifecycle ----------------------------------------------------

    def create_sender(self, cfg: SenderConfig, declared: bool = False) -> int:
        """Spawn a streaming task; `declared` skips the registered-object check
        (config-declared senders may start before their object's first frame)."""
        if not declared and not self.registry.has(cfg.object_name):
            raise UnknownObject(f"object {cfg.object_name!r} is not registered")
        with self._control:
            sender_id = self._next_id
            self._next_id += 1
            sender = Sender(
                sender_id,
                cfg,
                self.registry.get_track,
                self.runtime.clock,
                self._transport_factory(),
                self.config.origin,
                self.config.mapping,
                self.config.tracking,
                self.config.gps,
            )
            self._senders[sender_id] = sender
        sender.start(self.runtime)
        log.info("sender %d -> %s:%d for %r at %.1f Hz", sender_id, cfg.endpoint.host,
                 cfg.endpoint.port, cfg.object_name, cfg.rate_hz)
        return sender_id

    def update_sender(self, sender_id: int, **patch) -> SenderConfig:
        """Apply a partial config update; takes effect within one tick."""
        with self._control:
            sender = self._senders.get(sender_id)
            if sender is None:
                raise UnknownSender(f"no sender with id {sender_id}")
            cfg = replace(sender.config, **patch)
            sender.update_config(cfg)
            return cfg

    def stop_sender(self, sender_id: int) -> SenderStats:
        with self._control:
            sender = self._senders.pop(sender_id, None)
        if sender is None:
            raise UnknownSender(f"no sender with id {sender_id}")
        sender.stop()
        stats = sender.stats()
        with self._control:
            self._stopped.append((sender_id, sender.config, stats))
        return stats

    def get_sender(self, sender_id: int) -> Sender:
        with self._control:
            sender = self._senders.get(sender_id)
        if sender is None:
            raise UnknownSender(f"no sender with id {sender_id}")
        return sender

    def list_senders(self) -> list[tuple[int, SenderConfig, SenderStats]]:
        with self._control:
            items = list(self._senders.items())
        return [(sid, s.config, s.stats()) for sid, s in sorted(items)]

    def final_sender_stats(self) -> list[tuple[int, SenderConfig, SenderStats]]:
        """Stats frozen at stop time for senders that no longer run."""
        with self._control:
            return sorted(self._stopped)

    # -- snapshots -----------------------------------------------------------

    def snapshot_world(self) -> list[ObjectView]:
        return self.registry.snapshot(self.runtime.clock.now())

    def uptime(self) -> float:
        if self._started_at is None:
            return 0.0
        return self.runtime.clock.now() - self._started_at

    def describe(self) -> dict:
        o = self.config.origin
        return {
            "origin": {
                "latitude_deg": o.latitude_deg,
                "longitude_deg": o.longitude_deg,
                "altitude_m": o.altitude_m,
            },
            "frame_mapping": [v for row in self.config.mapping.rows for v in row],
            "ingest_source": self.config.ingest.source,
            "api_bind": self.config.api_bind,
            "uptime_s": self.uptime(),
            "objects": self.registry.names(),
            "sender_count": len(self._senders),
        }
