"""Station configuration: YAML file loading with field-level diagnostics.

The geodetic origin is deliberately required with no default; an invented
lat/lon would silently mislocate every robot on the network.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Any, Optional

import yaml

from .geodesy import FrameMapping, GeodeticPoint
from .ingest import REPLAY_PACINGS, ScenarioSpec
from .sender import MESSAGE_SET, DroneEndpoint, HilGpsDefaults, InvalidConfig, SenderConfig
from .tracking import FilterParams

API_BIND_ENV = "MOCAPLINK_API_BIND"
DEFAULT_API_BIND = "127.0.0.1:8750"

INGEST_SOURCES = ("simulate", "replay", "udp")


class ConfigError(Exception):
    """Invalid or missing configuration; `field` is the dotted key path."""

    def __init__(self, field_path: str, message: str) -> None:
        super().__init__(f"{field_path}: {message}")
        self.field = field_path


@dataclass(frozen=True)
class IngestConfig:
    source: str = "simulate"
    scenario: Optional[ScenarioSpec] = None
    replay_path: Optional[str] = None
    replay_pacing: str = "realtime"
    udp_host: str = "127.0.0.1"
    udp_port: int = 51001


@dataclass(frozen=True)
class StationConfig:
    origin: GeodeticPoint
    mapping: FrameMapping = field(default_factory=FrameMapping.default)
    tracking: FilterParams = FilterParams()
    gps: HilGpsDefaults = HilGpsDefaults()
    ingest: IngestConfig = IngestConfig(scenario=ScenarioSpec())
    api_bind: str = DEFAULT_API_BIND
    static_dir: Optional[str] = None
    senders: tuple[SenderConfig, ...] = ()
    record_path: Optional[str] = None


def _require(mapping: dict, key: str, path: str) -> Any:
    if not isinstance(mapping, dict) or key not in mapping:
        raise ConfigError(f"{path}.{key}" if path else key, "required field is missing")
    return mapping[key]


def _as_float(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    return float(value)


def parse_sender_entry(entry: dict, path: str = "senders[]") -> SenderConfig:
    if not isinstance(entry, dict):
        raise ConfigError(path, "each sender must be a mapping")
    try:
        endpoint = DroneEndpoint(
            host=str(_require(entry, "host", path)),
            port=int(_require(entry, "port", path)),
            target_system_id=int(entry.get("target_system_id", 1)),
            target_component_id=int(entry.get("target_component_id", 1)),
        )
        messages = entry.get("messages")
        return SenderConfig(
            object_name=str(_require(entry, "object", path)),
            endpoint=endpoint,
            rate_hz=_as_float(entry.get("rate_hz", 50.0), f"{path}.rate_hz"),
            enabled_messages=frozenset(messages) if messages is not None else frozenset(MESSAGE_SET),
            protocol_version=int(entry.get("protocol_version", 2)),
            source_system_id=int(entry.get("source_system_id", 255)),
            source_component_id=int(entry.get("source_component_id", 1)),
        )
    except InvalidConfig as e:
        raise ConfigError(path, str(e)) from None
    except (TypeError, ValueError) as e:
        raise ConfigError(path, str(e)) from None


def parse_station_config(doc: Any, *, env: Optional[dict] = None) -> StationConfig:
    """Validate a parsed YAML document into a StationConfig."""
    env = os.environ if env is None else env
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError("", "top level of the config must be a mapping")

    origin_doc = _require(doc, "origin", "")
    lat = _as_float(_require(origin_doc, "latitude_deg", "origin"), "origin.latitude_deg")
    lon = _as_float(_require(origin_doc, "longitude_deg", "origin"), "origin.longitude_deg")
    alt = _as_float(_require(origin_doc, "altitude_m", "origin"), "origin.altitude_m")
    try:
        origin = GeodeticPoint(lat, lon, alt)
    except ValueError as e:
        raise ConfigError("origin", str(e)) from None

    if "frame_mapping" in doc:
        fm = doc["frame_mapping"]
        if not isinstance(fm, list):
            raise ConfigError("frame_mapping", "expected a 9-element row-major list")
        try:
            mapping = FrameMapping.from_flat(fm)
        except (TypeError, ValueError) as e:
            raise ConfigError("frame_mapping", str(e)) from None
    else:
        mapping = FrameMapping.default()

    try:
        tracking = FilterParams(**doc.get("tracking", {}))
    except (TypeError, ValueError) as e:
        raise ConfigError("tracking", str(e)) from None
    try:
        gps = HilGpsDefaults(**doc.get("gps", {}))
    except TypeError as e:
        raise ConfigError("gps", str(e)) from None

    ingest_doc = doc.get("ingest", {"source": "simulate", "scenario": {}})
    source = ingest_doc.get("source", "simulate")
    if source not in INGEST_SOURCES:
        raise ConfigError("ingest.source", f"must be one of {INGEST_SOURCES}")
    scenario = None
    replay_path = None
    replay_pacing = "realtime"
    udp_host, udp_port = "127.0.0.1", 51001
    if source == "simulate":
        scen_doc = ingest_doc.get("scenario", {})
        if "scenario_file" in ingest_doc:
            with open(ingest_doc["scenario_file"], "r", encoding="utf-8") as f:
                scen_doc = yaml.safe_load(f) or {}
        try:
            scenario = ScenarioSpec.from_dict(scen_doc)
        except (TypeError, ValueError) as e:
            raise ConfigError("ingest.scenario", str(e)) from None
    elif source == "replay":
        replay_path = str(_require(ingest_doc, "path", "ingest"))
        replay_pacing = ingest_doc.get("pacing", "realtime")
        if replay_pacing not in REPLAY_PACINGS:
            raise ConfigError("ingest.pacing", f"must be one of {REPLAY_PACINGS}")
    else:
        bind = str(ingest_doc.get("bind", f"{udp_host}:{udp_port}"))
        udp_host, udp_port = parse_bind_address(bind, "ingest.bind")
    ingest = IngestConfig(
        source=source,
        scenario=scenario,
        replay_path=replay_path,
        replay_pacing=replay_pacing,
        udp_host=udp_host,
        udp_port=udp_port,
    )

    api_doc = doc.get("api", {})
    api_bind = env.get(API_BIND_ENV) or api_doc.get("bind", DEFAULT_API_BIND)
    parse_bind_address(api_bind, "api.bind")  # validate early
    static_dir = api_doc.get("static_dir")

    senders = []
    for i, entry in enumerate(doc.get("senders", []) or []):
        senders.append(parse_sender_entry(entry, f"senders[{i}]"))

    return StationConfig(
        origin=origin,
        mapping=mapping,
        tracking=tracking,
        gps=gps,
        ingest=ingest,
        api_bind=str(api_bind),
        static_dir=static_dir,
        senders=tuple(senders),
        record_path=doc.get("record_path"),
    )


def load_station_config(path: str, *, env: Optional[dict] = None) -> StationConfig:
    try:
        with open(path, "r", encoding="utf-8") as f:
            doc = yaml.safe_load(f)
    except FileNotFoundError:
        raise ConfigError("", f"config file not found: {path}") from None
    except yaml.YAMLError as e:
        raise ConfigError("", f"invalid YAML: {e}") from None
    return parse_station_config(doc, env=env)


def parse_bind_address(value: str, path: str = "bind") -> tuple[str, int]:
    host, sep, port = str(value).rpartition(":")
    if not sep or not host:
        raise ConfigError(path, f"expected HOST:PORT, got {value!r}")
    try:
        port_num = int(port)
    except ValueError:
        raise ConfigError(path, f"port {port!r} is not an integer") from None
    if not 0 <= port_num <= 65535:
        raise ConfigError(path, f"port {port_num} outside [0, 65535]")
    return host, port_num
