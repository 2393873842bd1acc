"""HTTP/JSON control plane and WebSocket push stream.

Replaces an in-process GUI: everything an operator console needs runs over
these endpoints, so the station itself stays headless.  No authentication;
this is meant for a trusted lab network.
"""

from __future__ import annotations

import asyncio
import logging
import os
from typing import Optional

from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .sender import DroneEndpoint, InvalidConfig, SenderConfig, SenderStats
from .station import ObjectView, Station, UnknownObject, UnknownSender
from .tracking import MM_TO_M

log = logging.getLogger(__name__)

OBJECT_STREAM_PERIOD_S = 0.1  # <= 10 Hz pose/velocity events
SENDER_STREAM_EVERY = 10  # sender stats once per second
STALE_AFTER_S = 2.0


class SenderCreate(BaseModel):
    object: str
    host: str
    port: int
    rate_hz: float = 50.0
    messages: Optional[list[str]] = None
    protocol_version: int = 2
    target_system_id: int = 1
    target_component_id: int = 1
    source_system_id: int = 255
    source_component_id: int = 1


class SenderPatch(BaseModel):
    rate_hz: Optional[float] = None
    messages: Optional[list[str]] = None
    host: Optional[str] = None
    port: Optional[int] = None
    protocol_version: Optional[int] = None


def _stats_json(stats: SenderStats) -> dict:
    return {
        "ticks_total": stats.ticks_total,
        "frames_sent": stats.frames_sent,
        "deadline_misses": stats.deadline_misses,
        "stale_skips": stats.stale_skips,
        "measured_output_rate_hz": round(stats.measured_output_rate_hz, 3),
    }


def _config_json(sender_id: int, cfg: SenderConfig) -> dict:
    return {
        "id": sender_id,
        "object": cfg.object_name,
        "host": cfg.endpoint.host,
        "port": cfg.endpoint.port,
        "rate_hz": cfg.rate_hz,
        "messages": sorted(cfg.enabled_messages),
        "protocol_version": cfg.protocol_version,
    }


def build_api(station: Station) -> FastAPI:
    app = FastAPI(title="mocaplink control API", docs_url=None, redoc_url=None)

    def object_json(view: ObjectView) -> dict:
        now = station.runtime.clock.now()
        if view.track is not None:
            pos = list(view.track.position)
            vel = list(view.track.velocity)
        else:
            pos = [v * MM_TO_M for v in view.latest.position_mm]
            vel = [0.0, 0.0, 0.0]
        ned = list(station.config.mapping.apply((pos[0], pos[1], pos[2])))
        return {
            "name": view.name,
            "frame_number": view.latest.frame_number,
            "capture_time": view.latest.capture_time,
            "occluded": view.latest.occluded,
            "position_capture_m": pos,
            "velocity_m_s": vel,
            "position_ned_m": ned,
            "orientation_wxyz": list(view.latest.orientation),
            "capture_rate_hz": view.capture_rate_hz,
            "drop_rate": view.drop_rate,
            "last_seen": view.last_seen,
            "stale": (now - view.last_seen) > STALE_AFTER_S,
        }

    def objects_payload() -> list[dict]:
        return [object_json(v) for v in station.snapshot_world()]

    def senders_payload() -> list[dict]:
        return [
            {**_config_json(sid, cfg), "stats": _stats_json(stats)}
            for sid, cfg, stats in station.list_senders()
        ]

    @app.get("/api/objects")
    def get_objects() -> list[dict]:
        return objects_payload()

    @app.get("/api/senders")
    def get_senders() -> list[dict]:
        return senders_payload()

    @app.post("/api/senders")
    def post_sender(body: SenderCreate) -> dict:
        try:
            cfg = SenderConfig(
                object_name=body.object,
                endpoint=DroneEndpoint(
                    host=body.host,
                    port=body.port,
                    target_system_id=body.target_system_id,
                    target_component_id=body.target_component_id,
                ),
                rate_hz=body.rate_hz,
                enabled_messages=frozenset(body.messages)
                if body.messages is not None
                else SenderConfig.__dataclass_fields__["enabled_messages"].default,
                protocol_version=body.protocol_version,
                source_system_id=body.source_system_id,
                source_component_id=body.source_component_id,
            )
        except InvalidConfig as e:
            raise HTTPException(status_code=422, detail=str(e))
        try:
            sender_id = station.create_sender(cfg)
        except UnknownObject as e:
            raise HTTPException(status_code=404, detail=str(e))
        return {"id": sender_id}

    @app.patch("/api/senders/{sender_id}")
    def patch_sender(sender_id: int, body: SenderPatch) -> dict:
        patch: dict = {}
        if body.rate_hz is not None:
            patch["rate_hz"] = body.rate_hz
        if body.messages is not None:
            patch["enabled_messages"] = frozenset(body.messages)
        if body.protocol_version is not None:
            patch["protocol_version"] = body.protocol_version
        if body.host is not None or body.port is not None:
            try:
                current = station.get_sender(sender_id).config.endpoint
            except UnknownSender as e:
                raise HTTPException(status_code=404, detail=str(e))
            patch["endpoint"] = DroneEndpoint(
                host=body.host if body.host is not None else current.host,
                port=body.port if body.port is not None else current.port,
                target_system_id=current.target_system_id,
                target_component_id=current.target_component_id,
            )
        try:
            cfg = station.update_sender(sender_id, **patch)
        except UnknownSender as e:
            raise HTTPException(status_code=404, detail=str(e))
        except InvalidConfig as e:
            raise HTTPException(status_code=422, detail=str(e))
        return _config_json(sender_id, cfg)

    @app.delete("/api/senders/{sender_id}")
    def delete_sender(sender_id: int) -> dict:
        try:
            stats = station.stop_sender(sender_id)
        except UnknownSender as e:
            raise HTTPException(status_code=404, detail=str(e))
        return {"id": sender_id, "final_stats": _stats_json(stats)}

    @app.get("/api/station")
    def get_station() -> dict:
        return station.describe()

    @app.websocket("/api/stream")
    async def stream(ws: WebSocket) -> None:
        await ws.accept()
        beat = 0
        try:
            while True:
                await ws.send_json({"type": "objects", "t": station.runtime.clock.now(), "objects": objects_payload()})
                if beat % SENDER_STREAM_EVERY == 0:
                    await ws.send_json({"type": "senders", "t": station.runtime.clock.now(), "senders": senders_payload()})
                beat += 1
                await asyncio.sleep(OBJECT_STREAM_PERIOD_S)
        except (WebSocketDisconnect, RuntimeError):
            return

    static_dir = station.config.static_dir
    if static_dir and os.path.isdir(static_dir):
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="panel")
        log.info("serving control panel from %s", static_dir)

    return app
