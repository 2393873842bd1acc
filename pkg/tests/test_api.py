import pytest
from fastapi.testclient import TestClient

from mocaplink.api import build_api
from mocaplink.clocks import VirtualClock, VirtualRuntime
from mocaplink.config import parse_station_config
from mocaplink.station import Station


class CaptureTransport:
    def __init__(self):
        self.sent = []

    def send(self, data, address):
        self.sent.append((data, address))

    def close(self):
        pass


@pytest.fixture
def station():
    doc = {
        "origin": {"latitude_deg": 40.1, "longitude_deg": -88.2, "altitude_m": 222.0},
        "ingest": {
            "source": "simulate",
            "scenario": {"kind": "hover", "rate_hz": 100.0, "objects": ["uav1", "uav2"]},
        },
    }
    cfg = parse_station_config(doc, env={})
    runtime = VirtualRuntime(VirtualClock())
    st = Station(cfg, runtime, transport_factory=CaptureTransport)
    st.start()
    runtime.run_for(2.0)
    yield st
    st.stop()


@pytest.fixture
def client(station):
    return TestClient(build_api(station))


def test_objects_snapshot(client):
    objects = client.get("/api/objects").json()
    assert [o["name"] for o in objects] == ["uav1", "uav2"]
    o = objects[0]
    assert o["capture_rate_hz"] == pytest.approx(100.0, abs=2.0)
    assert o["drop_rate"] == 0.0
    assert o["position_capture_m"] == pytest.approx([0.0, 0.0, 1.0])
    assert o["position_ned_m"] == pytest.approx([0.0, 0.0, -1.0])
    assert len(o["orientation_wxyz"]) == 4


def test_station_summary(client, station):
    d = client.get("/api/station").json()
    assert d["origin"]["latitude_deg"] == 40.1
    assert d["ingest_source"] == "simulate"
    assert d["objects"] == ["uav1", "uav2"]


def test_sender_crud_flow(client, station):
    body = {"object": "uav1", "host": "127.0.0.1", "port": 14560, "rate_hz": 50.0}
    created = client.post("/api/senders", json=body)
    assert created.status_code == 200
    sid = created.json()["id"]

    station.runtime.run_for(1.0)
    listed = client.get("/api/senders").json()
    assert len(listed) == 1
    assert listed[0]["id"] == sid
    assert listed[0]["rate_hz"] == 50.0
    assert listed[0]["stats"]["frames_sent"] > 0

    patched = client.patch(f"/api/senders/{sid}", json={"rate_hz": 100.0, "messages": ["LOCAL_POSITION_NED"]})
    assert patched.status_code == 200
    assert patched.json()["rate_hz"] == 100.0
    assert patched.json()["messages"] == ["LOCAL_POSITION_NED"]

    deleted = client.delete(f"/api/senders/{sid}")
    assert deleted.status_code == 200
    assert deleted.json()["final_stats"]["ticks_total"] > 0
    assert client.get("/api/senders").json() == []


def test_sender_error_paths(client):
    missing = client.post(
        "/api/senders", json={"object": "ghost", "host": "127.0.0.1", "port": 1}
    )
    assert missing.status_code == 404

    invalid = client.post(
        "/api/senders",
        json={"object": "uav1", "host": "127.0.0.1", "port": 1, "messages": []},
    )
    assert invalid.status_code == 422

    assert client.patch("/api/senders/999", json={"rate_hz": 10}).status_code == 404
    assert client.delete("/api/senders/999").status_code == 404

    bad_rate = client.post(
        "/api/senders",
        json={"object": "uav1", "host": "127.0.0.1", "port": 1, "rate_hz": -5},
    )
    assert bad_rate.status_code == 422


def test_patch_endpoint_change(client, station):
    sid = client.post(
        "/api/senders", json={"object": "uav1", "host": "127.0.0.1", "port": 14560}
    ).json()["id"]
    patched = client.patch(f"/api/senders/{sid}", json={"port": 14999})
    assert patched.json()["port"] == 14999
    assert patched.json()["host"] == "127.0.0.1"


def test_static_panel_mount(station):
    import os

    dist = os.path.join(os.path.dirname(__file__), "..", "frontend", "dist")
    if not os.path.isfile(os.path.join(dist, "index.html")):
        pytest.skip("control panel not built (run npm run build in frontend/)")
    from dataclasses import replace

    station.config = replace(station.config, static_dir=dist)
    client = TestClient(build_api(station))
    page = client.get("/")
    assert page.status_code == 200
    assert "mocaplink" in page.text
    assert client.get("/main.js").status_code == 200
    # API routes still win over the static mount
    assert client.get("/api/station").json()["ingest_source"] == "simulate"


def test_stream_pushes_objects_and_senders(client):
    with client.websocket_connect("/api/stream") as ws:
        first = ws.receive_json()
        second = ws.receive_json()
        types = {first["type"], second["type"]}
        assert types == {"objects", "senders"}
        objects_event = first if first["type"] == "objects" else second
        assert [o["name"] for o in objects_event["objects"]] == ["uav1", "uav2"]
        third = ws.receive_json()  # next 10 Hz objects push arrives on its own
        assert third["type"] == "objects"
