import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mocaplink.clocks import VirtualClock
from mocaplink.ingest import (
    ClockSkew,
    CorruptLog,
    MalformedRecord,
    NegativeTime,
    NonUnitQuaternion,
    ReplaySource,
    RigidBodySample,
    ScenarioSpec,
    SimulatorSource,
    UdpIngestSource,
    format_ingest_record,
    parse_ingest_record,
    read_replay_log,
    scenario_pose,
    simulate_step,
    write_replay_log,
)


class TestParseIngestRecord:
    def test_identity_construction(self):
        s = parse_ingest_record("MOCAP1 10 0.1 uav1 1000 0 500 1 0 0 0 0")
        assert s.frame_number == 10
        assert s.capture_time == 0.1
        assert s.object_name == "uav1"
        assert s.position_mm == (1000.0, 0.0, 500.0)
        assert s.orientation == (1.0, 0.0, 0.0, 0.0)
        assert not s.occluded

    def test_non_unit_quaternion_rejected(self):
        with pytest.raises(NonUnitQuaternion):
            parse_ingest_record("MOCAP1 1 0.0 a 0 0 0 0.7 0.7 0.7 0.7 0")

    def test_occluded_flag_carries_position(self):
        s = parse_ingest_record("MOCAP1 3 0.5 uav1 1.5 -2.5 3.5 1 0 0 0 1")
        assert s.occluded
        assert s.position_mm == (1.5, -2.5, 3.5)

    def test_near_unit_quaternion_renormalized(self):
        # deviation 1e-4: accepted and brought back to unit norm
        s = parse_ingest_record("MOCAP1 1 0.0 a 0 0 0 1.0001 0 0 0 0")
        assert math.isclose(sum(c * c for c in s.orientation), 1.0, abs_tol=1e-12)

    def test_bytes_datagram_accepted(self):
        s = parse_ingest_record(b"MOCAP1 1 0.0 a 1 2 3 1 0 0 0 0")
        assert s.position_mm == (1.0, 2.0, 3.0)

    @pytest.mark.parametrize(
        "record",
        [
            "",
            "NOPE 1 0.0 a 0 0 0 1 0 0 0 0",
            "MOCAP1 1 0.0 a 0 0 0 1 0 0 0",  # missing occluded
            "MOCAP1 x 0.0 a 0 0 0 1 0 0 0 0",
            "MOCAP1 1 0.0 a 0 0 zzz 1 0 0 0 0",
            "MOCAP1 1 0.0 a 0 0 0 1 0 0 0 2",  # bad occluded flag
            "MOCAP1 -1 0.0 a 0 0 0 1 0 0 0 0",
        ],
    )
    def test_malformed_records(self, record):
        with pytest.raises(MalformedRecord):
            parse_ingest_record(record)

    def test_negative_time(self):
        with pytest.raises(NegativeTime):
            parse_ingest_record("MOCAP1 1 -0.5 a 0 0 0 1 0 0 0 0")

    def test_format_rejects_whitespace_names(self):
        s = RigidBodySample(1, 0.0, "bad name", (0, 0, 0), (1, 0, 0, 0))
        with pytest.raises(MalformedRecord):
            format_ingest_record(s)


finite = st.floats(allow_nan=False, allow_infinity=False, width=64, min_value=-1e9, max_value=1e9)
quat_raw = st.tuples(*[st.floats(min_value=-1, max_value=1) for _ in range(4)]).filter(
    lambda q: math.sqrt(sum(c * c for c in q)) > 1e-3
)


@st.composite
def samples(draw):
    q = draw(quat_raw)
    n = math.sqrt(sum(c * c for c in q))
    return RigidBodySample(
        frame_number=draw(st.integers(min_value=0, max_value=2**40)),
        capture_time=draw(st.floats(min_value=0, max_value=1e7, allow_nan=False)),
        object_name=draw(st.text(alphabet="abcdefghijklmnopqrstuvwxyz0123456789_-", min_size=1, max_size=16)),
        position_mm=draw(st.tuples(finite, finite, finite)),
        orientation=tuple(c / n for c in q),
        occluded=draw(st.booleans()),
    )


@given(samples())
@settings(max_examples=300)
def test_wire_roundtrip_is_identity(sample):
    assert parse_ingest_record(format_ingest_record(sample)) == sample


class TestSimulator:
    def test_hover_is_exact(self):
        spec = ScenarioSpec(kind="hover", center_mm=(0, 0, 1000), noise_std_mm=0.0)
        for t in (0.0, 0.01, 1.0, 123.4):
            (s,) = simulate_step(spec, t)
            assert s.position_mm == (0.0, 0.0, 1000.0)
            assert s.orientation == (1.0, 0.0, 0.0, 0.0)

    def test_circle_at_phase_zero(self):
        spec = ScenarioSpec(kind="circle", center_mm=(0, 0, 800), radius_mm=2000, omega_rad_s=1.5)
        (s,) = simulate_step(spec, 0.0)
        assert s.position_mm == (2000.0, 0.0, 800.0)
        # tangential speed omega * r: finite-difference the closed form
        dt = 1e-6
        p0, _ = scenario_pose(spec, 0, 0.0)
        p1, _ = scenario_pose(spec, 0, dt)
        v = math.dist(p0, p1) / dt / 1000.0  # m/s
        assert v == pytest.approx(1.5 * 2.0, rel=1e-5)

    def test_line_kinematics(self):
        spec = ScenarioSpec(kind="line", start_mm=(100, 0, 500), velocity_mm_s=(250, -50, 10))
        (s,) = simulate_step(spec, 2.0)
        assert s.position_mm == (600.0, -100.0, 520.0)

    def test_waypoints_clamp_at_end(self):
        spec = ScenarioSpec(
            kind="waypoints",
            waypoints_mm=((0, 0, 0), (1000, 0, 0), (1000, 1000, 0)),
            speed_mm_s=1000.0,
        )
        (mid,) = simulate_step(spec, 0.5)
        assert mid.position_mm == (500.0, 0.0, 0.0)
        (corner,) = simulate_step(spec, 1.0)
        assert corner.position_mm == (1000.0, 0.0, 0.0)
        (end,) = simulate_step(spec, 10.0)
        assert end.position_mm == (1000.0, 1000.0, 0.0)

    def test_drop_probability_one_drops_everything(self):
        spec = ScenarioSpec(kind="hover", drop_probability=1.0)
        assert all(simulate_step(spec, k / 100.0) == [] for k in range(50))

    def test_deterministic_given_seed_and_time(self):
        spec = ScenarioSpec(kind="hover", noise_std_mm=5.0, seed=42)
        a = simulate_step(spec, 0.37)
        b = simulate_step(spec, 0.37)
        assert a == b
        assert a[0].position_mm != (0.0, 0.0, 1000.0)  # noise applied

    def test_noiseless_matches_closed_form_everywhere(self):
        spec = ScenarioSpec(
            kind="circle", center_mm=(500, -200, 1500), radius_mm=1234.5, omega_rad_s=0.7,
            objects=("a", "b"), rate_hz=240.0,
        )
        for t in (0.0, 0.1, 0.25, 7.77):
            for i, s in enumerate(simulate_step(spec, t)):
                expected, _ = scenario_pose(spec, i, t)
                for got, want in zip(s.position_mm, expected):
                    assert got == pytest.approx(want, rel=1e-9, abs=1e-9)

    def test_multiple_objects_distinct(self):
        spec = ScenarioSpec(kind="hover", objects=("a", "b", "c"))
        names = [s.object_name for s in simulate_step(spec, 0.0)]
        assert names == ["a", "b", "c"]

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"kind": "orbit"},
            {"rate_hz": 0},
            {"drop_probability": 1.5},
            {"noise_std_mm": -1},
            {"objects": ()},
            {"kind": "waypoints", "waypoints_mm": ((0, 0, 0),)},
        ],
    )
    def test_invalid_specs_rejected_at_construction(self, kwargs):
        with pytest.raises(ValueError):
            ScenarioSpec(**kwargs)


class TestReplayLog:
    def test_roundtrip_bit_equal(self, tmp_path):
        spec = ScenarioSpec(kind="circle", noise_std_mm=3.0, seed=7, rate_hz=100.0)
        samples = []
        for k in range(200):
            samples.extend(simulate_step(spec, k / 100.0))
        path = tmp_path / "run.log"
        write_replay_log(str(path), samples)
        assert list(read_replay_log(str(path))) == samples

    def test_empty_log_is_empty_stream(self, tmp_path):
        path = tmp_path / "empty.log"
        path.write_text("#MOCAPLOG v1\n")
        assert list(read_replay_log(str(path))) == []

    def test_bad_header(self, tmp_path):
        path = tmp_path / "bad.log"
        path.write_text("MOCAPLOG\n")
        with pytest.raises(CorruptLog):
            list(read_replay_log(str(path)))

    def test_garbage_line(self, tmp_path):
        path = tmp_path / "garbage.log"
        path.write_text("#MOCAPLOG v1\nMOCAP1 nope\n")
        with pytest.raises(CorruptLog):
            list(read_replay_log(str(path)))

    def test_clock_skew(self, tmp_path):
        path = tmp_path / "skew.log"
        path.write_text(
            "#MOCAPLOG v1\n"
            "MOCAP1 1 1.0 a 0 0 0 1 0 0 0 0\n"
            "MOCAP1 2 0.5 a 0 0 0 1 0 0 0 0\n"
        )
        with pytest.raises(ClockSkew):
            list(read_replay_log(str(path)))

    def test_realtime_pacing_offsets(self, tmp_path):
        path = tmp_path / "paced.log"
        path.write_text(
            "#MOCAPLOG v1\n"
            "MOCAP1 1 0.0 a 0 0 0 1 0 0 0 0\n"
            "MOCAP1 2 0.01 a 0 0 0 1 0 0 0 0\n"
        )
        clock = VirtualClock(5.0)
        events = list(ReplaySource(str(path), clock, "realtime").events())
        assert events[0][0] == 5.0
        assert events[1][0] - events[0][0] == pytest.approx(0.01)

    def test_fast_pacing_releases_immediately(self, tmp_path):
        path = tmp_path / "fast.log"
        path.write_text("#MOCAPLOG v1\nMOCAP1 1 3.0 a 0 0 0 1 0 0 0 0\n")
        events = list(ReplaySource(str(path), VirtualClock(), "fast").events())
        assert events[0][0] is None


class TestSources:
    def test_simulator_source_schedule(self):
        spec = ScenarioSpec(kind="hover", rate_hz=50.0)
        src = SimulatorSource(spec, VirtualClock(2.0))
        it = src.events()
        first = [next(it) for _ in range(3)]
        assert [due for due, _ in first] == [2.0, 2.02, 2.04]
        assert [s.frame_number for _, s in first] == [0, 1, 2]

    def test_udp_source_receives_and_skips_malformed(self):
        import socket
        import threading

        src = UdpIngestSource("127.0.0.1", 0)
        port = src.bound_port
        received = []

        def consume():
            for _, sample in src.events():
                received.append(sample)
                if len(received) >= 2:
                    return

        t = threading.Thread(target=consume, daemon=True)
        t.start()
        out = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        out.sendto(b"MOCAP1 1 0.0 uav9 1 2 3 1 0 0 0 0", ("127.0.0.1", port))
        out.sendto(b"not a record", ("127.0.0.1", port))
        out.sendto(b"MOCAP1 2 0.01 uav9 4 5 6 1 0 0 0 0", ("127.0.0.1", port))
        t.join(timeout=5.0)
        src.close()
        out.close()
        assert [s.frame_number for s in received] == [1, 2]
