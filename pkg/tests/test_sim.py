import subprocess
import sys

import numpy as np
import pytest

from vr_gcs.config import ConfigError, ServerConfig, load_config
from vr_gcs.controller import CommandRejected, FlightMode, VelocityCommand
from vr_gcs.sim import ScriptError, ScriptEvent, Simulation, parse_script

MISSION_SCRIPT = [
    ScriptEvent(0.5, "takeoff"),
    ScriptEvent(4.0, "cmd_vel", (1.0, 0.0, 0.0, 0.0)),
    ScriptEvent(7.3, "cmd_vel", (0.0, 0.0, 0.0, 0.0)),
    ScriptEvent(9.0, "cmd_vel", (-1.0, 0.0, 0.0, 0.0)),
    ScriptEvent(12.3, "cmd_vel", (0.0, 0.0, 0.0, 0.0)),
    ScriptEvent(14.0, "land"),
]


def test_parse_script(tmp_path):
    path = tmp_path / "mission.script"
    path.write_text(
        "# mission\n"
        "0.5 takeoff\n"
        "4.0 cmd_vel 1.0 0 0 0\n"
        "14 land\n")
    events = parse_script(path)
    assert [e.kind for e in events] == ["takeoff", "cmd_vel", "land"]
    assert events[1].args == (1.0, 0.0, 0.0, 0.0)


@pytest.mark.parametrize("line", [
    "abc takeoff", "1.0 warp", "1.0 cmd_vel 1 2", "1.0 takeoff now",
    "1.0", "1.0 cmd_vel a b c d",
])
def test_parse_script_rejects_bad_lines(tmp_path, line):
    path = tmp_path / "bad.script"
    path.write_text(line + "\n")
    with pytest.raises(ScriptError):
        parse_script(path)


def test_grounded_vehicle_stays_put(wall_world):
    sim = Simulation(ServerConfig(), world=wall_world)
    sim.run_for(1.0)
    assert sim.mode is FlightMode.GROUNDED
    assert np.array_equal(sim.state.position, np.zeros(3))
    assert sim.state.time == pytest.approx(1.0, abs=1e-9)


def test_command_gating(wall_world):
    sim = Simulation(ServerConfig(), world=wall_world)
    with pytest.raises(CommandRejected):
        sim.command_velocity(VelocityCommand(vx=1.0))
    with pytest.raises(CommandRejected):
        sim.command_land()
    sim.command_takeoff()
    with pytest.raises(CommandRejected):
        sim.command_takeoff()  # already airborne
    assert sim.mode is FlightMode.TAKEOFF


def test_takeoff_then_hover(wall_world):
    sim = Simulation(ServerConfig(), world=wall_world)
    sim.command_takeoff()
    sim.run_for(6.0)
    assert sim.mode is FlightMode.FLYING
    assert sim.state.position[2] == pytest.approx(1.0, abs=0.02)


def test_scan_and_pose_schedules(wall_world):
    sim = Simulation(ServerConfig(), world=wall_world)
    poses = []
    scans = 0
    for _ in range(int(round(1.0 / sim.dt))):
        out = sim.tick()
        if out.pose is not None:
            poses.append(out.pose)
        if out.dirty_chunks:
            scans += 1
    assert 28 <= len(poses) <= 31          # ~30 Hz
    assert scans >= 1                       # wall visible from the pad
    t_ns = [p.t_ns for p in poses]
    assert all(b > a for a, b in zip(t_ns, t_ns[1:]))


def test_mission_trajectory_deterministic(wall_world):
    def run():
        sim = Simulation(ServerConfig(), world=wall_world,
                         record_trajectory=True)
        return sim.run_script(MISSION_SCRIPT, settle_s=2.0)

    t1, t2 = run(), run()
    assert len(t1) == len(t2)
    for a, b in zip(t1, t2):
        assert np.array_equal(a.position, b.position)
        assert np.array_equal(a.velocity, b.velocity)
        assert np.array_equal(a.attitude, b.attitude)
        assert np.array_equal(a.body_rates, b.body_rates)


def test_setpoint_stream_respects_v_max(wall_world):
    config = ServerConfig()
    sim = Simulation(config, world=wall_world)
    sim.command_takeoff()
    sim.run_for(4.0)
    sim.command_velocity(VelocityCommand(vx=99.0, vy=-99.0, vz=99.0,
                                         yaw_rate=99.0))
    for _ in range(200):
        sp = sim.tracker.update(sim.state, sim.dt)
        assert np.max(np.abs(sp.velocity_target)) <= config.v_max + 1e-12
        sim.tick()


# --- config ----------------------------------------------------------------------

def test_load_config(tmp_path):
    path = tmp_path / "server.cfg"
    path.write_text(
        "# sample\n"
        "listen_port = 9100\n"
        "v_max = 2.5\n"
        "viewer_offset_m = 5 0 1\n"
        "inertia_diag = 0.03 0.03 0.05\n"
        "world_file = /tmp/wall.world\n")
    config = load_config(path)
    assert config.listen_port == 9100
    assert config.v_max == 2.5
    assert config.viewer_offset_m == (5.0, 0.0, 1.0)
    assert config.inertia_diag == (0.03, 0.03, 0.05)
    assert config.world_file == "/tmp/wall.world"


def test_load_config_rejects_unknown_key(tmp_path):
    path = tmp_path / "server.cfg"
    path.write_text("warp_speed = 9\n")
    with pytest.raises(ConfigError, match="warp_speed"):
        load_config(path)


def test_load_config_rejects_bad_values(tmp_path):
    path = tmp_path / "server.cfg"
    path.write_text("v_max = fast\n")
    with pytest.raises(ConfigError):
        load_config(path)
    path.write_text("v_max = -1\n")
    with pytest.raises(ConfigError):
        load_config(path)
    path.write_text("just a line\n")
    with pytest.raises(ConfigError):
        load_config(path)


# --- CLI -------------------------------------------------------------------------

def test_cli_scripted_run_and_analyze(tmp_path):
    world = tmp_path / "wall.world"
    world.write_text("box 4.8 -2 0 5.0 2 3\n")
    script = tmp_path / "hop.script"
    script.write_text("0.2 takeoff\n2.0 land\n")
    state_log = tmp_path / "states.csv"
    out = subprocess.run(
        [sys.executable, "-m", "vr_gcs.cli", "serve",
         "--world", str(world), "--script", str(script), "--fast",
         "--port", "0", "--state-log", str(state_log)],
        capture_output=True, text=True, timeout=120)
    assert out.returncode == 0, out.stderr
    lines = state_log.read_text().splitlines()
    assert lines[0] == "t,x,y,z,vx,vy,vz"
    assert len(lines) > 1000
    final_z = float(lines[-1].split(",")[3])
    assert final_z == pytest.approx(0.0, abs=1e-6)


def test_cli_analyze_reports_stats(tmp_path):
    from vr_gcs.telemetry import LatencyLog, export_csv
    from vr_gcs.protocol import LatencyProbe
    log = LatencyLog()
    for i, ms in enumerate([10.0, 20.0, 30.0]):
        log.add(LatencyProbe(i, i * 1000, i * 1000 + int(ms * 2e6)))
    csv_path = tmp_path / "latency.csv"
    export_csv(log, csv_path)
    out = subprocess.run(
        [sys.executable, "-m", "vr_gcs.cli", "analyze", "--csv",
         str(csv_path)],
        capture_output=True, text=True, timeout=60)
    assert out.returncode == 0
    assert "median one-way latency" in out.stdout
    assert "20.000 ms" in out.stdout


def test_cli_serve_bad_world_exits_nonzero(tmp_path):
    world = tmp_path / "bad.world"
    world.write_text("box 1 1 1 0 0 0\n")
    out = subprocess.run(
        [sys.executable, "-m", "vr_gcs.cli", "serve", "--world", str(world),
         "--duration", "0.1"],
        capture_output=True, text=True, timeout=60)
    assert out.returncode != 0
