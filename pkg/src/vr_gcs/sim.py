"""Headless simulation core: vehicle, controller, scanner, script player.

One Simulation instance owns the authoritative vehicle state and voxel
map and is only ever advanced from a single task. Everything network
related lives in server.py; acceptance tests drive this class directly.

While grounded the physics is pinned (the vehicle rests on the floor)
and only the clock advances; the rigid-body integrator runs from takeoff
until the landing ramp detects touchdown.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .config import ServerConfig
from .controller import (CommandRejected, ControllerMemory, FlightMode,
                         PilotTracker, VelocityCommand, control_step)
from .dynamics import ControlInput, VehicleState, step
from .mapping import MeshChunk, VoxelMap
from .protocol import Pose as PoseMsg
from .rotations import quat_from_matrix
from .telemetry import LatencyLog
from .world import Pose, WorldModel, load_world, render_depth


class ScriptError(ValueError):
    """Command script failed to parse."""


@dataclass
class ScriptEvent:
    time_s: float
    kind: str                      # cmd_vel | takeoff | land
    args: Tuple[float, ...] = ()


def parse_script(path) -> List[ScriptEvent]:
    """Parse a command script: `t cmd_vel vx vy vz yaw_rate` / `t takeoff`
    / `t land` per line, with # comments."""
    events = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            try:
                t = float(parts[0])
            except ValueError:
                raise ScriptError(f"{path}:{lineno}: bad time {parts[0]!r}") \
                    from None
            if len(parts) < 2:
                raise ScriptError(f"{path}:{lineno}: missing command")
            kind = parts[1]
            if kind in ("takeoff", "land"):
                if len(parts) != 2:
                    raise ScriptError(f"{path}:{lineno}: {kind} takes no "
                                      f"arguments")
                events.append(ScriptEvent(t, kind))
            elif kind == "cmd_vel":
                if len(parts) != 6:
                    raise ScriptError(f"{path}:{lineno}: cmd_vel needs "
                                      f"vx vy vz yaw_rate")
                try:
                    args = tuple(float(x) for x in parts[2:])
                except ValueError as exc:
                    raise ScriptError(f"{path}:{lineno}: {exc}") from None
                events.append(ScriptEvent(t, kind, args))
            else:
                raise ScriptError(f"{path}:{lineno}: unknown command "
                                  f"{kind!r}")
    events.sort(key=lambda e: e.time_s)
    return events


@dataclass
class TickOutput:
    """What one physics tick produced for the streaming layer."""

    pose: Optional[PoseMsg] = None
    dirty_chunks: List[MeshChunk] = field(default_factory=list)


class Simulation:
    def __init__(self, config: Optional[ServerConfig] = None,
                 world: Optional[WorldModel] = None,
                 record_trajectory: bool = False):
        self.config = config or ServerConfig()
        if world is not None:
            self.world = world
        elif self.config.world_file:
            self.world = load_world(self.config.world_file)
        else:
            self.world = WorldModel()

        self.params = self.config.vehicle_params()
        self.gains = self.config.gains()
        self.tracker = PilotTracker(self.config.velocity_limits())
        self.memory = ControllerMemory()
        self.camera_spec = self.config.camera_spec()
        self.voxel_map = VoxelMap(self.config.voxel_size_m)
        self.latency_log = LatencyLog()

        self.state = VehicleState(
            position=np.array(self.config.start_position, dtype=float))
        self.tracker.target_position = self.state.position.copy()

        self.dt = 1.0 / self.config.physics_rate_hz
        self._scan_period = 1.0 / self.config.scan_rate_hz
        self._pose_period = 1.0 / self.config.pose_rate_hz
        self._next_scan = 0.0
        self._next_pose = 0.0

        self.record_trajectory = record_trajectory
        self.trajectory: List[VehicleState] = []
        if record_trajectory:
            self.trajectory.append(self.state.copy())

        self._script: List[ScriptEvent] = []
        self._script_cursor = 0

    # -- commands -------------------------------------------------------

    @property
    def mode(self) -> FlightMode:
        return self.tracker.mode

    def command_takeoff(self):
        self.tracker.request_takeoff(self.state)

    def command_land(self):
        self.tracker.request_land()

    def command_velocity(self, cmd: VelocityCommand) -> VelocityCommand:
        return self.tracker.set_command(cmd)

    def load_script(self, events: Sequence[ScriptEvent]):
        self._script = sorted(events, key=lambda e: e.time_s)
        self._script_cursor = 0

    @property
    def script_done(self) -> bool:
        return self._script_cursor >= len(self._script)

    def _apply_due_script_events(self):
        while (self._script_cursor < len(self._script)
               and self._script[self._script_cursor].time_s <= self.state.time):
            ev = self._script[self._script_cursor]
            self._script_cursor += 1
            try:
                if ev.kind == "takeoff":
                    self.command_takeoff()
                elif ev.kind == "land":
                    self.command_land()
                else:
                    self.command_velocity(VelocityCommand(*ev.args))
            except CommandRejected as exc:
                # A mis-timed script line is a script bug, not a sim fault.
                logging.getLogger(__name__).warning(
                    "script %s at t=%.3f rejected: %s",
                    ev.kind, ev.time_s, exc.reason)

    # -- stepping -------------------------------------------------------

    def camera_pose(self) -> Pose:
        body = Pose(self.state.attitude, self.state.position)
        return body.compose(self.camera_spec.mount)

    def _pin_grounded(self):
        landed = self.state
        self.state = VehicleState(
            position=np.array([landed.position[0], landed.position[1], 0.0]),
            velocity=np.zeros(3),
            attitude=landed.attitude.copy(),
            body_rates=np.zeros(3),
            time=landed.time + self.dt,
        )

    def tick(self) -> TickOutput:
        """Advance one physics step; run scan/pose schedules as they come due."""
        self._apply_due_script_events()

        setpoint = self.tracker.update(self.state, self.dt)
        if self.tracker.mode is FlightMode.GROUNDED:
            self._pin_grounded()
        else:
            inp, self.memory = control_step(self.state, setpoint, self.gains,
                                            self.params, self.memory)
            self.state = step(self.state, inp, self.params, self.dt)

        if self.record_trajectory:
            self.trajectory.append(self.state.copy())

        out = TickOutput()
        if self.state.time >= self._next_scan:
            self._next_scan += self._scan_period
            out.dirty_chunks = self.scan()
        if self.state.time >= self._next_pose:
            self._next_pose += self._pose_period
            out.pose = self.pose_message()
        return out

    def scan(self) -> List[MeshChunk]:
        """Render a depth image, fold it into the map, mesh dirty chunks."""
        image = render_depth(self.world, self.camera_pose(), self.camera_spec,
                             timestamp=self.state.time)
        dirty = self.voxel_map.integrate_scan(image)
        return [self.voxel_map.extract_chunk_mesh(c) for c in sorted(dirty)]

    def pose_message(self) -> PoseMsg:
        q = quat_from_matrix(self.state.attitude)
        return PoseMsg(t_ns=self.sim_time_ns(),
                       p=tuple(float(x) for x in self.state.position),
                       q=tuple(float(x) for x in q))

    def sim_time_ns(self) -> int:
        return int(round(self.state.time * 1e9))

    def run_for(self, duration_s: float):
        """Tick the simulation forward by a fixed amount of sim time."""
        end = self.state.time + duration_s - 0.5 * self.dt
        while self.state.time < end:
            self.tick()

    def run_script(self, events: Sequence[ScriptEvent],
                   settle_s: float = 5.0) -> List[VehicleState]:
        """Run a command script to completion plus a settling margin.

        Recording is forced on; returns the recorded trajectory. After the
        last event the run continues until the vehicle is grounded again
        (or the settle margin expires, whichever is later-bounded).
        """
        if not self.record_trajectory:
            self.record_trajectory = True
            self.trajectory = [self.state.copy()]
        self.load_script(events)
        last_t = events[-1].time_s if events else 0.0
        hard_stop = last_t + 60.0
        while self.state.time < hard_stop:
            self.tick()
            if (self.script_done and self.state.time >= last_t + settle_s
                    and self.tracker.mode is FlightMode.GROUNDED):
                break
        return self.trajectory


__all__ = ["Simulation", "ScriptEvent", "ScriptError", "parse_script",
           "TickOutput"]
