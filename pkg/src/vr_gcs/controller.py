"""Cascaded position + geometric attitude controller.

Outer loop: desired force F = -Kp*(v - v_T) - Kv*(r - r_T) + m*g*e3 + m*a_T
(gains named by the error they multiply: Kp acts on velocity error, Kv on
position error). Thrust is the projection of F onto the body z axis; the
desired attitude frame is built from F and the heading vector, and the
inner loop turns the attitude/rate errors into torque.

Also hosts the pilot-facing side: a flight-mode state machine that turns
joystick velocity commands into position-holding setpoints, with takeoff
and landing ramps.
"""

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dynamics import ControlInput, VehicleParams, VehicleState
from .rotations import E3, hat, vee

EPS_FORCE = 1e-6    # N; below this |F_des| the desired frame is undefined
EPS_HEADING = 1e-6  # below this horizontal |c1| the heading is undefined


class DegenerateForceError(ValueError):
    """|F_des| too small to define a thrust direction."""


class DegenerateHeadingError(ValueError):
    """Body forward axis is within tolerance of vertical."""


class DegenerateCrossError(ValueError):
    """(e3 x h) x c3_des vanished; heading parallel to desired thrust."""


@dataclass
class Setpoint:
    """Targets consumed by the controller, all world frame except rates."""

    position_target: np.ndarray = field(default_factory=lambda: np.zeros(3))
    velocity_target: np.ndarray = field(default_factory=lambda: np.zeros(3))
    accel_feedforward: np.ndarray = field(default_factory=lambda: np.zeros(3))
    angular_velocity_target: np.ndarray = field(default_factory=lambda: np.zeros(3))
    heading_target: Optional[np.ndarray] = None  # unit 2D direction or None

    def __post_init__(self):
        self.position_target = np.asarray(self.position_target, dtype=float)
        self.velocity_target = np.asarray(self.velocity_target, dtype=float)
        self.accel_feedforward = np.asarray(self.accel_feedforward, dtype=float)
        self.angular_velocity_target = np.asarray(
            self.angular_velocity_target, dtype=float)
        if self.heading_target is not None:
            self.heading_target = np.asarray(self.heading_target, dtype=float)
            if abs(np.linalg.norm(self.heading_target) - 1.0) > 1e-9:
                raise ValueError("heading_target must be a unit 2D direction")


def _default_gain(diag):
    return lambda: np.diag(diag)


@dataclass
class GainSet:
    """Controller gains; defaults tuned for the default vehicle params."""

    gain_velocity_error: np.ndarray = field(
        default_factory=_default_gain([5.0, 5.0, 6.0]))
    gain_position_error: np.ndarray = field(
        default_factory=_default_gain([8.0, 8.0, 10.0]))
    gain_attitude: np.ndarray = field(
        default_factory=_default_gain([4.0, 4.0, 1.5]))
    gain_body_rate: np.ndarray = field(
        default_factory=_default_gain([0.8, 0.8, 0.4]))

    def __post_init__(self):
        for name in ("gain_velocity_error", "gain_position_error",
                     "gain_attitude", "gain_body_rate"):
            m = np.asarray(getattr(self, name), dtype=float)
            setattr(self, name, m)
            if np.any(np.linalg.eigvalsh(0.5 * (m + m.T)) <= 0.0):
                raise ValueError(f"{name} must be positive definite")


@dataclass
class ControllerMemory:
    """Fallback state for the degenerate branches; no other hidden state."""

    last_desired_attitude: np.ndarray = field(default_factory=lambda: np.eye(3))
    last_heading: np.ndarray = field(
        default_factory=lambda: np.array([1.0, 0.0, 0.0]))


def desired_force(state: VehicleState, sp: Setpoint, gains: GainSet,
                  params: VehicleParams) -> np.ndarray:
    """Outer-loop desired force, world frame (N)."""
    vel_err = state.velocity - sp.velocity_target
    pos_err = state.position - sp.position_target
    return (
        -gains.gain_velocity_error @ vel_err
        - gains.gain_position_error @ pos_err
        + params.mass * params.gravity * E3
        + params.mass * sp.accel_feedforward
    )


def desired_thrust(f_des: np.ndarray, attitude: np.ndarray,
                   thrust_max: float) -> float:
    """Project F_des onto the body z axis, clamped to [0, thrust_max]."""
    f = float(f_des @ attitude[:, 2])
    return min(max(f, 0.0), thrust_max)


def heading_vector(attitude: np.ndarray, eps: float = EPS_HEADING) -> np.ndarray:
    """Unit horizontal projection of the body forward axis c1.

    Raises DegenerateHeadingError when c1 is within eps of vertical;
    callers fall back to the last valid heading.
    """
    h = np.array([attitude[0, 0], attitude[1, 0], 0.0])
    n = np.linalg.norm(h)
    if n < eps:
        raise DegenerateHeadingError("forward axis is near vertical")
    return h / n


def desired_frame(f_des: np.ndarray, heading: np.ndarray,
                  eps: float = EPS_FORCE) -> np.ndarray:
    """Desired attitude from the force direction and heading vector.

    c3 = F/|F|; c1 = ((e3 x h) x c3) normalized; c2 = c3 x c1. The result
    depends only on the direction of f_des.
    """
    norm_f = np.linalg.norm(f_des)
    if norm_f < eps:
        raise DegenerateForceError("desired force magnitude below epsilon")
    c3 = f_des / norm_f
    c1_raw = np.cross(np.cross(E3, heading), c3)
    norm_c1 = np.linalg.norm(c1_raw)
    if norm_c1 < eps:
        raise DegenerateCrossError("heading parallel to desired thrust axis")
    c1 = c1_raw / norm_c1
    c2 = np.cross(c3, c1)
    return np.column_stack([c1, c2, c3])


def attitude_error(attitude: np.ndarray, attitude_des: np.ndarray) -> np.ndarray:
    """Geometric attitude error e_R = 0.5 * vee(Sd^T S - S^T Sd)."""
    m = attitude_des.T @ attitude - attitude.T @ attitude_des
    # m is exactly antisymmetric by construction; skip the skew check.
    return 0.5 * np.array([m[2, 1], m[0, 2], m[1, 0]])


def desired_torque(e_r: np.ndarray, body_rates: np.ndarray, sp: Setpoint,
                   gains: GainSet, torque_max: np.ndarray) -> np.ndarray:
    """Inner-loop torque: -K_R e_R - K_w (Omega - Omega_T), clamped."""
    e_w = body_rates - sp.angular_velocity_target
    t = -gains.gain_attitude @ e_r - gains.gain_body_rate @ e_w
    return np.clip(t, -torque_max, torque_max)


def control_step(state: VehicleState, sp: Setpoint, gains: GainSet,
                 params: VehicleParams,
                 memory: Optional[ControllerMemory] = None):
    """One full cascade evaluation: (state, setpoint) -> (input, memory).

    Degenerate force or heading reuses the previous desired frame/heading
    held in the explicit memory value (identity / +x on the first tick).
    """
    if memory is None:
        memory = ControllerMemory()

    f_des = desired_force(state, sp, gains, params)
    thrust = desired_thrust(f_des, state.attitude, params.thrust_max)

    if sp.heading_target is not None:
        heading = np.array([sp.heading_target[0], sp.heading_target[1], 0.0])
    else:
        try:
            heading = heading_vector(state.attitude)
        except DegenerateHeadingError:
            heading = memory.last_heading

    try:
        s_des = desired_frame(f_des, heading)
    except (DegenerateForceError, DegenerateCrossError):
        s_des = memory.last_desired_attitude

    e_r = attitude_error(state.attitude, s_des)
    torque = desired_torque(e_r, state.body_rates, sp, gains, params.torque_max)

    new_memory = ControllerMemory(last_desired_attitude=s_des,
                                  last_heading=heading)
    return ControlInput(thrust=thrust, torque=torque), new_memory


# --- pilot command handling -------------------------------------------------

class FlightMode(enum.Enum):
    GROUNDED = "grounded"
    TAKEOFF = "takeoff"
    FLYING = "flying"
    LANDING = "landing"


@dataclass
class VelocityCommand:
    """Joystick intent: planar velocity, vertical velocity, yaw rate."""

    vx: float = 0.0
    vy: float = 0.0
    vz: float = 0.0
    yaw_rate: float = 0.0


@dataclass
class VelocityLimits:
    v_max: float = 1.0          # m/s, per component
    yaw_rate_max: float = 1.0   # rad/s
    takeoff_altitude: float = 1.0
    climb_rate: float = 0.5
    descent_gain: float = 0.5   # descent speed = clamp(gain*z, min, max)
    descent_min: float = 0.08
    descent_max: float = 0.5
    touchdown_z: float = 0.01


class CommandRejected(Exception):
    """Mode machine refused a pilot command; .reason carries the cause."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class PilotTracker:
    """Integrates velocity commands into a position-holding setpoint.

    The tracked setpoint position follows the commanded velocity (rotated
    into the heading frame) and freezes in place when the sticks center,
    so releasing the stick means "hold here". Takeoff and landing are
    vertical ramps managed by the mode machine.
    """

    def __init__(self, limits: Optional[VelocityLimits] = None):
        self.limits = limits or VelocityLimits()
        self.mode = FlightMode.GROUNDED
        self.command = VelocityCommand()
        self.target_position = np.zeros(3)
        self.heading_angle = 0.0

    @property
    def heading(self) -> np.ndarray:
        return np.array([np.cos(self.heading_angle), np.sin(self.heading_angle)])

    def set_command(self, cmd: VelocityCommand) -> VelocityCommand:
        """Latch a velocity command; raises CommandRejected unless flying.

        Clamped at ingestion: the planar speed to v_max (scaled, so the
        commanded direction is kept and no world-frame component can
        exceed v_max after the heading rotation), vertical to v_max, yaw
        rate to its own limit.
        """
        if self.mode is not FlightMode.FLYING:
            raise CommandRejected("not-in-flight")
        lim = self.limits
        vx, vy = cmd.vx, cmd.vy
        planar = np.hypot(vx, vy)
        if planar > lim.v_max:
            vx *= lim.v_max / planar
            vy *= lim.v_max / planar
        clamped = VelocityCommand(
            vx=vx,
            vy=vy,
            vz=float(np.clip(cmd.vz, -lim.v_max, lim.v_max)),
            yaw_rate=float(np.clip(cmd.yaw_rate, -lim.yaw_rate_max,
                                   lim.yaw_rate_max)),
        )
        self.command = clamped
        return clamped

    def request_takeoff(self, state: VehicleState):
        if self.mode is not FlightMode.GROUNDED:
            raise CommandRejected("not-armed")
        self.mode = FlightMode.TAKEOFF
        self.command = VelocityCommand()
        self.target_position = state.position.copy()
        self.target_position[2] = 0.0
        c1 = state.attitude[:, 0]
        if np.hypot(c1[0], c1[1]) > EPS_HEADING:
            self.heading_angle = float(np.arctan2(c1[1], c1[0]))

    def request_land(self):
        if self.mode not in (FlightMode.TAKEOFF, FlightMode.FLYING):
            raise CommandRejected("not-airborne")
        self.mode = FlightMode.LANDING
        self.command = VelocityCommand()

    def update(self, state: VehicleState, dt: float) -> Setpoint:
        """Advance the tracked setpoint by dt and return it."""
        lim = self.limits
        vel = np.zeros(3)
        yaw_rate = 0.0

        if self.mode is FlightMode.TAKEOFF:
            vel[2] = lim.climb_rate
            if self.target_position[2] >= lim.takeoff_altitude:
                self.target_position[2] = lim.takeoff_altitude
                vel[2] = 0.0
                self.mode = FlightMode.FLYING
        elif self.mode is FlightMode.FLYING:
            cmd = self.command
            h = self.heading
            vel[0] = cmd.vx * h[0] - cmd.vy * h[1]
            vel[1] = cmd.vx * h[1] + cmd.vy * h[0]
            vel[2] = cmd.vz
            yaw_rate = cmd.yaw_rate
        elif self.mode is FlightMode.LANDING:
            if state.position[2] <= lim.touchdown_z:
                self.mode = FlightMode.GROUNDED
                self.command = VelocityCommand()
                self.target_position = state.position.copy()
                self.target_position[2] = 0.0
            else:
                down = np.clip(lim.descent_gain * state.position[2],
                               lim.descent_min, lim.descent_max)
                vel[2] = -down

        self.target_position = self.target_position + vel * dt
        # Let the target dip slightly below ground while landing so the
        # controller keeps pushing down until touchdown triggers.
        self.target_position[2] = max(self.target_position[2], -0.05)
        self.heading_angle += yaw_rate * dt

        return Setpoint(
            position_target=self.target_position.copy(),
            velocity_target=vel,
            angular_velocity_target=np.array([0.0, 0.0, yaw_rate]),
            heading_target=self.heading,
        )


__all__ = [
    "Setpoint", "GainSet", "ControllerMemory", "VelocityCommand",
    "VelocityLimits", "FlightMode", "PilotTracker", "CommandRejected",
    "desired_force", "desired_thrust", "heading_vector", "desired_frame",
    "attitude_error", "desired_torque", "control_step", "hat", "vee",
    "EPS_FORCE", "EPS_HEADING",
    "DegenerateForceError", "DegenerateHeadingError", "DegenerateCrossError",
]
