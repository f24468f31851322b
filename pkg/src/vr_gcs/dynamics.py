"""Rigid-body hexacopter dynamics at a fixed timestep.

Translational motion: m*r_ddot = -m*g*e3 + f*c3 (thrust along the body
z axis). Rotational motion: J*Omega_dot + Omega x J*Omega = T, expressed
in the body frame. States integrate with classical RK4 and the attitude
matrix is re-orthonormalized after every step, so Euler angles only ever
appear at I/O boundaries.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .rotations import E3, rot_x, rot_y, rot_z

# Attitude drift tolerance enforced after each integration step.
ORTHONORMALITY_TOL = 1e-9


class SingularAttitudeError(ValueError):
    """Euler kinematics requested too close to the pitch singularity."""


class InvalidStateError(ValueError):
    """State or input contains non-finite components."""


@dataclass
class VehicleParams:
    """Physical constants of the simulated hexacopter."""

    mass: float = 2.0
    inertia: np.ndarray = field(default_factory=lambda: np.diag([0.02, 0.02, 0.04]))
    gravity: float = 9.81
    thrust_max: float = 60.0
    torque_max: np.ndarray = field(default_factory=lambda: np.array([2.0, 2.0, 1.0]))

    def __post_init__(self):
        self.inertia = np.asarray(self.inertia, dtype=float)
        self.torque_max = np.asarray(self.torque_max, dtype=float)
        if self.mass <= 0.0:
            raise ValueError("mass must be positive")
        if self.gravity <= 0.0:
            raise ValueError("gravity must be positive")
        if not np.allclose(self.inertia, self.inertia.T):
            raise ValueError("inertia tensor must be symmetric")
        if np.any(np.linalg.eigvalsh(self.inertia) <= 0.0):
            raise ValueError("inertia tensor must be positive definite")
        if self.thrust_max <= self.mass * self.gravity:
            raise ValueError("thrust_max must exceed hover weight m*g")
        self._inertia_inv = np.linalg.inv(self.inertia)

    @property
    def inertia_inv(self) -> np.ndarray:
        return self._inertia_inv


@dataclass
class VehicleState:
    """Full rigid-body state: world-frame pose plus body-frame rates."""

    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    attitude: np.ndarray = field(default_factory=lambda: np.eye(3))
    body_rates: np.ndarray = field(default_factory=lambda: np.zeros(3))
    time: float = 0.0

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)
        self.velocity = np.asarray(self.velocity, dtype=float)
        self.attitude = np.asarray(self.attitude, dtype=float)
        self.body_rates = np.asarray(self.body_rates, dtype=float)

    def copy(self) -> "VehicleState":
        return VehicleState(
            self.position.copy(), self.velocity.copy(),
            self.attitude.copy(), self.body_rates.copy(), self.time,
        )

    def is_finite(self) -> bool:
        return bool(
            np.all(np.isfinite(self.position))
            and np.all(np.isfinite(self.velocity))
            and np.all(np.isfinite(self.attitude))
            and np.all(np.isfinite(self.body_rates))
            and np.isfinite(self.time)
        )


@dataclass
class ControlInput:
    """Collective thrust (N, along c3) and body-frame torque (N*m)."""

    thrust: float = 0.0
    torque: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.torque = np.asarray(self.torque, dtype=float)


def euler_rates_to_body_rates(euler, euler_rates) -> np.ndarray:
    """Map 3-2-1 Euler angle rates to body angular velocity (p, q, r).

    Standard kinematics:
        p = phi_dot - psi_dot*sin(theta)
        q = theta_dot*cos(phi) + psi_dot*sin(phi)*cos(theta)
        r = -theta_dot*sin(phi) + psi_dot*cos(phi)*cos(theta)
    Raises SingularAttitudeError within 1e-6 rad of |theta| = pi/2.
    """
    phi, theta, _ = euler
    if abs(theta) >= np.pi / 2 - 1e-6:
        raise SingularAttitudeError(f"pitch {theta} too close to +-pi/2")
    dphi, dtheta, dpsi = euler_rates
    p = dphi - dpsi * np.sin(theta)
    q = dtheta * np.cos(phi) + dpsi * np.sin(phi) * np.cos(theta)
    r = -dtheta * np.sin(phi) + dpsi * np.cos(phi) * np.cos(theta)
    return np.array([p, q, r])


def rotation_from_euler(phi: float, theta: float, psi: float) -> np.ndarray:
    """Body->world rotation for 3-2-1 angles: Rz(psi) @ Ry(theta) @ Rx(phi)."""
    return rot_z(psi) @ rot_y(theta) @ rot_x(phi)


def euler_from_rotation(s: np.ndarray):
    """Extract 3-2-1 Euler angles (phi, theta, psi) from a rotation matrix.

    theta is taken in (-pi/2, pi/2); callers needing attitude inside the
    control loop should stick with the matrix itself.
    """
    theta = np.arcsin(np.clip(-s[2, 0], -1.0, 1.0))
    phi = np.arctan2(s[2, 1], s[2, 2])
    psi = np.arctan2(s[1, 0], s[0, 0])
    return phi, theta, psi


def translational_accel(state: VehicleState, inp: ControlInput,
                        params: VehicleParams) -> np.ndarray:
    """World-frame acceleration: (-m*g*e3 + f*c3) / m."""
    c3 = state.attitude[:, 2]
    return (-params.mass * params.gravity * E3 + inp.thrust * c3) / params.mass


def angular_accel(state: VehicleState, inp: ControlInput,
                  params: VehicleParams) -> np.ndarray:
    """Body-frame angular acceleration: J^-1 (T - Omega x J Omega)."""
    omega = state.body_rates
    return params.inertia_inv @ (inp.torque - np.cross(omega, params.inertia @ omega))


# The integrator below runs half a million times per simulated minute, so
# the RK4 core works on flat float tuples instead of numpy arrays; the
# numpy round trip would dominate the cost otherwise.

def _rhs(v, s, w, thrust_over_m, g, torque, jm, jinv):
    ax = thrust_over_m * s[2]
    ay = thrust_over_m * s[5]
    az = thrust_over_m * s[8] - g
    wx, wy, wz = w
    # S_dot = S @ hat(Omega), rows of S flattened as s[0..8]
    sd = (s[1] * wz - s[2] * wy, -s[0] * wz + s[2] * wx, s[0] * wy - s[1] * wx,
          s[4] * wz - s[5] * wy, -s[3] * wz + s[5] * wx, s[3] * wy - s[4] * wx,
          s[7] * wz - s[8] * wy, -s[6] * wz + s[8] * wx, s[6] * wy - s[7] * wx)
    hx = jm[0] * wx + jm[1] * wy + jm[2] * wz
    hy = jm[3] * wx + jm[4] * wy + jm[5] * wz
    hz = jm[6] * wx + jm[7] * wy + jm[8] * wz
    tx = torque[0] - (wy * hz - wz * hy)
    ty = torque[1] - (wz * hx - wx * hz)
    tz = torque[2] - (wx * hy - wy * hx)
    wd = (jinv[0] * tx + jinv[1] * ty + jinv[2] * tz,
          jinv[3] * tx + jinv[4] * ty + jinv[5] * tz,
          jinv[6] * tx + jinv[7] * ty + jinv[8] * tz)
    return v, (ax, ay, az), sd, wd


def _axpy(x, k, h):
    return tuple(xi + h * ki for xi, ki in zip(x, k))


def _rk4_combine(x, k1, k2, k3, k4, sixth):
    return tuple(xi + sixth * (a + 2.0 * b + 2.0 * c + d)
                 for xi, a, b, c, d in zip(x, k1, k2, k3, k4))


def _gram_schmidt_columns(s):
    """Re-orthonormalize a flattened row-major 3x3 by its columns."""
    c1 = (s[0], s[3], s[6])
    c2 = (s[1], s[4], s[7])
    n1 = math.sqrt(c1[0] * c1[0] + c1[1] * c1[1] + c1[2] * c1[2])
    b1 = (c1[0] / n1, c1[1] / n1, c1[2] / n1)
    d = c2[0] * b1[0] + c2[1] * b1[1] + c2[2] * b1[2]
    u2 = (c2[0] - d * b1[0], c2[1] - d * b1[1], c2[2] - d * b1[2])
    n2 = math.sqrt(u2[0] * u2[0] + u2[1] * u2[1] + u2[2] * u2[2])
    b2 = (u2[0] / n2, u2[1] / n2, u2[2] / n2)
    # b3 = b1 x b2 keeps the frame right-handed (det = +1).
    b3 = (b1[1] * b2[2] - b1[2] * b2[1],
          b1[2] * b2[0] - b1[0] * b2[2],
          b1[0] * b2[1] - b1[1] * b2[0])
    return (b1[0], b2[0], b3[0],
            b1[1], b2[1], b3[1],
            b1[2], b2[2], b3[2])


def _step_core(r, v, s, w, thrust_over_m, g, torque, jm, jinv, dt):
    half = 0.5 * dt
    k1 = _rhs(v, s, w, thrust_over_m, g, torque, jm, jinv)
    k2 = _rhs(_axpy(v, k1[1], half), _axpy(s, k1[2], half),
              _axpy(w, k1[3], half), thrust_over_m, g, torque, jm, jinv)
    k3 = _rhs(_axpy(v, k2[1], half), _axpy(s, k2[2], half),
              _axpy(w, k2[3], half), thrust_over_m, g, torque, jm, jinv)
    k4 = _rhs(_axpy(v, k3[1], dt), _axpy(s, k3[2], dt),
              _axpy(w, k3[3], dt), thrust_over_m, g, torque, jm, jinv)
    sixth = dt / 6.0
    return (_rk4_combine(r, k1[0], k2[0], k3[0], k4[0], sixth),
            _rk4_combine(v, k1[1], k2[1], k3[1], k4[1], sixth),
            _gram_schmidt_columns(
                _rk4_combine(s, k1[2], k2[2], k3[2], k4[2], sixth)),
            _rk4_combine(w, k1[3], k2[3], k3[3], k4[3], sixth))


def _unpack(state: VehicleState, inp: ControlInput, params: VehicleParams):
    # .tolist() unboxes to plain Python floats; the RK4 core is ~10x
    # slower on numpy scalar objects.
    r = state.position.tolist()
    v = state.velocity.tolist()
    s = [x for row in state.attitude.tolist() for x in row]
    w = state.body_rates.tolist()
    torque = inp.torque.tolist()
    if not all(map(math.isfinite, (*r, *v, *s, *w, *torque,
                                   inp.thrust, state.time))):
        raise InvalidStateError("non-finite state or control input")
    jm = [x for row in params.inertia.tolist() for x in row]
    jinv = [x for row in params.inertia_inv.tolist() for x in row]
    return r, v, s, w, inp.thrust / params.mass, params.gravity, torque, jm, jinv


def _pack(r, v, s, w, time: float) -> VehicleState:
    if not all(map(math.isfinite, (*r, *v, *s, *w))):
        raise InvalidStateError("integration produced non-finite state")
    return VehicleState(np.array(r), np.array(v),
                        np.array(s).reshape(3, 3), np.array(w), time)


def step(state: VehicleState, inp: ControlInput, params: VehicleParams,
         dt: float) -> VehicleState:
    """Advance the state by one classical RK4 step of length dt.

    dt must lie in (0, 0.01] s. The attitude is projected back onto SO(3)
    (Gram-Schmidt over the columns) after the update so orthonormality
    never drifts past 1e-9.
    """
    if not (0.0 < dt <= 0.01):
        raise ValueError(f"dt={dt} outside (0, 0.01]")
    r, v, s, w, thrust_over_m, g, torque, jm, jinv = _unpack(state, inp, params)
    r, v, s, w = _step_core(r, v, s, w, thrust_over_m, g, torque, jm, jinv, dt)
    return _pack(r, v, s, w, state.time + dt)


def integrate_many(state: VehicleState, inp: ControlInput,
                   params: VehicleParams, dt: float, steps: int) -> VehicleState:
    """Run `steps` RK4 steps under a constant input without re-boxing.

    Identical arithmetic to calling step() in a loop (same core), minus
    the per-step array construction; intended for long property runs.
    """
    if not (0.0 < dt <= 0.01):
        raise ValueError(f"dt={dt} outside (0, 0.01]")
    r, v, s, w, thrust_over_m, g, torque, jm, jinv = _unpack(state, inp, params)
    time = state.time
    for _ in range(steps):
        r, v, s, w = _step_core(r, v, s, w, thrust_over_m, g, torque,
                                jm, jinv, dt)
        time += dt
    return _pack(r, v, s, w, time)


def hover_input(params: VehicleParams) -> ControlInput:
    """Exact hover equilibrium input for a level attitude."""
    return ControlInput(thrust=params.mass * params.gravity,
                        torque=np.zeros(3))


__all__ = [
    "VehicleParams", "VehicleState", "ControlInput",
    "euler_rates_to_body_rates", "rotation_from_euler", "euler_from_rotation",
    "translational_accel", "angular_accel", "step", "integrate_many",
    "hover_input",
    "SingularAttitudeError", "InvalidStateError", "ORTHONORMALITY_TOL",
]
