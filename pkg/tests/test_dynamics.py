import math

import numpy as np
import pytest

from vr_gcs.dynamics import (ControlInput, InvalidStateError,
                             SingularAttitudeError, VehicleParams,
                             VehicleState, angular_accel,
                             euler_from_rotation, euler_rates_to_body_rates,
                             hover_input, integrate_many, rotation_from_euler,
                             step, translational_accel)
from vr_gcs.rotations import rot_x


# --- Euler kinematics --------------------------------------------------------

def test_body_rates_identity_at_level_attitude():
    out = euler_rates_to_body_rates((0.0, 0.0, 0.0), (0.1, 0.2, 0.3))
    assert np.allclose(out, [0.1, 0.2, 0.3], atol=1e-15)


def test_body_rates_zero_rates():
    out = euler_rates_to_body_rates((0.3, 0.2, 0.1), (0.0, 0.0, 0.0))
    assert np.array_equal(out, np.zeros(3))


def test_body_rates_pitched_yaw_rate():
    # Hand substitution: phi=0, theta=0.5, pure yaw rate.
    out = euler_rates_to_body_rates((0.0, 0.5, 0.0), (0.0, 0.0, 1.0))
    assert np.allclose(out, [-math.sin(0.5), 0.0, math.cos(0.5)], atol=1e-15)


def test_body_rates_singularity_rejected():
    with pytest.raises(SingularAttitudeError):
        euler_rates_to_body_rates((0.0, math.pi / 2, 0.0), (0.0, 0.0, 1.0))


def test_rotation_from_euler_identity():
    assert np.allclose(rotation_from_euler(0, 0, 0), np.eye(3), atol=1e-15)


def test_rotation_from_euler_yaw_quarter_turn():
    s = rotation_from_euler(0.0, 0.0, math.pi / 2)
    assert np.allclose(s[:, 0], [0.0, 1.0, 0.0], atol=1e-15)


def test_euler_round_trip(rng):
    worst = 0.0
    for _ in range(1000):
        phi = rng.uniform(-math.pi, math.pi)
        theta = rng.uniform(-math.pi / 2 + 0.05, math.pi / 2 - 0.05)
        psi = rng.uniform(-math.pi, math.pi)
        back = euler_from_rotation(rotation_from_euler(phi, theta, psi))
        worst = max(worst, np.max(np.abs(np.array(back) - [phi, theta, psi])))
    assert worst < 1e-9


def test_rotation_from_euler_special_orthogonal(rng):
    for _ in range(200):
        s = rotation_from_euler(*rng.uniform(-3, 3, 3))
        assert np.max(np.abs(s.T @ s - np.eye(3))) < 1e-14
        assert abs(np.linalg.det(s) - 1.0) < 1e-14


# --- force and torque models -------------------------------------------------

def test_free_fall_acceleration():
    params = VehicleParams(mass=1.0, thrust_max=30.0)
    state = VehicleState()
    accel = translational_accel(state, ControlInput(thrust=0.0), params)
    assert np.allclose(accel, [0.0, 0.0, -9.81], atol=1e-15)


def test_hover_acceleration_is_zero(params):
    accel = translational_accel(VehicleState(), hover_input(params), params)
    assert np.allclose(accel, np.zeros(3), atol=1e-15)


def test_rolled_thrust_direction():
    # c3 of a roll by pi/6 is (0, -sin, cos); thrust mg along it.
    params = VehicleParams(mass=1.0, thrust_max=30.0)
    phi = math.pi / 6
    state = VehicleState(attitude=rot_x(phi))
    accel = translational_accel(state, ControlInput(thrust=9.81), params)
    expected = 9.81 * np.array([0.0, -math.sin(phi), math.cos(phi)]) \
        - np.array([0.0, 0.0, 9.81])
    assert np.allclose(accel, expected, atol=1e-12)


def test_angular_accel_zero_cases(params):
    state = VehicleState()
    assert np.array_equal(angular_accel(state, ControlInput(), params),
                          np.zeros(3))


def test_principal_axis_spin_is_steady():
    params = VehicleParams(inertia=np.diag([1.0, 2.0, 3.0]), mass=1.0,
                           thrust_max=30.0)
    state = VehicleState(body_rates=np.array([0.0, 0.0, 2.0]))
    assert np.allclose(angular_accel(state, ControlInput(), params),
                       np.zeros(3), atol=1e-15)


def test_angular_accel_against_brute_force_cross():
    params = VehicleParams(inertia=np.diag([1.0, 2.0, 3.0]), mass=1.0,
                           thrust_max=30.0)
    omega = np.array([1.0, 1.0, 0.0])
    state = VehicleState(body_rates=omega)
    # Independent evaluation: h = J w, cross by components.
    h = np.diag([1.0, 2.0, 3.0]) @ omega
    cross = np.array([omega[1] * h[2] - omega[2] * h[1],
                      omega[2] * h[0] - omega[0] * h[2],
                      omega[0] * h[1] - omega[1] * h[0]])
    expected = np.linalg.inv(np.diag([1.0, 2.0, 3.0])) @ (-cross)
    out = angular_accel(state, ControlInput(), params)
    assert np.allclose(out, expected, atol=1e-14)
    assert np.allclose(out, [0.0, 0.0, -1.0 / 3.0], atol=1e-14)


# --- integrator ---------------------------------------------------------------

def test_ballistic_matches_closed_form(params):
    state = VehicleState()
    for _ in range(1000):
        state = step(state, ControlInput(), params, 1e-3)
    assert abs(state.position[2] - (-0.5 * 9.81)) <= 1e-6
    assert abs(state.velocity[2] - (-9.81)) <= 1e-6


def test_hover_is_equilibrium(params):
    state = VehicleState(position=np.array([0.0, 0.0, 1.0]))
    inp = hover_input(params)
    state = integrate_many(state, inp, params, 2e-3, 5000)  # 10 s
    assert np.max(np.abs(state.position - [0.0, 0.0, 1.0])) < 1e-9
    assert np.max(np.abs(state.velocity)) < 1e-9


def test_torque_free_momentum_conservation(params):
    state = VehicleState(body_rates=np.array([1.0, 0.5, 0.8]))
    h0 = np.linalg.norm(params.inertia @ state.body_rates)
    state = integrate_many(state, ControlInput(), params, 1e-3, 10000)
    h1 = np.linalg.norm(params.inertia @ state.body_rates)
    assert abs(h1 - h0) / h0 <= 1e-6


def _tumbling_run(params, dt, duration=1.0):
    state = VehicleState(velocity=np.array([0.3, 0.1, 0.0]),
                         body_rates=np.array([4.0, -3.0, 5.0]))
    inp = ControlInput(thrust=24.0, torque=np.array([0.3, 0.2, -0.25]))
    return integrate_many(state, inp, params, dt, int(round(duration / dt)))


def test_rk4_fourth_order_convergence(params):
    ref = _tumbling_run(params, 1e-5)

    def error(st):
        return (np.linalg.norm(st.position - ref.position)
                + np.linalg.norm(st.velocity - ref.velocity))

    ratio = error(_tumbling_run(params, 1e-3)) / error(_tumbling_run(params, 5e-4))
    assert 10.0 <= ratio <= 22.0


def test_step_deterministic(params):
    def run():
        state = VehicleState(body_rates=np.array([0.4, -0.2, 0.9]))
        inp = ControlInput(thrust=21.0, torque=np.array([0.05, -0.02, 0.01]))
        out = []
        for _ in range(500):
            state = step(state, inp, params, 2e-3)
            out.append(state)
        return out

    for a, b in zip(run(), run()):
        assert np.array_equal(a.position, b.position)
        assert np.array_equal(a.velocity, b.velocity)
        assert np.array_equal(a.attitude, b.attitude)
        assert np.array_equal(a.body_rates, b.body_rates)


def test_integrate_many_matches_step_loop(params):
    state = VehicleState(body_rates=np.array([0.3, 0.2, 0.1]))
    inp = ControlInput(thrust=20.0, torque=np.array([0.01, 0.0, 0.0]))
    looped = state
    for _ in range(200):
        looped = step(looped, inp, params, 2e-3)
    batched = integrate_many(state, inp, params, 2e-3, 200)
    assert np.array_equal(looped.position, batched.position)
    assert np.array_equal(looped.attitude, batched.attitude)
    assert np.array_equal(looped.body_rates, batched.body_rates)


def test_step_rejects_bad_dt(params):
    with pytest.raises(ValueError):
        step(VehicleState(), ControlInput(), params, 0.02)
    with pytest.raises(ValueError):
        step(VehicleState(), ControlInput(), params, 0.0)


def test_step_rejects_non_finite(params):
    bad = VehicleState(position=np.array([np.nan, 0.0, 0.0]))
    with pytest.raises(InvalidStateError):
        step(bad, ControlInput(), params, 1e-3)
    with pytest.raises(InvalidStateError):
        step(VehicleState(), ControlInput(thrust=math.inf), params, 1e-3)


def test_attitude_stays_orthonormal_over_a_million_steps(params):
    # Long-haul drift check; chunked so orthonormality is sampled along
    # the way, not just at the end. Torque-free so the tumble stays bounded.
    state = VehicleState(body_rates=np.array([2.0, -1.5, 2.5]))
    inp = ControlInput(thrust=20.0)
    worst = 0.0
    for _ in range(100):
        state = integrate_many(state, inp, params, 2e-3, 10_000)
        s = state.attitude
        worst = max(worst, float(np.max(np.abs(s.T @ s - np.eye(3)))))
        assert abs(np.linalg.det(s) - 1.0) <= 1e-9
    assert worst <= 1e-9


def test_params_validation():
    with pytest.raises(ValueError):
        VehicleParams(mass=-1.0)
    with pytest.raises(ValueError):
        VehicleParams(inertia=np.diag([1.0, -1.0, 1.0]))
    with pytest.raises(ValueError):
        VehicleParams(thrust_max=5.0)  # below hover weight
    with pytest.raises(ValueError):
        VehicleParams(gravity=0.0)
