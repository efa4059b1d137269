import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from quadarm.plant import (Contact, JointState, PlantParams, actuator_torque, base_odometry,
                           contact_torque, joint_step)

T = 0.25e-3
FREE = PlantParams(inertia=0.015, damping=0.0)


def simulate(params, state, torque, T, n, t0=0.0):
    out = [state]
    for k in range(n):
        state = joint_step(params, state, torque(t0 + k * T), T, t0 + k * T)
        out.append(state)
    return out


class TestParams:
    def test_invariants(self):
        with pytest.raises(ValueError):
            PlantParams(inertia=0.0)
        with pytest.raises(ValueError):
            PlantParams(damping=-0.1)
        with pytest.raises(ValueError):
            Contact(0.0, stiffness=-1.0)
        with pytest.raises(ValueError):
            Contact(0.0, window=(2.0, 1.0))


class TestJointStep:
    def test_free_body(self):
        states = simulate(FREE, JointState(0.1, 2.0), lambda t: 0.0, T, 1000)
        assert all(s.theta_dot == 2.0 for s in states)
        theta = np.array([s.theta for s in states])
        assert np.allclose(theta, 0.1 + 2.0 * T * np.arange(1001), rtol=0, atol=1e-12)

    def test_constant_torque(self):
        states = simulate(FREE, JointState(0.0, 0.0), lambda t: 0.3, T, 1000)
        dv = np.diff([s.theta_dot for s in states])
        assert np.allclose(dv, 0.3 / 0.015 * T, rtol=1e-9, atol=0)

    def test_velocity_updated_before_position(self):
        s = joint_step(FREE, JointState(0.0, 0.0), 0.15, T)
        assert s.theta_dot == 0.15 / 0.015 * T
        assert s.theta == T * s.theta_dot

    def test_richardson_quarter_step(self):
        # 10 s trace at leg-joint speeds (|theta_dot| < 0.5 rad/s)
        p = PlantParams(inertia=0.015, damping=0.1)

        def tau(t):
            return 0.02 * math.sin(2 * math.pi * 0.5 * t)

        coarse = simulate(p, JointState(0.2, 0.0), tau, T, 40000)
        fine = simulate(p, JointState(0.2, 0.0), tau, T / 4, 160000)
        assert max(abs(s.theta_dot) for s in coarse) < 0.5
        diff = np.array([a.theta for a in coarse]) - np.array([b.theta for b in fine[::4]])
        assert np.max(np.abs(diff)) <= 1e-4

    def test_quarter_step_gap_is_first_order(self):
        # torque held over each coarse step, no damping: velocities agree at the
        # coarse instants and the angle gap is exactly 0.375 T (v_k - v_0)
        rng = np.random.default_rng(5)
        taus = rng.normal(0, 0.05, 4000)
        coarse, fine = [JointState(0.0, 0.3)], JointState(0.0, 0.3)
        gap = []
        for u in taus:
            coarse.append(joint_step(FREE, coarse[-1], u, T))
            for _ in range(4):
                fine = joint_step(FREE, fine, u, T / 4)
            gap.append(coarse[-1].theta - fine.theta)
        v = np.array([c.theta_dot for c in coarse[1:]])
        assert np.allclose(gap, 0.375 * T * (v - 0.3), rtol=0, atol=1e-12)

    @settings(max_examples=200)
    @given(st.floats(1e-3, 1.0), st.floats(1e-3, 5.0), st.floats(-20, 20), st.floats(-2, 2))
    def test_kinetic_energy_non_increasing(self, inertia, damping, vel, theta):
        p = PlantParams(inertia=inertia, damping=damping)
        s = JointState(theta, vel)
        for _ in range(200):
            nxt = joint_step(p, s, 0.0, T)
            assert nxt.theta_dot ** 2 <= s.theta_dot ** 2
            s = nxt


class TestContact:
    LEVEL = Contact(-1.0, stiffness=1000.0, damping=50.0)

    def test_above_ground(self):
        assert contact_torque(JointState(-0.9, -3.0), self.LEVEL) == 0.0

    def test_static_penetration(self):
        assert contact_torque(JointState(-1.01, 0.0), self.LEVEL) == pytest.approx(10.0, rel=1e-12)

    def test_never_adhesive(self):
        # leaving fast: the damper would pull, but the ground only pushes
        assert contact_torque(JointState(-1.001, 5.0), self.LEVEL) == 0.0

    def test_window(self):
        c = Contact(-1.0, 1000.0, 50.0, window=(6.0, 10.0))
        st_ = JointState(-1.01, 0.0)
        assert contact_torque(st_, c, 5.9) == 0.0
        assert contact_torque(st_, c, 6.0) > 0.0
        assert contact_torque(st_, c, 10.0) == 0.0

    def test_drop_and_settle(self):
        p = PlantParams(inertia=0.015, damping=0.1, contact=Contact(-1.0, 5000.0, 50.0))
        s = JointState(-0.8, -2.0)
        forces = []
        for _ in range(int(3.0 / T)):
            forces.append(contact_torque(s, p.contact))
            s = joint_step(p, s, -2.0, T)          # pressed into the ground
        forces = np.array(forces)
        assert np.all(forces >= 0.0)
        assert forces.max() > 0.0
        assert s.theta == pytest.approx(-1.0 - 2.0 / 5000.0, abs=1e-6)


class TestActuator:
    def test_clamp(self):
        p = PlantParams(torque_max=10.6)
        assert actuator_torque(p, 50.0) == 10.6
        assert actuator_torque(p, -50.0) == -10.6
        assert actuator_torque(p, 3.0) == 3.0

    def test_applied_torque_never_exceeds_rating(self):
        p = PlantParams(inertia=0.015, damping=0.0, torque_max=10.6)
        s = joint_step(p, JointState(0.0, 0.0), 1e3, T)
        assert s.theta_dot == 10.6 / 0.015 * T


class TestOdometry:
    def test_idle(self):
        assert base_odometry(0.0, 0.1, T, 1.25) == 1.25

    def test_ten_seconds_driving(self):
        x = 0.0
        for _ in range(int(round(10.0 / T))):
            x = base_odometry(4.0, 0.1, T, x)
        assert abs(x - 2.0) <= 1e-6

    def test_rated_wheel_speed(self):
        assert base_odometry(62.83, 0.1, 1.0, 0.0) == pytest.approx(3.1415, rel=1e-12)

    @given(st.floats(-62.83, 62.83), st.integers(1, 5000))
    def test_constant_rate_exact(self, rate, n):
        x = 0.0
        for _ in range(n):
            x = base_odometry(rate, 0.1, T, x)
        assert x == pytest.approx(0.05 * rate * n * T, rel=1e-11, abs=1e-15)

    def test_bad_diameter(self):
        with pytest.raises(ValueError):
            base_odometry(1.0, 0.0, T, 0.0)
