"""Unicycle kinematics against closed-form arc solutions."""

import math

import numpy as np
import pytest

from lanelab.common import DriveCommand
from lanelab.simworld.dynamics import CarState, step_dynamics, wrap_angle


def test_straight_step():
    s = step_dynamics(CarState(), DriveCommand(1.0, 0.0), 0.1, tau=0.0)
    assert s.x == pytest.approx(0.1, abs=1e-15)
    assert s.y == 0.0
    assert s.heading == 0.0
    assert s.time == pytest.approx(0.1)


def test_pure_rotation():
    s = step_dynamics(CarState(), DriveCommand(0.0, math.pi), 1.0, tau=0.0)
    assert s.x == 0.0 and s.y == 0.0
    assert s.heading == pytest.approx(math.pi)


def test_circle_closure():
    # v=5, w=0.5 -> radius 10 circle; after a full period we are back at start
    state = CarState()
    cmd = DriveCommand(5.0, 0.5)
    period = 2 * math.pi / 0.5
    steps = 1000
    for _ in range(steps):
        state = step_dynamics(state, cmd, period / steps, tau=0.0)
    assert math.hypot(state.x, state.y) < 1e-3


def test_matches_analytic_arc_to_1e6():
    # 10 s at dt=0.01, tau=0: integrated pose equals the closed-form arc
    v, w = 7.3, 0.9
    state = CarState(x=1.0, y=-2.0, heading=0.4)
    for _ in range(1000):
        state = step_dynamics(state, DriveCommand(v, w), 0.01, tau=0.0)
    t = 10.0
    R = v / w
    want_x = 1.0 + R * (math.sin(0.4 + w * t) - math.sin(0.4))
    want_y = -2.0 - R * (math.cos(0.4 + w * t) - math.cos(0.4))
    assert abs(state.x - want_x) < 1e-6
    assert abs(state.y - want_y) < 1e-6
    assert abs(wrap_angle(state.heading - wrap_angle(0.4 + w * t))) < 1e-9


def test_first_order_lag_converges():
    state = CarState()
    cmd = DriveCommand(10.0, 1.0)
    speeds = []
    for _ in range(100):
        state = step_dynamics(state, cmd, 0.05, tau=0.2)
        speeds.append(state.v)
    # monotone approach to the commanded speed
    assert all(b >= a for a, b in zip(speeds, speeds[1:]))
    assert speeds[3] < 10.0  # lag visible early
    assert speeds[-1] == pytest.approx(10.0, abs=1e-6)
    # one step moves by exactly 1 - exp(-dt/tau) of the gap
    first = 10.0 * (1.0 - math.exp(-0.05 / 0.2))
    assert speeds[0] == pytest.approx(first, abs=1e-12)


def test_heading_stays_wrapped():
    state = CarState()
    for _ in range(200):
        state = step_dynamics(state, DriveCommand(0.0, 2.5), 0.1, tau=0.0)
        assert -math.pi < state.heading <= math.pi


def test_nonpositive_dt_rejected():
    with pytest.raises(ValueError):
        step_dynamics(CarState(), DriveCommand(1.0, 0.0), 0.0)


def test_wrap_angle():
    assert wrap_angle(3 * math.pi) == pytest.approx(math.pi)
    assert wrap_angle(-math.pi) == pytest.approx(math.pi)
    assert wrap_angle(0.3) == pytest.approx(0.3)
