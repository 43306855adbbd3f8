"""Unicycle car kinematics with first-order command lag."""

import math
from dataclasses import dataclass, replace


def wrap_angle(a):
    """Normalize to (-pi, pi]."""
    a = math.fmod(a, 2 * math.pi)
    if a <= -math.pi:
        a += 2 * math.pi
    elif a > math.pi:
        a -= 2 * math.pi
    return a


@dataclass(frozen=True)
class CarState:
    x: float = 0.0
    y: float = 0.0
    heading: float = 0.0  # radians, (-pi, pi]
    v: float = 0.0  # m/s
    w: float = 0.0  # rad/s
    time: float = 0.0  # s


def step_dynamics(state, cmd, dt, tau=0.2):
    """Advance one control period.

    Commanded (v, w) are applied through a first-order lag with time constant
    ``tau`` (0 = instantaneous), then the pose follows the exact constant-(v,w)
    arc over ``dt`` - for tau=0 this reproduces the analytic circular/straight
    solution to machine precision.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if tau > 0:
        alpha = 1.0 - math.exp(-dt / tau)
        v = state.v + alpha * (cmd.v - state.v)
        w = state.w + alpha * (cmd.w - state.w)
    else:
        v, w = cmd.v, cmd.w
    th = state.heading
    if abs(w) < 1e-12:
        x = state.x + v * math.cos(th) * dt
        y = state.y + v * math.sin(th) * dt
        th_new = th
    else:
        th_new = th + w * dt
        x = state.x + (v / w) * (math.sin(th_new) - math.sin(th))
        y = state.y - (v / w) * (math.cos(th_new) - math.cos(th))
    return replace(
        state,
        x=x,
        y=y,
        heading=wrap_angle(th_new),
        v=v,
        w=w,
        time=state.time + dt,
    )
