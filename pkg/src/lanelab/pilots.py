"""Driving agents: the color-filter PID expert and the neural-brain adapter."""

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .common import DriveCommand, Limits
from .models import denormalize, make_network, preprocess

# per-channel thresholds for the line color filter; tight enough that the
# wall band (180,30,30) and white road (230,230,230) never match
_COLOR_FILTERS = {
    "red": lambda px: (px[..., 0] >= 210) & (px[..., 1] <= 80) & (px[..., 2] <= 80),
    "white": lambda px: (px[..., 0] >= 245) & (px[..., 1] >= 245) & (px[..., 2] >= 245),
}

MIN_LINE_PIXELS = 10


def detect_line_error(image, target_color):
    """Normalized horizontal line position in [-1, 1], or None if lost.

    Thresholds pixels matching ``target_color``, then takes the column centroid
    of matches in the lower third of the image. Positive = line right of
    center.
    """
    if target_color not in _COLOR_FILTERS:
        raise ValueError(f"target_color must be red or white, got {target_color!r}")
    px = image.pixels
    H, W = image.height, image.width
    lower = px[H - H // 3 :]
    mask = _COLOR_FILTERS[target_color](lower)
    count = int(mask.sum())
    if count < MIN_LINE_PIXELS:
        return None
    cols = np.nonzero(mask)[1]
    centroid = float(cols.mean())
    return (centroid - (W - 1) / 2.0) / (W / 2.0)


@dataclass
class PidState:
    """PID gains plus integrator/derivative memory on the normalized error."""

    kp: float = 2.2
    ki: float = 0.01
    kd: float = 1.2
    integral_clamp: float = 2.0
    integral: float = 0.0
    prev_error: float = None  # type: ignore[assignment]


def pid_step(pid, error, dt, w_max=2.5):
    """Angular speed from the line error: w = -(kp*e + ki*int(e) + kd*de/dt)."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    pid.integral += error * dt
    pid.integral = min(max(pid.integral, -pid.integral_clamp), pid.integral_clamp)
    deriv = 0.0 if pid.prev_error is None else (error - pid.prev_error) / dt
    pid.prev_error = error
    w = -(pid.kp * error + pid.ki * pid.integral + pid.kd * deriv)
    return min(max(w, -w_max), w_max)


@dataclass
class SpeedSchedule:
    """v = v_cruise * (1 - alpha*|e|), floored at v_min."""

    v_cruise: float = 10.0
    v_min: float = 3.0
    alpha: float = 0.6

    def speed(self, error):
        return max(self.v_min, self.v_cruise * (1.0 - self.alpha * abs(error)))


class ExpertBrain:
    """Explicitly programmed line follower.

    Perceives only through the rendered camera. When the line is lost it holds
    the last angular command and decays speed toward v_min; the episode harness
    fails the run after ``t_lost_limit`` seconds without the line.
    """

    t_lost_limit = 2.0

    def __init__(self, target_color="red", pid=None, schedule=None, limits=None, dt=0.05):
        self.target_color = target_color
        self.pid = pid or PidState()
        self.schedule = schedule or SpeedSchedule()
        self.limits = limits or Limits()
        self.dt = dt
        self.reset()

    def reset(self):
        self.pid.integral = 0.0
        self.pid.prev_error = None
        self.last_w = 0.0
        self.last_v = self.schedule.v_min
        self.time_lost = 0.0

    @property
    def line_lost_too_long(self):
        return self.time_lost > self.t_lost_limit

    def act(self, image):
        error = detect_line_error(image, self.target_color)
        if error is None:
            self.time_lost += self.dt
            # recovery: hold heading command, bleed speed toward v_min
            self.last_v = self.schedule.v_min + (self.last_v - self.schedule.v_min) * np.exp(
                -self.dt / 1.0
            )
            return self.limits.clamp(self.last_v, self.last_w)
        self.time_lost = 0.0
        w = pid_step(self.pid, error, self.dt, w_max=self.limits.w_max)
        v = self.schedule.speed(error)
        self.last_w = w
        self.last_v = v
        return self.limits.clamp(v, w)


class SequenceBuffer:
    """Ring buffer of the last 3 preprocessed frames, oldest -> newest.

    The first push bootstraps by triplicating the frame, so output is defined
    from the very first tick; the same rule is applied when assembling
    training sequences, keeping train and inference distributions identical.
    """

    def __init__(self):
        self._frames = deque(maxlen=3)

    def push(self, frame):
        if not self._frames:
            self._frames.extend([frame, frame, frame])
        else:
            self._frames.append(frame)

    def stacked(self):
        if not self._frames:
            raise RuntimeError("buffer is empty; push a frame first")
        return np.stack(list(self._frames), axis=0)


class NeuralBrain:
    """Adapter running a trained model in the control loop."""

    def __init__(self, spec, weights, preprocess_spec, limits=None):
        self.spec = spec
        self.preprocess_spec = preprocess_spec
        self.limits = limits or Limits()
        self.network = make_network(spec)
        self.network.set_params(weights)
        self.reset()

    def reset(self):
        self.buffer = SequenceBuffer()

    def act(self, image):
        frame = preprocess(image.pixels, self.preprocess_spec)
        self.buffer.push(frame)
        if self.spec.input_kind == "sequence_of_3":
            x = self.buffer.stacked()
        else:
            x = frame
        y = self.network.forward(x)
        cmd = denormalize(float(y[0]), float(y[1]), self.limits)
        return self.limits.clamp(cmd.v, cmd.w)


def expert_command(image, expert):
    """One expert control step; thin functional wrapper over ExpertBrain.act."""
    return expert.act(image)


def neural_command(brain, image):
    """One neural control step; wrapper over NeuralBrain.act."""
    return brain.act(image)
