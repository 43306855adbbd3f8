"""Closed-loop episode execution and the external metrics it produces."""

import math
from dataclasses import dataclass

import numpy as np

from ..simworld.camera import render
from ..simworld.dynamics import CarState, step_dynamics
from ..simworld.noise import salt_pepper
from ..simworld.tracks import LapTracker, distance_to_centerline, lap_progress

DEFAULT_DT = 0.05
OFF_TRACK_MARGIN = 1.0  # m beyond the road edge before the episode fails
V_MIN_FLOOR = 3.0  # m/s; used for the generous default time limit


@dataclass(frozen=True)
class EpisodeMetrics:
    """External metrics of one simulated run."""

    completed: bool
    lap_seconds: float = None  # absent when failed
    position_deviation_mae: float = 0.0
    average_speed: float = 0.0
    failure_reason: str = "none"  # off_track | line_lost_timeout | time_limit | none

    def as_dict(self):
        return {
            "completed": self.completed,
            "lap_seconds": self.lap_seconds,
            "position_deviation_mae": self.position_deviation_mae,
            "average_speed": self.average_speed,
            "failure_reason": self.failure_reason,
        }


def start_state(track, seed=None, jitter=0.3):
    """Pose at the start waypoint, heading along the track, with a small
    seed-derived lateral offset."""
    lateral = 0.0
    if seed is not None and jitter > 0:
        lateral = float(np.random.default_rng(seed).uniform(-jitter, jitter))
    pts = track.centerline
    i = track.start_index
    ahead = pts[(i + 1) % len(pts)] - pts[i]
    heading = math.atan2(ahead[1], ahead[0])
    nx, ny = -math.sin(heading), math.cos(heading)
    return CarState(
        x=float(pts[i, 0] + nx * lateral),
        y=float(pts[i, 1] + ny * lateral),
        heading=heading,
    )


def run_episode(
    brain,
    track,
    variation,
    camera,
    noise_p=0.0,
    seed=0,
    max_time=None,
    laps=1,
    dt=DEFAULT_DT,
    tau=0.2,
):
    """Simulate until lap completion, off-track, line-lost timeout (expert
    only), or the time limit. Noise hits frames before the brain sees them;
    camera perturbations live inside ``camera``. Failures are metric values,
    not errors.
    """
    if max_time is None:
        max_time = 6.0 * track.length / V_MIN_FLOOR
    brain.reset()
    state = start_state(track, seed=seed)
    tracker = LapTracker()
    deviations = []
    path_length = 0.0
    tick = 0
    failure = "time_limit"
    completed = False
    while state.time < max_time:
        frame = render(track, variation, state, camera)
        if noise_p > 0.0:
            frame = salt_pepper(frame, noise_p, np.random.default_rng([seed, tick]).integers(2**32))
        deviations.append(distance_to_centerline(track, state.x, state.y))
        cmd = brain.act(frame)
        if getattr(brain, "line_lost_too_long", False):
            failure = "line_lost_timeout"
            break
        state = step_dynamics(state, cmd, dt, tau=tau)
        path_length += state.v * dt
        if distance_to_centerline(track, state.x, state.y) > track.road_width / 2 + OFF_TRACK_MARGIN:
            failure = "off_track"
            break
        if tracker.update(lap_progress(track, state.x, state.y)) >= laps:
            completed = True
            failure = "none"
            break
        tick += 1
    elapsed = state.time
    return EpisodeMetrics(
        completed=completed,
        lap_seconds=(elapsed / laps) if completed else None,
        position_deviation_mae=float(np.mean(deviations)) if deviations else 0.0,
        average_speed=(path_length / elapsed) if elapsed > 0 else 0.0,
        failure_reason=failure,
    )
