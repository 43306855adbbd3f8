"""Deterministic 2-D circuit world: geometry, car dynamics, synthetic camera."""

from .tracks import (
    TrackSpec,
    TrackVariation,
    TrackField,
    OffTrackError,
    builtin_circuits,
    distance_to_centerline,
    lap_progress,
    load_track,
    save_track,
)
from .dynamics import CarState, step_dynamics
from .camera import CameraConfig, ImageFrame, render, COLORS
from .noise import salt_pepper

__all__ = [
    "TrackSpec",
    "TrackVariation",
    "TrackField",
    "OffTrackError",
    "builtin_circuits",
    "distance_to_centerline",
    "lap_progress",
    "load_track",
    "save_track",
    "CarState",
    "step_dynamics",
    "CameraConfig",
    "ImageFrame",
    "render",
    "COLORS",
    "salt_pepper",
]
