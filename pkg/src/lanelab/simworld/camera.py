"""Synthetic forward camera: pinhole rays intersected with the ground plane,
colored by world lookup around the track centerline."""

import math
from dataclasses import dataclass

import numpy as np

from .tracks import TrackField

# world palette (RGB)
COLORS = {
    "grass": (0, 140, 0),
    "road_grey": (60, 60, 60),
    "road_white": (230, 230, 230),
    "line_red": (230, 20, 20),
    "line_white": (255, 255, 255),
    "wall": (180, 30, 30),
    "sky": (60, 60, 235),
}

WALL_BAND = 1.5  # m of wall color painted beyond the road edge
MAX_RAY_T = 5000.0


@dataclass(frozen=True)
class CameraConfig:
    height: float = 3.0  # m above ground
    pitch: float = 0.18  # rad below horizontal
    lateral_offset: float = 0.0  # m, + = right (perturbation)
    extra_pitch_down: float = 0.0  # rad (perturbation)
    hfov: float = 1.7  # rad
    resolution: tuple = (160, 120)  # (W, H) pixels

    def __post_init__(self):
        W, H = self.resolution
        if W < 32 or H < 24:
            raise ValueError(f"resolution {W}x{H} below minimum 32x24")
        total = self.pitch + self.extra_pitch_down
        if not 0.0 < total < math.pi / 2:
            raise ValueError(f"total pitch {total:.3f} rad outside (0, pi/2)")


@dataclass(frozen=True)
class ImageFrame:
    width: int
    height: int
    pixels: np.ndarray  # (H, W, 3) uint8
    horizon_row: int

    def __post_init__(self):
        if self.pixels.shape != (self.height, self.width, 3):
            raise ValueError(f"pixel block {self.pixels.shape} != {self.height}x{self.width}x3")
        if not 0 <= self.horizon_row < self.height:
            raise ValueError("horizon_row outside image")


_ray_cache = {}


def _pixel_rays(camera):
    """Per-pixel (xc, yc) tangents and the ground-row geometry, cached."""
    key = (camera.resolution, camera.hfov, round(camera.pitch + camera.extra_pitch_down, 12))
    if key in _ray_cache:
        return _ray_cache[key]
    W, H = camera.resolution
    fx = (W / 2.0) / math.tan(camera.hfov / 2.0)
    fy = fx  # square pixels
    cx, cy = W / 2.0, H / 2.0
    xc = (np.arange(W) + 0.5 - cx) / fx  # image right
    yc = (np.arange(H) + 0.5 - cy) / fy  # image down
    pitch = camera.pitch + camera.extra_pitch_down
    # dir_z < 0 (ray points at ground) iff sin(p) + yc*cos(p) > 0
    ground_rows = (math.sin(pitch) + yc * math.cos(pitch)) > 1e-9
    hits = np.nonzero(ground_rows)[0]
    horizon = int(hits[0]) if len(hits) else H - 1
    out = (xc, yc, pitch, horizon, ground_rows)
    _ray_cache[key] = out
    return out


_field_cache = {}


def _track_field(track):
    key = id(track)
    if key not in _field_cache:
        _field_cache[key] = TrackField(track)
    return _field_cache[key]


def render(track, variation, state, camera, field=None):
    """Render the scene the car sees; pure in all arguments."""
    xc, yc, pitch, horizon, ground_rows = _pixel_rays(camera)
    W, H = camera.resolution
    if field is None:
        field = _track_field(track)

    sp, cp = math.sin(pitch), math.cos(pitch)
    ct, st = math.cos(state.heading), math.sin(state.heading)
    # basis: forward (pitched down), right, down
    Fx, Fy = ct * cp, st * cp
    Rx, Ry = st, -ct
    Dx, Dy = -ct * sp, -st * sp
    px = state.x + Rx * camera.lateral_offset
    py = state.y + Ry * camera.lateral_offset

    rows = np.nonzero(ground_rows)[0]
    pixels = np.empty((H, W, 3), dtype=np.uint8)
    pixels[:] = COLORS["sky"]
    if len(rows):
        ycg = yc[rows]
        t = camera.height / (sp + ycg * cp)  # ray length to ground, per row
        t = np.minimum(t, MAX_RAY_T)
        # world ground coordinates, rows x cols
        gx = px + t[:, None] * (Fx + np.outer(np.ones_like(ycg), xc) * Rx + ycg[:, None] * Dx)
        gy = py + t[:, None] * (Fy + np.outer(np.ones_like(ycg), xc) * Ry + ycg[:, None] * Dy)
        pts = np.column_stack([gx.ravel(), gy.ravel()])
        dist, _ = field.query(pts)
        dist = dist.reshape(len(rows), W)

        half_road = track.road_width / 2.0
        block = np.empty((len(rows), W, 3), dtype=np.uint8)
        block[:] = COLORS["grass"]
        road_color = COLORS["road_grey"] if variation.road_color == "grey" else COLORS["road_white"]
        block[dist <= half_road] = road_color
        if variation.walls:
            wall = (dist > half_road) & (dist <= half_road + WALL_BAND)
            block[wall] = COLORS["wall"]
        if variation.line_color != "none":
            line = COLORS["line_red"] if variation.line_color == "red" else COLORS["line_white"]
            block[dist <= track.line_width / 2.0] = line
        pixels[rows[0] :] = block
    return ImageFrame(width=W, height=H, pixels=pixels, horizon_row=horizon)


def horizon_row_for(camera):
    """First image row whose ray hits the ground."""
    return _pixel_rays(camera)[3]


def ground_point(camera, state, u, v):
    """World (x, y) where the ray through pixel (u, v) meets the ground.

    Exposed for geometry tests; returns None for rays at/above the horizon.
    """
    W, H = camera.resolution
    fx = (W / 2.0) / math.tan(camera.hfov / 2.0)
    cx, cy = W / 2.0, H / 2.0
    xc = (u + 0.5 - cx) / fx
    yc = (v + 0.5 - cy) / fx
    pitch = camera.pitch + camera.extra_pitch_down
    sp, cp = math.sin(pitch), math.cos(pitch)
    denom = sp + yc * cp
    if denom <= 0:
        return None
    t = camera.height / denom
    ct, st = math.cos(state.heading), math.sin(state.heading)
    Rx, Ry = st, -ct
    px = state.x + Rx * camera.lateral_offset
    py = state.y + Ry * camera.lateral_offset
    gx = px + t * (ct * cp + xc * Rx + yc * (-ct * sp))
    gy = py + t * (st * cp + xc * Ry + yc * (-st * sp))
    return gx, gy
