"""Closed-circuit geometry: the seven builtin tracks, point queries, file IO."""

import math
from dataclasses import dataclass, field

import numpy as np
import yaml
from scipy.spatial import cKDTree


class TrackError(ValueError):
    pass


class OffTrackError(ValueError):
    """Point is too far from the centerline for an on-track query."""


@dataclass(frozen=True)
class TrackVariation:
    """Appearance knobs: line color, road color, lateral walls."""

    line_color: str = "red"  # red | white | none
    road_color: str = "grey"  # grey | white
    walls: bool = True

    def __post_init__(self):
        if self.line_color not in ("red", "white", "none"):
            raise TrackError(f"bad line_color {self.line_color!r}")
        if self.road_color not in ("grey", "white"):
            raise TrackError(f"bad road_color {self.road_color!r}")


@dataclass(frozen=True)
class TrackSpec:
    """Closed centerline circuit; closure is implicit (last -> first)."""

    name: str
    centerline: np.ndarray  # (N,2) meters
    road_width: float = 10.0
    line_width: float = 0.5
    start_index: int = 0
    tag: str = "TRAIN"  # TRAIN | TEST

    def __post_init__(self):
        pts = np.asarray(self.centerline, dtype=np.float64)
        object.__setattr__(self, "centerline", pts)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 32:
            raise TrackError(f"centerline must be (N>=32, 2), got {pts.shape}")
        if np.allclose(pts[0], pts[-1]):
            raise TrackError("centerline must not repeat the first waypoint")
        if self.road_width <= 4 * self.line_width:
            raise TrackError("road_width must exceed 4x line_width")
        seg = np.diff(np.vstack([pts, pts[:1]]), axis=0)
        if np.max(np.hypot(seg[:, 0], seg[:, 1])) >= self.road_width:
            raise TrackError("waypoint spacing must stay below road_width")
        if not 0 <= self.start_index < len(pts):
            raise TrackError("start_index out of range")
        if not _is_simple(pts):
            raise TrackError(f"centerline of {self.name!r} self-intersects")

    @property
    def length(self):
        closed = np.vstack([self.centerline, self.centerline[:1]])
        return float(np.sum(np.hypot(*np.diff(closed, axis=0).T)))


def _is_simple(pts):
    """Closed polyline has no crossing segments (brute-force pairwise test)."""
    closed = np.vstack([pts, pts[:1]])
    a = closed[:-1]
    b = closed[1:]
    n = len(a)
    d = b - a

    def cross(u, v):
        return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]

    for i in range(n):
        # skip self and the two adjacent segments (shared endpoints)
        js = np.arange(i + 2, n if i > 0 else n - 1)
        if len(js) == 0:
            continue
        r = d[i]
        s = d[js]
        qp = a[js] - a[i]
        denom = cross(r[None, :], s)
        t = cross(qp, s)
        u = cross(qp, np.broadcast_to(r, s.shape))
        with np.errstate(divide="ignore", invalid="ignore"):
            ti = t / denom
            ui = u / denom
        hit = (np.abs(denom) > 1e-12) & (ti > 0) & (ti < 1) & (ui > 0) & (ui < 1)
        if np.any(hit):
            return False
    return True


def resample_closed(pts, spacing):
    """Uniform arc-length resampling of a closed polyline."""
    closed = np.vstack([pts, pts[:1]])
    seg = np.diff(closed, axis=0)
    lens = np.hypot(seg[:, 0], seg[:, 1])
    cum = np.concatenate([[0.0], np.cumsum(lens)])
    total = cum[-1]
    n = max(32, int(round(total / spacing)))
    targets = np.linspace(0.0, total, n, endpoint=False)
    idx = np.searchsorted(cum, targets, side="right") - 1
    idx = np.clip(idx, 0, len(lens) - 1)
    frac = (targets - cum[idx]) / np.where(lens[idx] > 0, lens[idx], 1.0)
    return closed[idx] + frac[:, None] * seg[idx]


def _radial(n, fn):
    th = np.linspace(0.0, 2 * math.pi, n, endpoint=False)
    r = fn(th)
    return np.column_stack([r * np.cos(th), r * np.sin(th)])


def _ellipse(n, a, b):
    th = np.linspace(0.0, 2 * math.pi, n, endpoint=False)
    return np.column_stack([a * np.cos(th), b * np.sin(th)])


def _superellipse(n, a, b, p):
    th = np.linspace(0.0, 2 * math.pi, n, endpoint=False)
    c, s = np.cos(th), np.sin(th)
    return np.column_stack(
        [a * np.sign(c) * np.abs(c) ** (2.0 / p), b * np.sign(s) * np.abs(s) ** (2.0 / p)]
    )


def builtin_circuits():
    """The seven builtin circuits: four TRAIN, three (harder) TEST."""
    spacing = 1.5
    raw = [
        ("oval", "TRAIN", _ellipse(720, 85, 55)),
        ("rounded_rect", "TRAIN", _superellipse(720, 80, 55, 4)),
        ("s_loop", "TRAIN", _radial(720, lambda t: 70 + 10 * np.sin(2 * t))),
        ("many_curve", "TRAIN", _radial(720, lambda t: 70 + 7 * np.sin(3 * t) + 5 * np.cos(5 * t))),
        ("straight_hairpin", "TEST", _radial(720, lambda t: 80 + 18 * np.cos(2 * t) + 8 * np.sin(4 * t))),
        ("tight_corner", "TEST", _radial(720, lambda t: 55 + 10 * np.sin(5 * t))),
        ("extreme", "TEST", _radial(720, lambda t: 50 + 12 * np.sin(6 * t) + 5 * np.cos(3 * t))),
    ]
    return [
        TrackSpec(name=name, centerline=resample_closed(pts, spacing), tag=tag)
        for name, tag, pts in raw
    ]


def get_circuit(name):
    for track in builtin_circuits():
        if track.name == name:
            return track
    raise TrackError(f"unknown circuit {name!r}")


# ---------------------------------------------------------------------------
# point queries


def _segment_distances(track, x, y):
    pts = track.centerline
    closed = np.vstack([pts, pts[:1]])
    a = closed[:-1]
    d = closed[1:] - a
    p = np.array([x, y], dtype=np.float64)
    ap = p - a
    denom = np.einsum("ij,ij->i", d, d)
    t = np.clip(np.einsum("ij,ij->i", ap, d) / np.where(denom > 0, denom, 1.0), 0.0, 1.0)
    closest = a + t[:, None] * d
    dist = np.hypot(*(p - closest).T)
    return dist, t, closest


def distance_to_centerline(track, x, y):
    """Minimum Euclidean distance from (x, y) to the closed centerline."""
    dist, _, _ = _segment_distances(track, x, y)
    return float(dist.min())


def lap_progress(track, x, y):
    """Arc-length fraction in [0,1) of the nearest centerline point,
    measured from start_index. Raises OffTrackError beyond road_width."""
    dist, t, _ = _segment_distances(track, x, y)
    i = int(np.argmin(dist))
    if dist[i] > track.road_width:
        raise OffTrackError(
            f"point ({x:.1f},{y:.1f}) is {dist[i]:.1f} m from {track.name}, beyond road_width"
        )
    pts = track.centerline
    closed = np.vstack([pts, pts[:1]])
    lens = np.hypot(*np.diff(closed, axis=0).T)
    cum = np.concatenate([[0.0], np.cumsum(lens)])
    total = cum[-1]
    arc = cum[i] + t[i] * lens[i]
    start_arc = cum[track.start_index]
    return float(((arc - start_arc) % total) / total)


class LapTracker:
    """Lap completion by arc coverage: a lap counts once >= 95% of distinct
    arc bins were visited and progress wraps past the start line."""

    def __init__(self, bins=100, coverage=0.95):
        self.bins = bins
        self.coverage = coverage
        self.visited = np.zeros(bins, dtype=bool)
        self.prev_frac = None
        self.laps = 0

    def update(self, frac):
        """Feed the current lap_progress fraction; returns laps completed so far."""
        self.visited[int(frac * self.bins) % self.bins] = True
        if self.prev_frac is not None and (self.prev_frac - frac) > 0.5:
            # wrapped past the start line
            if self.visited.mean() >= self.coverage:
                self.laps += 1
            self.visited[:] = False
        self.prev_frac = frac
        return self.laps


class TrackField:
    """Fast distance/arc lookups against a densely resampled centerline.

    Used by the renderer, where thousands of ground points are classified per
    frame; accuracy is bounded by half the dense spacing (default 2.5 cm).
    """

    def __init__(self, track, spacing=0.05):
        self.track = track
        dense = resample_closed(track.centerline, spacing)
        self._tree = cKDTree(dense)
        n = len(dense)
        # dense points are uniformly spaced along arc, starting at waypoint 0
        closed = np.vstack([track.centerline, track.centerline[:1]])
        cum = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(closed, axis=0).T))])
        start = cum[track.start_index] / cum[-1]
        self._frac = (np.arange(n) / n - start) % 1.0

    def query(self, points):
        """points: (M,2) -> (distance (M,), arc fraction (M,))."""
        d, idx = self._tree.query(np.asarray(points, dtype=np.float64))
        return d, self._frac[idx]


# ---------------------------------------------------------------------------
# circuit files


def save_track(track, path):
    doc = {
        "name": track.name,
        "tag": track.tag,
        "road_width": float(track.road_width),
        "line_width": float(track.line_width),
        "start_index": int(track.start_index),
        "waypoints": [[round(float(x), 4), round(float(y), 4)] for x, y in track.centerline],
    }
    with open(path, "w") as fh:
        yaml.safe_dump(doc, fh, sort_keys=False)


def load_track(path):
    with open(path) as fh:
        doc = yaml.safe_load(fh)
    return TrackSpec(
        name=doc["name"],
        centerline=np.array(doc["waypoints"], dtype=np.float64),
        road_width=float(doc["road_width"]),
        line_width=float(doc["line_width"]),
        start_index=int(doc["start_index"]),
        tag=doc.get("tag", "TRAIN"),
    )
