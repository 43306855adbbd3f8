"""Imitation dataset tooling: recording expert episodes, the LRDS container,
augmentation, and episode-level train/validation splitting."""

import io
import json
import math
import struct
import zlib
from dataclasses import dataclass, replace

import numpy as np

from .common import Limits
from .simworld.camera import ImageFrame, render
from .simworld.dynamics import CarState, step_dynamics
from .simworld.tracks import LapTracker, OffTrackError, distance_to_centerline, lap_progress

DATASET_MAGIC = b"LRDS"
DATASET_VERSION = 1
CRC_CHUNK = 64 * 1024 * 1024


class DatasetError(ValueError):
    """Bad magic/version, truncation, or checksum failure."""


class EpisodeAborted(RuntimeError):
    """Expert failed mid-episode; partial samples are discarded."""


@dataclass(frozen=True)
class Sample:
    """One control tick: the raw (pre-crop) frame and the command the expert
    issued for it on the same tick."""

    frame: ImageFrame
    v: float
    w: float
    t: float
    circuit_id: int
    episode_id: int
    frame_index: int


class Dataset:
    """In-memory dataset: contiguous per-episode sample arrays plus manifest."""

    def __init__(self, height, width, circuits, limits=None):
        self.height = height
        self.width = width
        self.circuits = list(circuits)
        self.limits = limits or Limits()
        self.images = []  # list of (H,W,3) uint8
        self.labels = []  # (v, w)
        self.times = []
        self.circuit_ids = []
        self.episode_ids = []
        self.frame_indices = []
        self.episodes = []  # {"id", "circuit", "start", "count"}

    def __len__(self):
        return len(self.images)

    def add_episode(self, circuit_id, samples):
        start = len(self.images)
        eid = len(self.episodes)
        for i, s in enumerate(samples):
            self.images.append(s.frame.pixels)
            self.labels.append((s.v, s.w))
            self.times.append(s.t)
            self.circuit_ids.append(circuit_id)
            self.episode_ids.append(eid)
            self.frame_indices.append(i)
        self.episodes.append(
            {"id": eid, "circuit": circuit_id, "start": start, "count": len(samples)}
        )
        return eid

    def manifest(self):
        return {
            "version": DATASET_VERSION,
            "count": len(self.images),
            "height": self.height,
            "width": self.width,
            "circuits": self.circuits,
            "episodes": self.episodes,
            "v_max": self.limits.v_max,
            "w_max": self.limits.w_max,
        }

    def image_array(self):
        return np.stack(self.images) if self.images else np.zeros((0, self.height, self.width, 3), np.uint8)

    def label_array(self):
        return np.array(self.labels, dtype=np.float64).reshape(-1, 2)


# ---------------------------------------------------------------------------
# recording


def record_episode(
    dataset,
    expert,
    track,
    variation,
    camera,
    seed,
    max_laps=1,
    dt=0.05,
    tau=0.2,
    max_time=None,
):
    """Drive the expert for ``max_laps`` laps and append one Sample per tick.

    The start pose gets a small seed-derived lateral jitter so repeated laps
    do not collapse onto one trajectory. Raises EpisodeAborted (recording
    nothing) if the expert goes off track, loses the line for too long, or
    times out.
    """
    rng = np.random.default_rng(seed)
    state = _start_state(track, lateral_jitter=float(rng.uniform(-0.8, 0.8)))
    if max_time is None:
        max_time = 6.0 * track.length / 3.0  # generous: full laps at crawl speed
    expert.reset()
    tracker = LapTracker()
    samples = []
    circuit_id = dataset.circuits.index(track.name)
    episode_id = len(dataset.episodes)
    idx = 0
    while state.time < max_time:
        frame = render(track, variation, state, camera)
        cmd = expert.act(frame)
        if expert.line_lost_too_long:
            raise EpisodeAborted(f"expert lost the line on {track.name}")
        samples.append(
            Sample(frame, cmd.v, cmd.w, state.time, circuit_id, episode_id, idx)
        )
        state = step_dynamics(state, cmd, dt, tau=tau)
        if distance_to_centerline(track, state.x, state.y) > track.road_width / 2 + 1.0:
            raise EpisodeAborted(f"expert left the road on {track.name}")
        if tracker.update(lap_progress(track, state.x, state.y)) >= max_laps:
            dataset.add_episode(circuit_id, samples)
            return len(samples)
        idx += 1
    raise EpisodeAborted(f"expert timed out on {track.name}")


def _start_state(track, lateral_jitter=0.0):
    pts = track.centerline
    i = track.start_index
    ahead = pts[(i + 1) % len(pts)] - pts[i]
    heading = math.atan2(ahead[1], ahead[0])
    # jitter applied perpendicular to the track direction
    nx, ny = -math.sin(heading), math.cos(heading)
    return CarState(
        x=float(pts[i, 0] + nx * lateral_jitter),
        y=float(pts[i, 1] + ny * lateral_jitter),
        heading=heading,
        v=0.0,
        w=0.0,
        time=0.0,
    )


# ---------------------------------------------------------------------------
# augmentation


def mirror(sample):
    """Horizontal flip: image columns reversed, angular label negated."""
    frame = replace(sample.frame, pixels=sample.frame.pixels[:, ::-1].copy())
    return replace(sample, frame=frame, w=-sample.w)


def augment(sample, rng):
    """Photometric jitter: brightness scale in [0.8, 1.2] plus per-pixel
    Gaussian noise (sigma=4 bytes); labels untouched."""
    scale = rng.uniform(0.8, 1.2)
    noise = rng.normal(0.0, 4.0, size=sample.frame.pixels.shape)
    px = np.clip(sample.frame.pixels.astype(np.float64) * scale + noise, 0, 255)
    frame = replace(sample.frame, pixels=px.astype(np.uint8))
    return replace(sample, frame=frame)


def sample_rng(seed, index):
    """Per-sample RNG stream, stable under parallel loading order."""
    return np.random.default_rng([seed, index])


# ---------------------------------------------------------------------------
# splitting


def split(manifest, val_fraction, seed):
    """Episode-granularity split into (train sample ids, val sample ids)."""
    if not 0.0 < val_fraction < 1.0:
        raise ValueError("val_fraction must be in (0, 1)")
    episodes = manifest["episodes"]
    if len(episodes) < 2:
        raise ValueError("need at least 2 episodes to split")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(episodes))
    n_val = max(1, int(round(val_fraction * len(episodes))))
    n_val = min(n_val, len(episodes) - 1)
    val_eps = set(int(order[i]) for i in range(n_val))
    train_ids, val_ids = [], []
    for ep in episodes:
        ids = range(ep["start"], ep["start"] + ep["count"])
        (val_ids if ep["id"] in val_eps else train_ids).extend(ids)
    return np.array(train_ids, dtype=np.int64), np.array(val_ids, dtype=np.int64)


def sequence_indices(manifest, i):
    """Frame indices (i-2, i-1, i) for the 3-frame input at sample i,
    clamped at the episode start by repeating its first frame."""
    for ep in manifest["episodes"]:
        if ep["start"] <= i < ep["start"] + ep["count"]:
            lo = ep["start"]
            return (max(i - 2, lo), max(i - 1, lo), i)
    raise IndexError(f"sample {i} not covered by any episode")


# ---------------------------------------------------------------------------
# LRDS container


def _record_stride(h, w):
    return h * w * 3 + 3 * 8 + 3 * 4


def write_dataset(dataset, path):
    header = json.dumps(dataset.manifest(), sort_keys=True, separators=(",", ":")).encode()
    body = io.BytesIO()
    for i in range(len(dataset)):
        body.write(dataset.images[i].tobytes())
        v, w = dataset.labels[i]
        body.write(struct.pack("<ddd", v, w, dataset.times[i]))
        body.write(
            struct.pack(
                "<III", dataset.circuit_ids[i], dataset.episode_ids[i], dataset.frame_indices[i]
            )
        )
    payload = body.getvalue()
    crcs = [
        zlib.crc32(payload[off : off + CRC_CHUNK]) for off in range(0, max(len(payload), 1), CRC_CHUNK)
    ]
    with open(path, "wb") as fh:
        fh.write(DATASET_MAGIC)
        fh.write(struct.pack("<I", DATASET_VERSION))
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(payload)
        fh.write(struct.pack("<I", len(crcs)))
        fh.write(struct.pack(f"<{len(crcs)}I", *crcs))


def _read_exact(fh, n, what):
    data = fh.read(n)
    if len(data) != n:
        raise DatasetError(f"truncated dataset while reading {what}")
    return data


def read_dataset(path):
    with open(path, "rb") as fh:
        if _read_exact(fh, 4, "magic") != DATASET_MAGIC:
            raise DatasetError("bad magic; not an LRDS dataset")
        (version,) = struct.unpack("<I", _read_exact(fh, 4, "version"))
        if version != DATASET_VERSION:
            raise DatasetError(f"dataset version {version}, reader supports {DATASET_VERSION}")
        (hlen,) = struct.unpack("<I", _read_exact(fh, 4, "header length"))
        manifest = json.loads(_read_exact(fh, hlen, "header"))
        h, w, count = manifest["height"], manifest["width"], manifest["count"]
        stride = _record_stride(h, w)
        payload = _read_exact(fh, stride * count, "records")
        (nchunks,) = struct.unpack("<I", _read_exact(fh, 4, "checksum count"))
        crcs = struct.unpack(f"<{nchunks}I", _read_exact(fh, 4 * nchunks, "checksums"))
    expected = [
        zlib.crc32(payload[off : off + CRC_CHUNK]) for off in range(0, max(len(payload), 1), CRC_CHUNK)
    ]
    if list(crcs) != expected:
        raise DatasetError("checksum failure; dataset payload is corrupt")

    ds = Dataset(
        h,
        w,
        manifest["circuits"],
        Limits(v_max=manifest["v_max"], w_max=manifest["w_max"]),
    )
    img_bytes = h * w * 3
    for i in range(count):
        rec = payload[i * stride : (i + 1) * stride]
        ds.images.append(np.frombuffer(rec[:img_bytes], dtype=np.uint8).reshape(h, w, 3))
        v, wl, t = struct.unpack("<ddd", rec[img_bytes : img_bytes + 24])
        cid, eid, fid = struct.unpack("<III", rec[img_bytes + 24 :])
        ds.labels.append((v, wl))
        ds.times.append(t)
        ds.circuit_ids.append(cid)
        ds.episode_ids.append(eid)
        ds.frame_indices.append(fid)
    ds.episodes = manifest["episodes"]
    return ds


def export_dataset(dataset, out_dir):
    """Debug export: one portable pixmap per frame plus a CSV label file."""
    import csv
    import os

    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "labels.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["file", "v", "w", "t", "circuit", "episode", "frame"])
        for i in range(len(dataset)):
            name = f"frame_{i:06d}.ppm"
            _write_ppm(os.path.join(out_dir, name), dataset.images[i])
            v, w = dataset.labels[i]
            writer.writerow(
                [
                    name,
                    f"{v:.6f}",
                    f"{w:.6f}",
                    f"{dataset.times[i]:.4f}",
                    dataset.circuit_ids[i],
                    dataset.episode_ids[i],
                    dataset.frame_indices[i],
                ]
            )


def _write_ppm(path, pixels):
    h, w = pixels.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode())
        fh.write(pixels.tobytes())
