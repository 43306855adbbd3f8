"""Circuit geometry, point queries, lap tracking, and track file IO."""

import math

import numpy as np
import pytest

from lanelab.simworld.tracks import (
    LapTracker,
    OffTrackError,
    TrackError,
    TrackField,
    TrackSpec,
    TrackVariation,
    builtin_circuits,
    distance_to_centerline,
    get_circuit,
    lap_progress,
    load_track,
    resample_closed,
    save_track,
)


def circle_track(radius=50.0, n=256, **kw):
    th = np.linspace(0, 2 * math.pi, n, endpoint=False)
    pts = np.column_stack([radius * np.cos(th), radius * np.sin(th)])
    return TrackSpec(name="circle", centerline=pts, **kw)


class TestBuiltinCircuits:
    def test_seven_circuits(self):
        assert len(builtin_circuits()) == 7

    def test_train_test_split(self):
        tags = [t.tag for t in builtin_circuits()]
        assert tags.count("TRAIN") == 4
        assert tags.count("TEST") == 3

    def test_unique_names_and_lookup(self):
        tracks = builtin_circuits()
        names = [t.name for t in tracks]
        assert len(set(names)) == 7
        for name in names:
            assert get_circuit(name).name == name
        with pytest.raises(TrackError):
            get_circuit("nurburgring")

    def test_geometry_invariants(self):
        for track in builtin_circuits():
            pts = track.centerline
            assert len(pts) >= 32
            closed = np.vstack([pts, pts[:1]])
            seg = np.hypot(*np.diff(closed, axis=0).T)
            assert seg.max() < track.road_width
            assert track.road_width > 4 * track.line_width
            assert track.length > 100.0


class TestTrackSpecValidation:
    def test_too_few_points(self):
        with pytest.raises(TrackError):
            circle_track(n=8)

    def test_duplicated_closure_point_rejected(self):
        th = np.linspace(0, 2 * math.pi, 64)  # endpoint included -> duplicate
        pts = np.column_stack([50 * np.cos(th), 50 * np.sin(th)])
        with pytest.raises(TrackError):
            TrackSpec(name="bad", centerline=pts)

    def test_narrow_road_rejected(self):
        with pytest.raises(TrackError, match="road_width"):
            circle_track(road_width=1.5)

    def test_self_intersection_rejected(self):
        th = np.linspace(0, 2 * math.pi, 200, endpoint=False)
        r = 30 + 40 * np.cos(2 * th)  # figure-eight-ish, crosses itself
        pts = np.column_stack([r * np.cos(th), r * np.sin(th)])
        with pytest.raises(TrackError):
            TrackSpec(name="eight", centerline=resample_closed(pts, 1.0))


class TestVariation:
    def test_enumerations(self):
        TrackVariation(line_color="none", road_color="white", walls=False)
        with pytest.raises(TrackError):
            TrackVariation(line_color="blue")
        with pytest.raises(TrackError):
            TrackVariation(road_color="black")


class TestDistance:
    def test_on_waypoint_is_zero(self):
        track = get_circuit("oval")
        x, y = track.centerline[10]
        assert distance_to_centerline(track, x, y) < 1e-9

    def test_perpendicular_offset_from_straight(self):
        # axis-aligned rectangle: the bottom edge is an exact straight segment
        w, h = 120.0, 60.0
        xs = np.linspace(-w / 2, w / 2, 40, endpoint=False)
        ys = np.linspace(-h / 2, h / 2, 20, endpoint=False)
        pts = np.concatenate(
            [
                np.column_stack([xs, np.full_like(xs, -h / 2)]),
                np.column_stack([np.full_like(ys, w / 2), ys]),
                np.column_stack([xs[::-1] + xs[1] - xs[0], np.full_like(xs, h / 2)]),
                np.column_stack([np.full_like(ys, -w / 2), ys[::-1] + ys[1] - ys[0]]),
            ]
        )
        track = TrackSpec(name="rect", centerline=pts)
        assert distance_to_centerline(track, 0.0, -h / 2 + 2.0) == pytest.approx(2.0, abs=1e-9)

    def test_matches_dense_resampling_oracle(self):
        track = get_circuit("oval")
        dense = resample_closed(track.centerline, 0.01)
        rng = np.random.default_rng(0)
        idx = rng.integers(0, len(track.centerline), size=100)
        offsets = rng.uniform(-8, 8, size=(100, 2))
        for i, off in zip(idx, offsets):
            p = track.centerline[i] + off
            brute = float(np.min(np.hypot(dense[:, 0] - p[0], dense[:, 1] - p[1])))
            assert abs(distance_to_centerline(track, p[0], p[1]) - brute) < 0.01


class TestLapProgress:
    def test_start_waypoint_is_zero(self):
        track = get_circuit("oval")
        x, y = track.centerline[track.start_index]
        assert lap_progress(track, x, y) < 1e-6

    def test_antipodal_point_on_circle(self):
        track = circle_track()
        start = track.centerline[0]
        assert lap_progress(track, -start[0], -start[1]) == pytest.approx(0.5, abs=0.01)

    def test_off_track_raises(self):
        track = circle_track()
        with pytest.raises(OffTrackError):
            lap_progress(track, 500.0, 500.0)

    def test_monotone_along_centerline(self):
        track = get_circuit("s_loop")
        fracs = [lap_progress(track, x, y) for x, y in track.centerline]
        deltas = np.diff(fracs)
        # non-decreasing except for the single wrap back to 0
        wraps = int(np.sum(deltas < -0.5))
        assert wraps <= 1
        assert np.all((deltas >= -1e-9) | (deltas < -0.5))


class TestLapTracker:
    def test_wiggle_across_start_does_not_count(self):
        tracker = LapTracker()
        for frac in [0.01, 0.99, 0.01, 0.99, 0.01]:
            laps = tracker.update(frac)
        assert laps == 0

    def test_full_traversal_counts_one(self):
        tracker = LapTracker()
        for frac in np.linspace(0, 0.999, 200):
            tracker.update(float(frac))
        assert tracker.update(0.001) == 1

    def test_two_laps(self):
        tracker = LapTracker()
        laps = 0
        for _ in range(2):
            for frac in np.linspace(0, 0.999, 150):
                laps = tracker.update(float(frac))
            laps = tracker.update(0.001)
        assert laps == 2


class TestTrackField:
    def test_matches_exact_distance(self):
        track = get_circuit("oval")
        field = TrackField(track)
        rng = np.random.default_rng(1)
        pts = track.centerline[rng.integers(0, len(track.centerline), 50)] + rng.uniform(
            -6, 6, (50, 2)
        )
        d, frac = field.query(pts)
        for p, di, fi in zip(pts, d, frac):
            assert abs(di - distance_to_centerline(track, p[0], p[1])) < 0.03
            assert 0.0 <= fi < 1.0

    def test_start_fraction_aligned_with_lap_progress(self):
        track = get_circuit("oval")
        field = TrackField(track)
        x, y = track.centerline[track.start_index]
        _, frac = field.query([[x, y]])
        assert min(frac[0], 1.0 - frac[0]) < 0.01


class TestTrackIO:
    def test_round_trip(self, tmp_path):
        track = get_circuit("tight_corner")
        path = tmp_path / "t.yaml"
        save_track(track, path)
        loaded = load_track(path)
        assert loaded.name == track.name
        assert loaded.tag == track.tag
        assert loaded.road_width == track.road_width
        assert loaded.start_index == track.start_index
        assert np.max(np.abs(loaded.centerline - track.centerline)) < 1e-3
