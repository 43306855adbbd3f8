"""Episode execution, the evaluation suites, and report emission."""

import json

import numpy as np
import pytest

from lanelab.common import DriveCommand
from lanelab.harness.episodes import EpisodeMetrics, run_episode, start_state
from lanelab.harness.suites import (
    NOISE_LEVELS,
    emit_report,
    generalization_conditions,
    generalization_suite,
    load_report,
    report_from_dict,
    report_to_dict,
    robustness_conditions,
    robustness_suite,
)
from lanelab.pilots import ExpertBrain
from lanelab.simworld import TrackVariation


class CrashBrain:
    """Drives hard left at full speed; fails every episode quickly."""

    def reset(self):
        pass

    def act(self, image):
        return DriveCommand(12.0, 2.5)


class TestRunEpisode:
    def test_max_time_zero_is_time_limit(self, oval, camera64):
        m = run_episode(ExpertBrain(), oval, TrackVariation(), camera64, max_time=0.0)
        assert not m.completed
        assert m.failure_reason == "time_limit"
        assert m.lap_seconds is None

    def test_expert_completes_oval(self, oval, camera64):
        m = run_episode(ExpertBrain(), oval, TrackVariation(), camera64, seed=1)
        assert m.completed
        assert m.failure_reason == "none"
        assert m.position_deviation_mae < 2.5
        assert m.average_speed > 0.0
        # path length consistency: speed * time within 10% of the circuit length
        assert abs(m.average_speed * m.lap_seconds - oval.length) / oval.length < 0.1

    def test_expert_fails_without_line(self, oval, camera64):
        m = run_episode(
            ExpertBrain(), oval, TrackVariation(line_color="none"), camera64, seed=1
        )
        assert not m.completed
        assert m.failure_reason == "line_lost_timeout"

    def test_crash_brain_goes_off_track(self, oval, camera64):
        m = run_episode(CrashBrain(), oval, TrackVariation(), camera64, seed=0)
        assert not m.completed
        assert m.failure_reason == "off_track"

    def test_deterministic(self, oval, camera64):
        a = run_episode(ExpertBrain(), oval, TrackVariation(), camera64, seed=3, max_time=20.0)
        b = run_episode(ExpertBrain(), oval, TrackVariation(), camera64, seed=3, max_time=20.0)
        assert a == b

    def test_start_state_seed_jitter(self, oval):
        s0 = start_state(oval, seed=0)
        s1 = start_state(oval, seed=1)
        assert (s0.x, s0.y) != (s1.x, s1.y)
        assert start_state(oval, seed=0) == s0

    def test_metrics_as_dict(self):
        m = EpisodeMetrics(completed=True, lap_seconds=50.0, position_deviation_mae=0.2,
                           average_speed=9.0)
        d = m.as_dict()
        assert d["completed"] and d["lap_seconds"] == 50.0


class TestConditionSets:
    def test_generalization_columns(self):
        conds = generalization_conditions()
        assert len(conds) == 6
        combos = [
            (c["variation"].line_color, c["variation"].road_color, c["variation"].walls)
            for c in conds
        ]
        assert combos == [
            ("red", "grey", True),
            ("red", "white", True),
            ("white", "grey", True),
            ("none", "grey", True),
            ("none", "white", True),
            ("none", "grey", False),
        ]
        assert all(c["noise_p"] == 0.0 for c in conds)

    def test_robustness_columns(self):
        conds = robustness_conditions()
        labels = [c["label"] for c in conds]
        assert labels[:3] == ["camera_moved_left", "camera_moved_right", "camera_rotated_down"]
        noise = [c["noise_p"] for c in conds if c["noise_p"] > 0]
        assert noise == [0.2, 0.4, 0.6]
        assert NOISE_LEVELS == (0.2, 0.4, 0.6)
        assert conds[0]["camera"]["lateral_offset"] == -conds[1]["camera"]["lateral_offset"]


@pytest.fixture(scope="module")
def crash_report(oval, camera64):
    return generalization_suite(
        {"crash": CrashBrain()}, oval, camera=camera64, repeats=2, base_seed=0, max_time=10.0
    )


class TestSuites:
    def test_grid_exhaustive(self, crash_report):
        assert crash_report.conditions == [c["label"] for c in generalization_conditions()]
        assert set(crash_report.cells) == {("crash", i) for i in range(6)}
        for cell in crash_report.cells.values():
            assert len(cell["episodes"]) == 2

    def test_failed_cells_not_fabricated(self, crash_report):
        for cell in crash_report.cells.values():
            assert cell["completed"] is False
            assert cell["lap_seconds"] is None

    def test_zero_magnitude_perturbation_identity(self, oval, camera64):
        report = robustness_suite(
            {"expert": ExpertBrain()},
            oval,
            camera=camera64,
            repeats=1,
            base_seed=5,
            max_time=15.0,
            shift=0.0,
            pitch_down=0.0,
            noise_levels=(),
        )
        plain = run_episode(
            ExpertBrain(), oval, TrackVariation(), camera64, seed=5, max_time=15.0
        ).as_dict()
        for ci in range(3):
            assert report.cells[("expert", ci)]["episodes"][0] == plain


class TestReports:
    def test_csv_dash_for_failures(self, crash_report, tmp_path):
        p = tmp_path / "r.csv"
        emit_report(crash_report, p, "csv")
        lines = p.read_text().strip().splitlines()
        assert lines[0].startswith("brain,")
        assert lines[1].split(",")[1:] == ["-"] * 12

    def test_json_round_trip(self, crash_report, tmp_path):
        p = tmp_path / "r.json"
        emit_report(crash_report, p, "json")
        loaded = load_report(p)
        assert loaded.kind == crash_report.kind
        assert loaded.conditions == crash_report.conditions
        assert loaded.cells == crash_report.cells

    def test_emission_byte_identical(self, crash_report, tmp_path):
        for fmt in ("json", "csv"):
            p1 = tmp_path / f"a.{fmt}"
            p2 = tmp_path / f"b.{fmt}"
            emit_report(crash_report, p1, fmt)
            emit_report(crash_report, p2, fmt)
            assert p1.read_bytes() == p2.read_bytes()

    def test_round_trip_via_dict(self, crash_report):
        doc = json.loads(json.dumps(report_to_dict(crash_report)))
        again = report_from_dict(doc)
        assert again.cells == crash_report.cells

    def test_unknown_format(self, crash_report, tmp_path):
        with pytest.raises(ValueError):
            emit_report(crash_report, tmp_path / "x.xml", "xml")


def test_suite_figure_renders(crash_report, tmp_path):
    from lanelab.harness.figures import suite_figure

    out = tmp_path / "fig.png"
    suite_figure(crash_report, out)
    assert out.stat().st_size > 0
