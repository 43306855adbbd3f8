"""Generalization and robustness evaluation grids plus report emission."""

import json
from dataclasses import dataclass, field, replace as dc_replace

from ..simworld.camera import CameraConfig
from ..simworld.tracks import TrackVariation
from .episodes import run_episode

# perturbation magnitudes (directions fixed, magnitudes configurable)
CAMERA_SHIFT = 0.5  # m
CAMERA_PITCH_DOWN = 0.15  # rad
NOISE_LEVELS = (0.2, 0.4, 0.6)


def generalization_conditions():
    """The six appearance columns, in table order."""
    combos = [
        ("red", "grey", True),
        ("red", "white", True),
        ("white", "grey", True),
        ("none", "grey", True),
        ("none", "white", True),
        ("none", "grey", False),
    ]
    return [
        {
            "label": f"line={line}/road={road}/walls={'yes' if walls else 'no'}",
            "variation": TrackVariation(line_color=line, road_color=road, walls=walls),
            "camera": {},
            "noise_p": 0.0,
        }
        for line, road, walls in combos
    ]


def robustness_conditions(shift=CAMERA_SHIFT, pitch_down=CAMERA_PITCH_DOWN, noise_levels=NOISE_LEVELS):
    """Camera moved left/right, rotated down, then the noise levels."""
    conds = [
        {
            "label": "camera_moved_left",
            "variation": TrackVariation(),
            "camera": {"lateral_offset": -shift},
            "noise_p": 0.0,
        },
        {
            "label": "camera_moved_right",
            "variation": TrackVariation(),
            "camera": {"lateral_offset": shift},
            "noise_p": 0.0,
        },
        {
            "label": "camera_rotated_down",
            "variation": TrackVariation(),
            "camera": {"extra_pitch_down": pitch_down},
            "noise_p": 0.0,
        },
    ]
    for p in noise_levels:
        conds.append(
            {
                "label": f"noise_p={p}",
                "variation": TrackVariation(),
                "camera": {},
                "noise_p": p,
            }
        )
    return conds


@dataclass
class SuiteReport:
    """Grid of (brain x condition) episode metrics, averaged over repeats."""

    kind: str
    circuit: str
    repeats: int
    seeds: list
    conditions: list  # labels, table order
    brains: list  # names, table order
    cells: dict = field(default_factory=dict)  # (brain, cond_idx) -> cell dict

    def cell(self, brain, cond_idx):
        return self.cells[(brain, cond_idx)]


def _aggregate(runs):
    done = [r for r in runs if r.completed]
    return {
        "completed": len(done) == len(runs),
        "lap_seconds": (sum(r.lap_seconds for r in done) / len(done)) if done else None,
        "position_deviation_mae": sum(r.position_deviation_mae for r in runs) / len(runs),
        "average_speed": sum(r.average_speed for r in runs) / len(runs),
        "failure_reasons": [r.failure_reason for r in runs],
        "episodes": [r.as_dict() for r in runs],
    }


def _run_grid(kind, brains, track, camera, conditions, repeats, base_seed, max_time=None):
    seeds = [base_seed + r for r in range(repeats)]
    report = SuiteReport(
        kind=kind,
        circuit=track.name,
        repeats=repeats,
        seeds=seeds,
        conditions=[c["label"] for c in conditions],
        brains=list(brains),
    )
    for bname, brain in brains.items():
        for ci, cond in enumerate(conditions):
            cam = dc_replace(camera, **cond["camera"]) if cond["camera"] else camera
            runs = [
                run_episode(
                    brain,
                    track,
                    cond["variation"],
                    cam,
                    noise_p=cond["noise_p"],
                    seed=s,
                    max_time=max_time,
                )
                for s in seeds
            ]
            report.cells[(bname, ci)] = _aggregate(runs)
    return report


def generalization_suite(brains, track, camera=None, repeats=3, base_seed=0, max_time=None):
    """Evaluate every brain over the six appearance variations."""
    camera = camera or CameraConfig()
    return _run_grid(
        "generalization", brains, track, camera, generalization_conditions(), repeats, base_seed, max_time
    )


def robustness_suite(brains, track, camera=None, repeats=3, base_seed=0, max_time=None, **magnitudes):
    """Evaluate every brain under camera offsets and salt-and-pepper noise."""
    camera = camera or CameraConfig()
    return _run_grid(
        "robustness", brains, track, camera, robustness_conditions(**magnitudes), repeats, base_seed, max_time
    )


# ---------------------------------------------------------------------------
# emission


def report_to_dict(report):
    return {
        "kind": report.kind,
        "circuit": report.circuit,
        "repeats": report.repeats,
        "seeds": report.seeds,
        "conditions": report.conditions,
        "brains": report.brains,
        "cells": [
            {"brain": b, "condition": report.conditions[ci], **report.cells[(b, ci)]}
            for b in report.brains
            for ci in range(len(report.conditions))
        ],
    }


def report_from_dict(doc):
    report = SuiteReport(
        kind=doc["kind"],
        circuit=doc["circuit"],
        repeats=doc["repeats"],
        seeds=doc["seeds"],
        conditions=doc["conditions"],
        brains=doc["brains"],
    )
    for cell in doc["cells"]:
        ci = doc["conditions"].index(cell["condition"])
        report.cells[(cell["brain"], ci)] = {
            k: v for k, v in cell.items() if k not in ("brain", "condition")
        }
    return report


def _csv_text(report):
    lines = []
    header = ["brain"]
    for label in report.conditions:
        header += [f"{label} lap_s", f"{label} dev_mae"]
    lines.append(",".join(header))
    for b in report.brains:
        row = [b]
        for ci in range(len(report.conditions)):
            cell = report.cells[(b, ci)]
            if cell["completed"]:
                row += [f"{cell['lap_seconds']:.1f}", f"{cell['position_deviation_mae']:.2f}"]
            else:
                row += ["-", "-"]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def emit_report(report, path, format="json"):
    """Write the suite grid; emission is byte-stable for a given report."""
    if format == "json":
        text = json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n"
    elif format == "csv":
        text = _csv_text(report)
    else:
        raise ValueError(f"unknown report format {format!r}")
    with open(path, "w", newline="") as fh:
        fh.write(text)


def load_report(path):
    with open(path) as fh:
        return report_from_dict(json.load(fh))
