"""Training, episodic evaluation, and the generalization/robustness suites."""

from .episodes import EpisodeMetrics, run_episode
from .training import TrainHistory, TrainingDiverged, evaluate_internal, train
from .suites import (
    SuiteReport,
    emit_report,
    generalization_conditions,
    generalization_suite,
    robustness_conditions,
    robustness_suite,
)

__all__ = [
    "EpisodeMetrics",
    "run_episode",
    "TrainHistory",
    "TrainingDiverged",
    "evaluate_internal",
    "train",
    "SuiteReport",
    "emit_report",
    "generalization_conditions",
    "generalization_suite",
    "robustness_conditions",
    "robustness_suite",
]
