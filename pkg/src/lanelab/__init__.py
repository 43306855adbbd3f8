"""lanelab: a deterministic desk-scale laboratory for end-to-end
vision-based driving.

Subpackages: ``nncore`` (tensor network core), ``models`` (the four driving
brains), ``simworld`` (circuits, dynamics, camera), ``pilots`` (expert and
neural agents), ``datakit`` (recording and datasets), ``harness`` (training,
episodes, evaluation suites).
"""

__version__ = "1.0.0"

from .common import DriveCommand, Limits

__all__ = ["DriveCommand", "Limits", "__version__"]
