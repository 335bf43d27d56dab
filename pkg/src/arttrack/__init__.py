"""Multi-object tracking for maneuvering animals.

An IMM bank of unscented filters (constant velocity, constant acceleration,
coordinated turn) predicts each track; detections are assigned in cascaded
stages by motion state with an uncertainty-weighted IoU / Mahalanobis cost.
"""

from .association import AufConfig, StageId, fuse, solve_assignment
from .config import Config, ConfigError, TrackerConfig, load_config
from .geometry import BoundingBox, Detection, iou
from .imm import ImmConfig, ImmState
from .metrics import SequenceMetrics, dataset_stats, evaluate
from .motion import ModelId, NoiseConfig
from .mot_io import MotFormatError, SequenceData, parse_mot_file, read_mot, write_results
from .synth import SimConfig, generate_sequence
from .tracker import Ablation, CascadeTracker, track_sequence
from .ukf import NumericalDegeneracyError, UtParams

__version__ = "0.1.0"

__all__ = [
    "Ablation", "AufConfig", "BoundingBox", "CascadeTracker", "Config", "ConfigError", "Detection",
    "ImmConfig", "ImmState", "ModelId", "MotFormatError", "NoiseConfig", "NumericalDegeneracyError",
    "SequenceData", "SequenceMetrics", "SimConfig", "StageId", "TrackerConfig", "UtParams",
    "dataset_stats", "evaluate", "fuse", "generate_sequence", "iou", "load_config", "parse_mot_file",
    "read_mot", "solve_assignment", "track_sequence", "write_results",
]
