"""Tri-domain contrastive anomaly localization with discord-based point labelling."""

from .pipeline import PipelineConfig, StageError, run, run_batch
from .series import DatasetMeta, SegmentationConfig, TimeSeries, load_ucr

__version__ = "0.1.0"

__all__ = ["DatasetMeta", "PipelineConfig", "SegmentationConfig", "StageError", "TimeSeries",
           "load_ucr", "run", "run_batch"]
