"""
Network assembly, cost accounting, training and metrics.
"""

from .costs import CostReport, count_costs, count_params, module_key
from .metrics import classification_metrics, part_ious, restricted_argmax, segmentation_metrics
from .network import (
    FUSION_MODES,
    Classifier,
    MLPHead,
    ModelConfig,
    PartSegmenter,
    build_classifier,
    build_model,
    build_part_segmenter,
    feature_propagate,
    forward_classify,
    forward_part_segment,
)
from .training import EpochRecord, History, TrainSettings, evaluate, predict, train

__all__ = [
    "Classifier",
    "CostReport",
    "EpochRecord",
    "FUSION_MODES",
    "History",
    "MLPHead",
    "ModelConfig",
    "PartSegmenter",
    "TrainSettings",
    "build_classifier",
    "build_model",
    "build_part_segmenter",
    "classification_metrics",
    "count_costs",
    "count_params",
    "evaluate",
    "feature_propagate",
    "forward_classify",
    "forward_part_segment",
    "module_key",
    "part_ious",
    "predict",
    "restricted_argmax",
    "segmentation_metrics",
    "train",
]
