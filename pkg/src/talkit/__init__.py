"""Post-classifier temporal action localization: interval merging,
weighted ensembling, multi-threshold mAP scoring and a synthetic simulator."""

from .ensemble import WeightedModel, aggregate, ensemble_pipeline, fuse_confidences, iou_merge
from .errors import DomainError, GenerationError, InputError, ParseError, TalError, ValidationError
from .evaluation import EvalConfig, EvalReport, average_precision, evaluate, match_predictions
from .localizer import IntervalStream, localize, merge_stream, partition_count
from .segments import Annotation, GroundTruth, PredictionSet, Segment, temporal_iou, validate_prediction_set

__version__ = "0.1.0"

__all__ = [
    "Annotation",
    "DomainError",
    "EvalConfig",
    "EvalReport",
    "GenerationError",
    "GroundTruth",
    "InputError",
    "IntervalStream",
    "ParseError",
    "PredictionSet",
    "Segment",
    "TalError",
    "ValidationError",
    "WeightedModel",
    "aggregate",
    "average_precision",
    "ensemble_pipeline",
    "evaluate",
    "fuse_confidences",
    "iou_merge",
    "localize",
    "match_predictions",
    "merge_stream",
    "partition_count",
    "temporal_iou",
    "validate_prediction_set",
]
