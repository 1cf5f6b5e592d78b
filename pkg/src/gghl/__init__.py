"""Label assignment, loss computation and evaluation for oriented object detection."""

from . import errors
from .assign import (
    AssignConfig,
    AssignmentStats,
    LabelTensorSet,
    ObbAnnotation,
    ScaleLabels,
    area_norm,
    assignment_stats,
    generate_heatmaps,
    route_scale,
)
from .codec import ObbCode, decode_at, encode_at, one_hot
from .decode import Detection, decode_predictions, rotated_nms
from .evaluation import EvalReport, average_precision, evaluate_scenes
from .gaussian import GaussianRegion, gaussian_value, mahalanobis_sq, region_from_obb, shrunk_radii
from .geometry import (
    Hbb,
    Obb,
    canonicalize_obb,
    circumscribed_hbb,
    hbb_giou,
    hbb_iou,
    obb_metrics,
    polygon_area,
    polygon_iou,
    rasterized_iou,
)
from .loss import (
    FiniteDiffReport,
    GradientTensorSet,
    LossBreakdown,
    OwamField,
    PredictionTensorSet,
    ScalePredictions,
    compose_training_predictions,
    finite_diff_check,
    gcp_confidence,
    joint_log_likelihood,
    loss_gradients,
    obb_regression_loss,
    owam_weights,
    total_loss,
)
from .tensor_io import parse_dota, read_class_list, read_tensorset, render_heatmap_png, write_dota, write_tensorset

__version__ = "0.1.0"

__all__ = [
    "AssignConfig",
    "AssignmentStats",
    "Detection",
    "EvalReport",
    "FiniteDiffReport",
    "GaussianRegion",
    "GradientTensorSet",
    "Hbb",
    "LabelTensorSet",
    "LossBreakdown",
    "Obb",
    "ObbAnnotation",
    "ObbCode",
    "OwamField",
    "PredictionTensorSet",
    "ScaleLabels",
    "ScalePredictions",
    "area_norm",
    "assignment_stats",
    "average_precision",
    "canonicalize_obb",
    "circumscribed_hbb",
    "compose_training_predictions",
    "decode_at",
    "decode_predictions",
    "encode_at",
    "errors",
    "evaluate_scenes",
    "finite_diff_check",
    "gaussian_value",
    "gcp_confidence",
    "generate_heatmaps",
    "hbb_giou",
    "hbb_iou",
    "joint_log_likelihood",
    "loss_gradients",
    "mahalanobis_sq",
    "obb_metrics",
    "obb_regression_loss",
    "one_hot",
    "owam_weights",
    "parse_dota",
    "polygon_area",
    "polygon_iou",
    "rasterized_iou",
    "read_class_list",
    "read_tensorset",
    "region_from_obb",
    "render_heatmap_png",
    "rotated_nms",
    "route_scale",
    "shrunk_radii",
    "total_loss",
    "write_dota",
    "write_tensorset",
]
