"""Inference path: thresholding, box decoding and rotated NMS."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assign import AssignConfig
from .codec import ObbCode, decode_at
from .geometry import Obb, polygon_iou
from .loss import PredictionTensorSet


@dataclass(frozen=True)
class Detection:
    obb: Obb
    class_id: int
    score: float


def decode_predictions(
    preds: PredictionTensorSet,
    conf: float = 0.2,
    cfg: AssignConfig | None = None,
    score_mode: str = "product",
) -> list[Detection]:
    """Decode every cell whose score clears the confidence threshold.

    ``score_mode`` "product" scores a cell as objectness times the best raw
    class score; "objectness" thresholds on objectness alone. Output order
    follows scale then row-major cell order and is not sorted.
    """
    if not 0.0 < conf < 1.0:
        raise ValueError("conf must be in (0, 1)")
    if score_mode not in ("product", "objectness"):
        raise ValueError(f"unknown score mode {score_mode!r}")
    detections = []
    for scale in preds.scales:
        best_cls = np.argmax(scale.cls, axis=-1)
        best_score = np.take_along_axis(scale.cls, best_cls[..., None], axis=-1)[..., 0]
        score = scale.obj * best_score if score_mode == "product" else scale.obj
        ys, xs = np.nonzero(score >= conf)
        for y, x in zip(ys, xs):
            code = ObbCode.from_vector(scale.obb[y, x])
            obb = decode_at(code, (int(x), int(y)), scale.stride)
            detections.append(Detection(obb, int(best_cls[y, x]), float(score[y, x])))
    return detections


def rotated_nms(dets: list[Detection], iou_thr: float = 0.45) -> list[Detection]:
    """Greedy class-wise NMS on exact rotated IoU.

    Detections are ranked by descending score (ties: lower class id, then
    input order); a detection survives iff its IoU with every already kept
    detection of the same class is at most ``iou_thr``.
    """
    if not 0.0 < iou_thr < 1.0:
        raise ValueError("iou_thr must be in (0, 1)")
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, dets[i].class_id, i))
    kept: list[Detection] = []
    for i in order:
        d = dets[i]
        if all(k.class_id != d.class_id or polygon_iou(k.obb, d.obb) <= iou_thr for k in kept):
            kept.append(d)
    return kept
