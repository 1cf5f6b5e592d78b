"""Average precision and mAP over rotated detections.

Matching is greedy in score order: each detection takes the unmatched
ground-truth box of its class with the highest IoU, and counts as a true
positive when that IoU clears the threshold. AP integrates the area under
the all-point precision envelope. Difficulty-flagged ground truth is
dropped before matching and counting.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .assign import ObbAnnotation
from .decode import Detection
from .geometry import canonicalize_obb, polygon_iou


@dataclass
class EvalReport:
    per_class_ap: dict[int, float]
    mean_ap: float
    tp: int
    fp: int
    fn: int
    pr_curves: dict[int, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)


def _ap_from_pr(recall: np.ndarray, precision: np.ndarray) -> float:
    """Area under the precision envelope, all-point interpolation."""
    mrec = np.concatenate([[0.0], recall, [1.0]])
    mpre = np.concatenate([[0.0], precision, [0.0]])
    for i in range(len(mpre) - 2, -1, -1):
        mpre[i] = max(mpre[i], mpre[i + 1])
    idx = np.nonzero(mrec[1:] != mrec[:-1])[0]
    return float(np.sum((mrec[idx + 1] - mrec[idx]) * mpre[idx + 1]))


def evaluate_scenes(scenes: list[tuple[list[Detection], list[ObbAnnotation]]], iou_thr: float = 0.5) -> EvalReport:
    """Pooled PR evaluation over multiple (detections, ground truth) scenes."""
    classes = sorted({g.class_id for _, gts in scenes for g in gts if not g.difficult})
    per_class_ap: dict[int, float] = {}
    pr_curves: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    tp_total = fp_total = fn_total = 0
    for c in classes:
        records = []  # (score, is_tp) pooled over scenes
        n_gt = 0
        for dets, gts in scenes:
            gt_boxes = [canonicalize_obb(g.vertices) for g in gts if g.class_id == c and not g.difficult]
            n_gt += len(gt_boxes)
            matched = [False] * len(gt_boxes)
            order = sorted(
                (i for i, d in enumerate(dets) if d.class_id == c),
                key=lambda i: (-dets[i].score, i),
            )
            for i in order:
                ious = [0.0 if matched[j] else polygon_iou(dets[i].obb, gt_boxes[j]) for j in range(len(gt_boxes))]
                best = int(np.argmax(ious)) if ious else -1
                if best >= 0 and ious[best] >= iou_thr and not matched[best]:
                    matched[best] = True
                    records.append((dets[i].score, True))
                else:
                    records.append((dets[i].score, False))
        records.sort(key=lambda r: -r[0])
        tp_cum = np.cumsum([r[1] for r in records]) if records else np.zeros(0)
        fp_cum = np.cumsum([not r[1] for r in records]) if records else np.zeros(0)
        recall = tp_cum / n_gt if n_gt else np.zeros(len(records))
        precision = tp_cum / np.maximum(tp_cum + fp_cum, 1)
        per_class_ap[c] = _ap_from_pr(recall, precision) if n_gt else 0.0
        pr_curves[c] = (recall, precision)
        tp = int(tp_cum[-1]) if len(tp_cum) else 0
        tp_total += tp
        fp_total += len(records) - tp
        fn_total += n_gt - tp
    mean_ap = float(np.mean(list(per_class_ap.values()))) if per_class_ap else 0.0
    return EvalReport(per_class_ap, mean_ap, tp_total, fp_total, fn_total, pr_curves)


def average_precision(dets: list[Detection], gts: list[ObbAnnotation], iou_thr: float = 0.5) -> EvalReport:
    """Single-scene wrapper around :func:`evaluate_scenes`."""
    return evaluate_scenes([(dets, gts)], iou_thr)
