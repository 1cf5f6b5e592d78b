"""Seeded generators for synthetic scenes, labels and predictions.

Shared by the test suite, the gradcheck CLI subcommand and the benchmark.
"""
from __future__ import annotations

import math

import numpy as np

from .assign import AssignConfig, LabelTensorSet, ObbAnnotation, generate_heatmaps
from .geometry import Obb, canonicalize_obb, circumscribed_hbb, polygon_area
from .loss import PredictionTensorSet, ScalePredictions


def rotated_rect(cx: float, cy: float, w: float, h: float, angle: float) -> Obb:
    """Canonical oriented box for a rotated rectangle."""
    c, s = math.cos(angle), math.sin(angle)
    half = np.array([[-w / 2, -h / 2], [w / 2, -h / 2], [w / 2, h / 2], [-w / 2, h / 2]])
    rot = half @ np.array([[c, s], [-s, c]])
    return canonicalize_obb(rot + [cx, cy])


def random_obb(
    rng: np.random.Generator,
    img_size: int = 800,
    min_side: float = 12.0,
    max_side: float = 400.0,
    max_area_ratio: float | None = None,
) -> Obb:
    """Random rotated rectangle fully inside the image.

    ``max_area_ratio`` caps area(box)/area(circumscribed box) by resampling,
    which keeps the gliding-vertex code exactly invertible.
    """
    while True:
        w = rng.uniform(min_side, max_side)
        h = rng.uniform(min_side, max_side)
        angle = rng.uniform(0.0, math.pi)
        reach = 0.5 * math.hypot(w, h)
        if 2 * reach >= img_size - 2:
            continue
        cx = rng.uniform(reach + 1, img_size - reach - 1)
        cy = rng.uniform(reach + 1, img_size - reach - 1)
        obb = rotated_rect(cx, cy, w, h, angle)
        if max_area_ratio is not None:
            hbb = circumscribed_hbb(obb)
            if polygon_area(obb.vertices) / hbb.area >= max_area_ratio:
                continue
        return obb


def random_scene(rng: np.random.Generator, n_objects: int, cfg: AssignConfig, **obb_kwargs) -> list[ObbAnnotation]:
    return [
        ObbAnnotation(random_obb(rng, cfg.img_size, **obb_kwargs).vertices, int(rng.integers(cfg.num_classes)))
        for _ in range(n_objects)
    ]


def random_predictions(rng: np.random.Generator, labels: LabelTensorSet, low: float = 0.05, high: float = 0.95) -> PredictionTensorSet:
    """Uniform random predictions strictly inside their open ranges."""
    scales = []
    for lab in labels.scales:
        h, w = lab.obj.shape
        obb = np.empty((h, w, 9))
        obb[..., :4] = rng.uniform(0.2, 12.0, size=(h, w, 4))
        obb[..., 4:8] = rng.uniform(low, high, size=(h, w, 4))
        obb[..., 8] = rng.uniform(low, high, size=(h, w))
        scales.append(
            ScalePredictions(
                stride=lab.stride,
                obj=rng.uniform(low, high, size=(h, w)),
                obb=obb,
                cls=rng.uniform(low, high, size=lab.cls.shape),
            )
        )
    return PredictionTensorSet(scales)


def perfect_predictions(
    labels: LabelTensorSet,
    obj_pos: float = 0.95,
    obj_neg: float = 0.02,
    cls_hit: float = 0.9,
    cls_miss: float = 0.05,
) -> PredictionTensorSet:
    """Predictions that reproduce the labels: exact box codes at positives."""
    scales = []
    for lab in labels.scales:
        pos = lab.obj > 0
        obb = lab.obb.astype(np.float64).copy()
        # negatives carry no meaningful code; keep decodable values anyway
        obb[~pos, :4] = 1.0
        obb[~pos, 8] = 0.5
        cls = np.where(lab.cls > 0, cls_hit, cls_miss).astype(np.float64)
        scales.append(
            ScalePredictions(
                stride=lab.stride,
                obj=np.where(pos, obj_pos, obj_neg).astype(np.float64),
                obb=obb,
                cls=cls,
            )
        )
    return PredictionTensorSet(scales)


def random_problem(seed: int, grid: int = 16, num_classes: int = 3, n_objects: int = 6) -> tuple[LabelTensorSet, PredictionTensorSet]:
    """Small two-scale label/prediction pair for gradient checking."""
    rng = np.random.default_rng(seed)
    cfg = AssignConfig(strides=(8, 16), img_size=grid * 8, num_classes=num_classes)
    anns = random_scene(rng, n_objects, cfg, min_side=20.0, max_side=min(120.0, grid * 8 - 30.0))
    labels = generate_heatmaps(anns, cfg)
    return labels, random_predictions(rng, labels)
