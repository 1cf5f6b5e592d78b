"""Gaussian-heatmap label assignment over the three feature-map scales.

Each annotated box is routed to one scale by its longest side, converted to
an oriented Gaussian, and every grid cell whose center falls inside the
shrunk ellipse becomes a positive location of that box. Overlapping regions
are resolved by the larger raw density (exact ties keep the earlier
annotation), retained densities are min-max rescaled per region, and every
positive cell receives the box code, one-hot class, owning region id and
the area-normalization factor.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import codec
from .errors import InvalidAnnotation, SideOutOfRange
from .gaussian import region_from_obb
from .geometry import Obb, canonicalize_obb, circumscribed_hbb, obb_metrics

logger = logging.getLogger(__name__)

REGION_ID_BACKGROUND = -1


@dataclass(frozen=True)
class ObbAnnotation:
    """One ground-truth oriented box in image pixels."""

    vertices: np.ndarray  # (4, 2)
    class_id: int
    difficult: bool = False

    def __post_init__(self):
        object.__setattr__(self, "vertices", np.asarray(self.vertices, dtype=np.float64).reshape(4, 2))


@dataclass(frozen=True)
class AssignConfig:
    strides: tuple[int, ...] = (8, 16, 32)
    tau: float = 3.0
    t_iou: float = 0.3
    img_size: int = 800
    num_classes: int = 15

    def __post_init__(self):
        object.__setattr__(self, "strides", tuple(int(s) for s in self.strides))
        if list(self.strides) != sorted(set(self.strides)):
            raise ValueError("strides must be strictly increasing")
        if not 0.0 < self.t_iou < 1.0:
            raise ValueError("t_iou must be in (0, 1)")
        if self.tau <= 0.0:
            raise ValueError("tau must be positive")
        for s in self.strides:
            if self.img_size % s:
                raise ValueError(f"img_size {self.img_size} not divisible by stride {s}")

    @property
    def range1(self) -> float:
        return self.tau * 2.0 * self.strides[0] / (1.0 - self.t_iou)

    @property
    def range2(self) -> float:
        return self.tau * 2.0 * self.strides[-1] / (1.0 - self.t_iou)


@dataclass
class ScaleLabels:
    """Per-scale ground-truth arrays, channels-last where applicable."""

    stride: int
    f: np.ndarray  # (H, W) float32 Gaussian weights in [0, 1]
    obj: np.ndarray  # (H, W) float32 binary
    obb: np.ndarray  # (H, W, 9) float32
    cls: np.ndarray  # (H, W, num_classes) float32
    region_id: np.ndarray  # (H, W) int32, REGION_ID_BACKGROUND at negatives
    xi: np.ndarray  # (H, W) float32, 1 at negatives

    @property
    def shape(self) -> tuple[int, int]:
        return self.f.shape


@dataclass
class LabelTensorSet:
    scales: list[ScaleLabels]
    num_classes: int

    def positive_mask(self, m: int) -> np.ndarray:
        return self.scales[m].obj > 0


def _empty_scale(stride: int, size: int, num_classes: int) -> ScaleLabels:
    n = size // stride
    return ScaleLabels(
        stride=stride,
        f=np.zeros((n, n), dtype=np.float32),
        obj=np.zeros((n, n), dtype=np.float32),
        obb=np.zeros((n, n, 9), dtype=np.float32),
        cls=np.zeros((n, n, num_classes), dtype=np.float32),
        region_id=np.full((n, n), REGION_ID_BACKGROUND, dtype=np.int32),
        xi=np.ones((n, n), dtype=np.float32),
    )


def route_scale(max_side: float, cfg: AssignConfig) -> int:
    """Scale index in {1, 2, 3} for an object with the given longest side."""
    if max_side <= 1.0:
        raise SideOutOfRange(f"max side {max_side:.3g} not above 1 px")
    if max_side > math.sqrt(2.0) * cfg.img_size:
        raise SideOutOfRange(f"max side {max_side:.3g} above sqrt(2) * {cfg.img_size}")
    if max_side <= cfg.range1:
        return 1
    if max_side <= cfg.range2:
        return min(2, len(cfg.strides))
    return len(cfg.strides)


def area_norm(n_cells: float) -> float:
    """Area-normalization factor log 2 / log(1 + sqrt(n)); 1 at n = 1."""
    n = max(float(n_cells), 1.0)
    return math.log(2.0) / math.log(1.0 + math.sqrt(n))


def generate_heatmaps(annotations, cfg: AssignConfig) -> LabelTensorSet:
    """Run label assignment for one image.

    Deterministic for fixed input: regions are scanned in annotation order
    and density ties go to the earlier annotation.
    """
    labels = LabelTensorSet(
        scales=[_empty_scale(s, cfg.img_size, cfg.num_classes) for s in cfg.strides],
        num_classes=cfg.num_classes,
    )
    raw_f = [np.zeros(sc.shape, dtype=np.float64) for sc in labels.scales]
    candidates = []  # (scale idx, obb, ys, xs, densities)

    for idx, ann in enumerate(annotations):
        try:
            obb = canonicalize_obb(ann.vertices)
        except Exception as exc:
            raise InvalidAnnotation(f"annotation {idx}: {exc}") from exc
        metrics = obb_metrics(obb)
        if metrics.max_side <= 1.0:
            raise InvalidAnnotation(f"annotation {idx}: max side {metrics.max_side:.3g} <= 1 px")
        if not 0 <= ann.class_id < cfg.num_classes:
            raise InvalidAnnotation(f"annotation {idx}: class id {ann.class_id} out of range")
        m = route_scale(metrics.max_side, cfg) - 1
        stride = cfg.strides[m]
        scale = labels.scales[m]
        region = region_from_obb(obb, stride, cfg.t_iou, metrics=metrics)
        hbb = circumscribed_hbb(obb)

        x0 = max(int(math.floor(hbb.x_min / stride)), 0)
        x1 = min(int(math.ceil(hbb.x_max / stride)), scale.shape[1] - 1)
        y0 = max(int(math.floor(hbb.y_min / stride)), 0)
        y1 = min(int(math.ceil(hbb.y_max / stride)), scale.shape[0] - 1)
        if x1 < x0 or y1 < y0:
            candidates.append((m, obb, np.empty(0, int), np.empty(0, int), np.empty(0)))
            continue
        # density over the window via broadcast rows/cols (hot loop)
        px = np.arange(x0, x1 + 1) + 0.5
        py = np.arange(y0, y1 + 1) + 0.5
        dx = (px - region.mu[0])[None, :]
        dy = (py - region.mu[1])[:, None]
        c, s = math.cos(region.alpha), math.sin(region.alpha)
        u1 = c * dx + s * dy
        u2 = -s * dx + c * dy
        density = np.exp(-0.5 * (u1 * u1 / region.lambda1 + u2 * u2 / region.lambda2))
        inside_x = (px * stride > hbb.x_min) & (px * stride < hbb.x_max)
        inside_y = (py * stride > hbb.y_min) & (py * stride < hbb.y_max)
        member = (density > region.thr) & inside_x[None, :] & inside_y[:, None]
        ys, xs = np.nonzero(member)
        dens = density[ys, xs]
        ys = ys + y0
        xs = xs + x0

        # overlap resolution: strictly larger density wins, ties keep the
        # earlier annotation (processed in index order)
        win = dens > raw_f[m][ys, xs]
        raw_f[m][ys[win], xs[win]] = dens[win]
        scale.region_id[ys[win], xs[win]] = idx
        candidates.append((m, obb, ys, xs, dens))

    for idx, (m, obb, ys, xs, dens) in enumerate(candidates):
        scale = labels.scales[m]
        owned = scale.region_id[ys, xs] == idx
        n = int(owned.sum())
        if n == 0:
            logger.warning("annotation %d produced no positive cells (mismatch)", idx)
            continue
        oy, ox = ys[owned], xs[owned]
        thr = math.exp(-((1.0 - cfg.t_iou) / 2.0) ** 2 / 2.0)
        scale.f[oy, ox] = ((dens[owned] - thr) / (1.0 - thr)).astype(np.float32)
        scale.obj[oy, ox] = 1.0
        scale.obb[oy, ox] = codec.encode_cells(obb, ox, oy, scale.stride).astype(np.float32)
        scale.cls[oy, ox] = 0.0
        scale.cls[oy, ox, annotations[idx].class_id] = 1.0
        scale.xi[oy, ox] = np.float32(area_norm(n))
    return labels


@dataclass
class AssignmentStats:
    per_object_positive_counts: list[int]
    mismatch_count: int
    per_scale_positives: list[int]
    per_scale_negatives: list[int]
    f_histogram: np.ndarray = field(default_factory=lambda: np.zeros(10, dtype=np.int64))

    @property
    def per_scale_ratio(self) -> list[float]:
        return [
            p / n if n else math.inf
            for p, n in zip(self.per_scale_positives, self.per_scale_negatives)
        ]


def assignment_stats(labels: LabelTensorSet, annotations) -> AssignmentStats:
    """Positive-count and balance statistics of one assignment."""
    counts = [0] * len(annotations)
    for scale in labels.scales:
        ids, freq = np.unique(scale.region_id[scale.region_id >= 0], return_counts=True)
        for i, c in zip(ids, freq):
            counts[int(i)] += int(c)
    positives = [int((s.obj > 0).sum()) for s in labels.scales]
    negatives = [s.obj.size - p for s, p in zip(labels.scales, positives)]
    f_values = np.concatenate([s.f[s.obj > 0] for s in labels.scales]) if any(positives) else np.empty(0)
    hist, _ = np.histogram(f_values, bins=10, range=(0.0, 1.0))
    return AssignmentStats(
        per_object_positive_counts=counts,
        mismatch_count=sum(1 for c in counts if c == 0),
        per_scale_positives=positives,
        per_scale_negatives=negatives,
        f_histogram=hist,
    )
