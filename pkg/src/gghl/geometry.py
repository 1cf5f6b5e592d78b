"""Oriented and horizontal bounding-box geometry.

Coordinates follow the image convention: x grows right, y grows down.
The canonical vertex order of an oriented box starts at the vertex on the
top edge of its circumscribed horizontal box (leftmost on tie) and proceeds
clockwise on screen, which corresponds to a positive shoelace sum.

All functions here are pure and operate on immutable values.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import DegenerateBox, InvalidDistances, NonConvex

MIN_AREA = 1e-6
MERGE_EPS = 1e-9


@dataclass(frozen=True)
class Hbb:
    """Axis-aligned box, x_min < x_max and y_min < y_max."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    def contains(self, x: float, y: float, strict: bool = False) -> bool:
        if strict:
            return self.x_min < x < self.x_max and self.y_min < y < self.y_max
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max


@dataclass(frozen=True)
class Obb:
    """Oriented box as 4 vertices in canonical order.

    Instances are produced by :func:`canonicalize_obb`; constructing one
    directly skips validation.
    """

    vertices: np.ndarray  # (4, 2) float64
    class_hint: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "vertices", np.asarray(self.vertices, dtype=np.float64).reshape(4, 2))


class ObbMetrics(NamedTuple):
    sides: np.ndarray  # (4,) side lengths in canonical order
    area: float
    max_side: float


def _signed_area(vertices: np.ndarray) -> float:
    if len(vertices) == 4:
        # scalar fast path; quads dominate the label-assignment hot loop
        x0, y0, x1, y1, x2, y2, x3, y3 = vertices.ravel()
        return 0.5 * ((x0 * y1 - x1 * y0) + (x1 * y2 - x2 * y1) + (x2 * y3 - x3 * y2) + (x3 * y0 - x0 * y3))
    x = vertices[:, 0]
    y = vertices[:, 1]
    wrap = x[-1] * y[0] - x[0] * y[-1]
    return 0.5 * (float(np.sum(x[:-1] * y[1:] - x[1:] * y[:-1])) + wrap)


def polygon_area(vertices: np.ndarray) -> float:
    """Unsigned shoelace area of a simple polygon."""
    return abs(_signed_area(np.asarray(vertices, dtype=np.float64)))


def canonicalize_obb(raw_vertices) -> Obb:
    """Reorder 4 vertices of a simple convex quadrilateral into canonical order.

    Raises DegenerateBox for area below ``MIN_AREA`` and NonConvex when the
    turn directions of consecutive edges disagree. The result is invariant
    under any rotation or reversal of the input cyclic order.
    """
    v = np.asarray(raw_vertices, dtype=np.float64).reshape(4, 2)
    if not np.isfinite(v).all():
        raise DegenerateBox("vertices contain non-finite values")
    area = _signed_area(v)
    if abs(area) < MIN_AREA:
        raise DegenerateBox(f"quadrilateral area {abs(area):.3g} below {MIN_AREA}")
    x0, y0, x1, y1, x2, y2, x3, y3 = v.ravel()
    ex = (x1 - x0, x2 - x1, x3 - x2, x0 - x3)
    ey = (y1 - y0, y2 - y1, y3 - y2, y0 - y3)
    cross = [ex[i] * ey[(i + 1) % 4] - ey[i] * ex[(i + 1) % 4] for i in range(4)]
    if any(c > 1e-12 for c in cross) and any(c < -1e-12 for c in cross):
        raise NonConvex("cross-product signs mix")
    if area < 0:
        v = v[::-1]
    start = min(range(4), key=lambda i: (v[i, 1], v[i, 0]))
    return Obb(np.concatenate([v[start:], v[:start]]) if start else v.copy())


def circumscribed_hbb(obb: Obb) -> Hbb:
    """Tight axis-aligned bounds of the 4 vertices."""
    lo = obb.vertices.min(axis=0)
    hi = obb.vertices.max(axis=0)
    return Hbb(float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1]))


def obb_metrics(obb: Obb) -> ObbMetrics:
    """Side lengths in canonical order, shoelace area and longest side."""
    v = obb.vertices
    edges = v[[1, 2, 3, 0]] - v
    sides = np.hypot(edges[:, 0], edges[:, 1])
    return ObbMetrics(sides, polygon_area(obb.vertices), float(sides.max()))


def _check_distance_vectors(*vectors: np.ndarray) -> None:
    for l in vectors:
        if np.any(l[..., 0] + l[..., 2] <= 0) or np.any(l[..., 1] + l[..., 3] <= 0):
            raise InvalidDistances("edge-distance vector has non-positive extent")


def hbb_iou(l, l_hat):
    """IoU of two axis-aligned boxes given as [top, right, bottom, left] distances.

    Both distance vectors are measured from a common reference point.
    Components may be negative (the reference point outside the box) as long
    as each box keeps positive width and height; the overlap extents are
    clamped at zero so disjoint boxes yield 0. Broadcasts over leading axes.
    """
    l = np.asarray(l, dtype=np.float64)
    l_hat = np.asarray(l_hat, dtype=np.float64)
    _check_distance_vectors(l, l_hat)
    area = (l[..., 0] + l[..., 2]) * (l[..., 1] + l[..., 3])
    area_hat = (l_hat[..., 0] + l_hat[..., 2]) * (l_hat[..., 1] + l_hat[..., 3])
    mins = np.minimum(l, l_hat)
    overlap = np.maximum(mins[..., 0] + mins[..., 2], 0.0) * np.maximum(mins[..., 1] + mins[..., 3], 0.0)
    iou = overlap / (area + area_hat - overlap)
    return np.clip(iou, 0.0, 1.0)[()]


def hbb_giou(l, l_hat):
    """Generalized IoU: IoU minus the empty fraction of the enclosing box."""
    l = np.asarray(l, dtype=np.float64)
    l_hat = np.asarray(l_hat, dtype=np.float64)
    _check_distance_vectors(l, l_hat)
    area = (l[..., 0] + l[..., 2]) * (l[..., 1] + l[..., 3])
    area_hat = (l_hat[..., 0] + l_hat[..., 2]) * (l_hat[..., 1] + l_hat[..., 3])
    mins = np.minimum(l, l_hat)
    maxs = np.maximum(l, l_hat)
    overlap = np.maximum(mins[..., 0] + mins[..., 2], 0.0) * np.maximum(mins[..., 1] + mins[..., 3], 0.0)
    union = area + area_hat - overlap
    circ = (maxs[..., 0] + maxs[..., 2]) * (maxs[..., 1] + maxs[..., 3])
    iou = np.clip(overlap / union, 0.0, 1.0)
    return (iou - (circ - union) / circ)[()]


def _clip_polygon(subject: np.ndarray, clip: np.ndarray) -> np.ndarray:
    """Sutherland-Hodgman clip of ``subject`` against convex ``clip``.

    ``clip`` must be in canonical (positive shoelace) order so that the
    interior lies on the non-negative cross-product side of each edge.
    """
    output = [tuple(p) for p in subject]
    n = len(clip)
    for i in range(n):
        if not output:
            return np.empty((0, 2))
        ax, ay = clip[i]
        bx, by = clip[(i + 1) % n]
        ex, ey = bx - ax, by - ay
        polygon = output
        output = []
        prev = polygon[-1]
        prev_side = ex * (prev[1] - ay) - ey * (prev[0] - ax)
        for cur in polygon:
            cur_side = ex * (cur[1] - ay) - ey * (cur[0] - ax)
            if cur_side >= 0.0:
                if prev_side < 0.0:
                    t = prev_side / (prev_side - cur_side)
                    output.append((prev[0] + t * (cur[0] - prev[0]), prev[1] + t * (cur[1] - prev[1])))
                output.append(cur)
            elif prev_side >= 0.0:
                t = prev_side / (prev_side - cur_side)
                output.append((prev[0] + t * (cur[0] - prev[0]), prev[1] + t * (cur[1] - prev[1])))
            prev, prev_side = cur, cur_side
    if not output:
        return np.empty((0, 2))
    result = np.asarray(output, dtype=np.float64)
    # merge vertices closer than MERGE_EPS for stability at near-tangent edges
    keep = np.ones(len(result), dtype=bool)
    for j in range(len(result)):
        nxt = (j + 1) % len(result)
        if keep[j] and np.hypot(*(result[nxt] - result[j])) < MERGE_EPS:
            keep[nxt] = False
    return result[keep]


def polygon_iou(a: Obb, b: Obb) -> float:
    """Exact IoU of two oriented boxes via convex-polygon clipping."""
    area_a = polygon_area(a.vertices)
    area_b = polygon_area(b.vertices)
    inter_poly = _clip_polygon(b.vertices, a.vertices)
    inter = polygon_area(inter_poly) if len(inter_poly) >= 3 else 0.0
    union = area_a + area_b - inter
    if union <= 0.0:
        return 0.0
    return float(min(max(inter / union, 0.0), 1.0))


def _row_intervals(vertices: np.ndarray, ys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Inside x-interval [lo, hi] of a convex polygon at each scanline y."""
    lo = np.full(ys.shape, np.inf)
    hi = np.full(ys.shape, -np.inf)
    n = len(vertices)
    for i in range(n):
        x1, y1 = vertices[i]
        x2, y2 = vertices[(i + 1) % n]
        if y1 == y2:
            continue
        t = (ys - y1) / (y2 - y1)
        valid = (t >= 0.0) & (t <= 1.0)
        x = x1 + t * (x2 - x1)
        lo = np.where(valid, np.minimum(lo, x), lo)
        hi = np.where(valid, np.maximum(hi, x), hi)
    return lo, hi


def _count_centers(lo: np.ndarray, hi: np.ndarray, x0: float, dx: float, grid: int) -> np.ndarray:
    """Per-row count of pixel centers x0 + (i + 0.5) dx inside [lo, hi]."""
    i_lo = np.ceil((lo - x0) / dx - 0.5)
    i_hi = np.floor((hi - x0) / dx - 0.5)
    i_lo = np.clip(i_lo, 0, grid - 1)
    i_hi = np.clip(i_hi, -1, grid - 1)
    return np.maximum(i_hi - i_lo + 1, 0).astype(np.int64)


def rasterized_iou(a: Obb, b: Obb, grid: int = 2000) -> float:
    """IoU by counting pixel centers inside each box over the joint bounds.

    Test oracle for :func:`polygon_iou`; accuracy is O(1/grid).
    """
    if grid < 256:
        raise ValueError("grid must be >= 256")
    pts = np.vstack([a.vertices, b.vertices])
    x0, y0 = pts.min(axis=0)
    x1, y1 = pts.max(axis=0)
    dx = (x1 - x0) / grid
    dy = (y1 - y0) / grid
    if dx <= 0.0 or dy <= 0.0:
        return 0.0
    ys = y0 + (np.arange(grid) + 0.5) * dy
    lo_a, hi_a = _row_intervals(a.vertices, ys)
    lo_b, hi_b = _row_intervals(b.vertices, ys)
    count_a = _count_centers(lo_a, hi_a, x0, dx, grid)
    count_b = _count_centers(lo_b, hi_b, x0, dx, grid)
    count_i = _count_centers(np.maximum(lo_a, lo_b), np.minimum(hi_a, hi_b), x0, dx, grid)
    inter = int(count_i.sum())
    union = int(count_a.sum()) + int(count_b.sum()) - inter
    if union == 0:
        return 0.0
    return inter / union
