"""Oriented 2-D Gaussian candidate regions for oriented boxes.

All quantities live in grid coordinates (input pixels divided by the
feature-map stride) so a region can be evaluated directly on its scale.
The density is unnormalized: the peak value at the mean is exactly 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateBox
from .geometry import Obb, obb_metrics


@dataclass(frozen=True)
class GaussianRegion:
    """Oriented Gaussian: mean, rotation, squared semi-axes and threshold.

    ``lambda1 >= lambda2 > 0`` are the squared semi-major/minor axes in
    grid units squared, ``alpha`` is in [0, pi), ``thr = exp(-shrink^2 / 2)``
    is the membership threshold on the unnormalized density.
    """

    mu: np.ndarray  # (2,) grid coordinates
    alpha: float
    lambda1: float
    lambda2: float
    shrink: float
    thr: float

    def covariance(self) -> np.ndarray:
        """Reconstruct C = Q diag(lambda1, lambda2) Q^T."""
        c, s = math.cos(self.alpha), math.sin(self.alpha)
        q = np.array([[c, -s], [s, c]])
        return q @ np.diag([self.lambda1, self.lambda2]) @ q.T


def shrunk_radii(r1: float, r2: float, t_iou: float) -> tuple[float, float]:
    """Scale both semi-axes by (1 - t_iou) / 2."""
    k = (1.0 - t_iou) / 2.0
    return k * r1, k * r2


def region_from_obb(obb: Obb, stride: float, t_iou: float, metrics=None) -> GaussianRegion:
    """Build the oriented Gaussian of a box on the given stride.

    The mean is the vertex centroid divided by stride, the rotation follows
    the longest box side folded into [0, pi) (ties take the first canonical
    side), and the semi-axes are half the longest/shortest side lengths in
    grid units. ``metrics`` may pass precomputed :func:`obb_metrics` output.
    """
    if metrics is None:
        metrics = obb_metrics(obb)
    longest = int(np.argmax(metrics.sides))
    s1 = metrics.max_side / 2.0 / stride
    s2 = float(metrics.sides.min()) / 2.0 / stride
    if s2 < 1e-6:
        raise DegenerateBox(f"semi-axis {s2:.3g} below 1e-6 grid units")
    x0, y0, x1, y1, x2, y2, x3, y3 = obb.vertices.ravel()
    nxt = (longest + 1) % 4
    edge = (obb.vertices[nxt, 0] - obb.vertices[longest, 0], obb.vertices[nxt, 1] - obb.vertices[longest, 1])
    alpha = math.atan2(edge[1], edge[0]) % math.pi
    k = (1.0 - t_iou) / 2.0
    return GaussianRegion(
        mu=np.array([(x0 + x1 + x2 + x3) / 4.0, (y0 + y1 + y2 + y3) / 4.0]) / stride,
        alpha=alpha,
        lambda1=s1 * s1,
        lambda2=s2 * s2,
        shrink=k,
        thr=math.exp(-k * k / 2.0),
    )


def mahalanobis_sq(region: GaussianRegion, p) -> np.ndarray:
    """Squared Mahalanobis distance of grid point(s) ``p`` (..., 2)."""
    p = np.asarray(p, dtype=np.float64)
    d = p - region.mu
    c, s = math.cos(region.alpha), math.sin(region.alpha)
    u1 = c * d[..., 0] + s * d[..., 1]
    u2 = -s * d[..., 0] + c * d[..., 1]
    return u1 * u1 / region.lambda1 + u2 * u2 / region.lambda2


def gaussian_value(region: GaussianRegion, p) -> np.ndarray:
    """Unnormalized density exp(-m/2); equals 1 exactly at the mean."""
    return np.exp(-0.5 * mahalanobis_sq(region, p))[()]
