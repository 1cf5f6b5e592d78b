"""9-component oriented-box code at a grid cell: [l1..l4, s1..s4, ar].

``l`` holds the distances from the cell center to the top/right/bottom/left
edges of the circumscribed horizontal box, divided by the stride. ``s``
holds the gliding ratios of the four box vertices along the horizontal-box
edges (clockwise from the top-left corner), and ``ar`` is the area ratio
box/horizontal-box. Cell index (x, y) maps to the input-pixel point
((x + 0.5) * stride, (y + 0.5) * stride).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CellOutsideBox, InvalidCode
from .geometry import Hbb, Obb, canonicalize_obb, circumscribed_hbb, polygon_area

# above this area ratio the box is close enough to axis-aligned that decoding
# emits the horizontal-box corners directly
AR_HBB_FALLBACK = 0.9


@dataclass(frozen=True)
class ObbCode:
    l: np.ndarray  # (4,) >= 0, grid units
    s: np.ndarray  # (4,) in [0, 1]
    ar: float  # in (0, 1]

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.l, self.s, [self.ar]])

    @staticmethod
    def from_vector(vec) -> "ObbCode":
        vec = np.asarray(vec, dtype=np.float64).reshape(9)
        return ObbCode(vec[:4].copy(), vec[4:8].copy(), float(vec[8]))


def one_hot(class_id: int, num_classes: int) -> np.ndarray:
    if not 0 <= class_id < num_classes:
        raise InvalidCode(f"class id {class_id} outside [0, {num_classes})")
    v = np.zeros(num_classes, dtype=np.float64)
    v[class_id] = 1.0
    return v


def _gliding_ratios(obb: Obb, hbb: Hbb) -> np.ndarray:
    v = obb.vertices
    w, h = hbb.width, hbb.height
    s = np.array(
        [
            (v[0, 0] - hbb.x_min) / w,
            (v[1, 1] - hbb.y_min) / h,
            (hbb.x_max - v[2, 0]) / w,
            (hbb.y_max - v[3, 1]) / h,
        ]
    )
    return np.clip(s, 0.0, 1.0)


def encode_cells(obb: Obb, xs: np.ndarray, ys: np.ndarray, stride: float) -> np.ndarray:
    """Vectorized encode of one box at many cells; returns (n, 9)."""
    hbb = circumscribed_hbb(obb)
    cx = (np.asarray(xs, dtype=np.float64) + 0.5) * stride
    cy = (np.asarray(ys, dtype=np.float64) + 0.5) * stride
    l = np.stack(
        [
            (cy - hbb.y_min) / stride,
            (hbb.x_max - cx) / stride,
            (hbb.y_max - cy) / stride,
            (cx - hbb.x_min) / stride,
        ],
        axis=-1,
    )
    s = _gliding_ratios(obb, hbb)
    ar = min(polygon_area(obb.vertices) / hbb.area, 1.0)
    out = np.empty(l.shape[:-1] + (9,), dtype=np.float64)
    out[..., :4] = l
    out[..., 4:8] = s
    out[..., 8] = ar
    return out


def encode_at(obb: Obb, cell: tuple[int, int], stride: float) -> ObbCode:
    """Encode a canonical box at one grid cell.

    The cell center must lie strictly inside the circumscribed box.
    """
    hbb = circumscribed_hbb(obb)
    cx = (cell[0] + 0.5) * stride
    cy = (cell[1] + 0.5) * stride
    if not hbb.contains(cx, cy, strict=True):
        raise CellOutsideBox(f"cell center ({cx}, {cy}) outside circumscribed box")
    vec = encode_cells(obb, np.array([cell[0]]), np.array([cell[1]]), stride)[0]
    return ObbCode.from_vector(vec)


def decode_at(code: ObbCode, cell: tuple[int, int], stride: float) -> Obb:
    """Invert :func:`encode_at` at the given cell.

    For ``ar >= AR_HBB_FALLBACK`` the gliding ratios are ignored and the
    horizontal-box corners are emitted.
    """
    l = np.asarray(code.l, dtype=np.float64)
    s = np.asarray(code.s, dtype=np.float64)
    if l[0] + l[2] <= 0.0 or l[1] + l[3] <= 0.0:
        raise InvalidCode("edge distances give a box with non-positive extent")
    if np.any(s < -1e-9) or np.any(s > 1.0 + 1e-9):
        raise InvalidCode("gliding ratio outside [0, 1]")
    if not 0.0 < code.ar <= 1.0 + 1e-9:
        raise InvalidCode("area ratio outside (0, 1]")
    cx = (cell[0] + 0.5) * stride
    cy = (cell[1] + 0.5) * stride
    x_min = cx - l[3] * stride
    x_max = cx + l[1] * stride
    y_min = cy - l[0] * stride
    y_max = cy + l[2] * stride
    if code.ar >= AR_HBB_FALLBACK:
        vertices = [(x_min, y_min), (x_max, y_min), (x_max, y_max), (x_min, y_max)]
    else:
        w = x_max - x_min
        h = y_max - y_min
        s = np.clip(s, 0.0, 1.0)
        vertices = [
            (x_min + s[0] * w, y_min),
            (x_max, y_min + s[1] * h),
            (x_max - s[2] * w, y_max),
            (x_min, y_max - s[3] * h),
        ]
    return canonicalize_obb(vertices)
