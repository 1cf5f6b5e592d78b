"""Joint objective over objectness, box regression and classification.

The per-cell terms are:

* focal binary cross-entropy on objectness, down-weighted at positives by
  the object-adaptive weight and the area-normalization factor,
* the box regression loss (1 - GIoU) + sum (s - s_hat)^2 + (ar - ar_hat)^2
  at positives, weighted by the classification-aware weight and the
  area-normalization factor,
* binary cross-entropy over classes at positives against the effective
  class score obj * G * raw, with G = exp(-box loss).

G and both weight fields are treated as constants in every gradient
(stop-gradient), matching the training rule they implement. All sums run
in a fixed per-scale, row-major order so results are reproducible.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .assign import LabelTensorSet
from .errors import NonFiniteLoss, ShapeMismatch

PROB_EPS = 1e-7
GIOU_TIE_EPS = 1e-6


@dataclass
class ScalePredictions:
    stride: int
    obj: np.ndarray  # (H, W) in (0, 1)
    obb: np.ndarray  # (H, W, 9); l > 0, s in [0, 1], ar in (0, 1]
    cls: np.ndarray  # (H, W, C) raw per-class scores in (0, 1)


@dataclass
class PredictionTensorSet:
    scales: list[ScalePredictions]

    def copy(self) -> "PredictionTensorSet":
        return PredictionTensorSet(
            [ScalePredictions(s.stride, s.obj.copy(), s.obb.copy(), s.cls.copy()) for s in self.scales]
        )


@dataclass
class OwamScale:
    g: np.ndarray  # (H, W), 1 at negatives
    weight_obb: np.ndarray  # (H, W)
    weight_cls: np.ndarray  # (H, W)


@dataclass
class OwamField:
    scales: list[OwamScale]


@dataclass
class LossBreakdown:
    obj_pos: float
    obj_neg: float
    obb: float
    cls: float
    total: float
    per_scale: list[tuple[float, float, float, float]]


@dataclass
class GradientTensorSet:
    """Partials of the total loss w.r.t. every prediction entry."""

    d_obj: list[np.ndarray]
    d_obb: list[np.ndarray]
    d_cls: list[np.ndarray]
    tie_mask: list[np.ndarray]  # (H, W, 4) GIoU branch boundary within GIOU_TIE_EPS

    @property
    def has_ties(self) -> bool:
        return any(m.any() for m in self.tie_mask)


def _check_shapes(labels: LabelTensorSet, preds: PredictionTensorSet) -> None:
    if len(labels.scales) != len(preds.scales):
        raise ShapeMismatch("scale count mismatch")
    for lab, pred in zip(labels.scales, preds.scales):
        if lab.obj.shape != pred.obj.shape or lab.obb.shape != pred.obb.shape or lab.cls.shape != pred.cls.shape:
            raise ShapeMismatch(f"shape mismatch at stride {lab.stride}")


def _clamp_prob(p: np.ndarray) -> np.ndarray:
    return np.clip(p, PROB_EPS, 1.0 - PROB_EPS)


def obb_regression_loss(code, code_hat, use_quadratic_l: bool = False):
    """Box regression loss per Eq-style (1 - GIoU) + quadratic terms.

    Accepts (..., 9) arrays; ``use_quadratic_l`` swaps the GIoU term for the
    plain squared error on the edge distances (the likelihood form).
    """
    code = np.asarray(code, dtype=np.float64)
    code_hat = np.asarray(code_hat, dtype=np.float64)
    l, lh = code[..., :4], code_hat[..., :4]
    if use_quadratic_l:
        l_term = np.sum((l - lh) ** 2, axis=-1)
    else:
        l_term = 1.0 - _giou_l(l, lh)
    s_term = np.sum((code[..., 4:8] - code_hat[..., 4:8]) ** 2, axis=-1)
    ar_term = (code[..., 8] - code_hat[..., 8]) ** 2
    return (l_term + s_term + ar_term)[()]


def gcp_confidence(loss_obb):
    """Gaussian-center-prior confidence exp(-loss), in (0, 1]."""
    return np.exp(-np.asarray(loss_obb, dtype=np.float64))[()]


def _giou_l(l: np.ndarray, lh: np.ndarray) -> np.ndarray:
    area = (l[..., 0] + l[..., 2]) * (l[..., 1] + l[..., 3])
    area_hat = (lh[..., 0] + lh[..., 2]) * (lh[..., 1] + lh[..., 3])
    mins = np.minimum(l, lh)
    maxs = np.maximum(l, lh)
    overlap = (mins[..., 0] + mins[..., 2]) * (mins[..., 1] + mins[..., 3])
    union = area + area_hat - overlap
    circ = (maxs[..., 0] + maxs[..., 2]) * (maxs[..., 1] + maxs[..., 3])
    return overlap / union - (circ - union) / circ


def _giou_l_grad(l: np.ndarray, lh: np.ndarray) -> np.ndarray:
    """d GIoU / d lh, piecewise through the active min/max branches.

    At an exact branch boundary the label side is taken as active, giving a
    zero derivative contribution for that component.
    """
    mins = np.minimum(l, lh)
    maxs = np.maximum(l, lh)
    m13 = mins[..., 0] + mins[..., 2]
    m24 = mins[..., 1] + mins[..., 3]
    big13 = maxs[..., 0] + maxs[..., 2]
    big24 = maxs[..., 1] + maxs[..., 3]
    area_hat = (lh[..., 0] + lh[..., 2]) * (lh[..., 1] + lh[..., 3])
    area = (l[..., 0] + l[..., 2]) * (l[..., 1] + l[..., 3])
    overlap = m13 * m24
    union = area + area_hat - overlap
    circ = big13 * big24

    grad = np.empty_like(lh)
    for k in range(4):
        vertical = k in (0, 2)  # components along y pair with the x extent
        d_overlap = np.where(lh[..., k] < l[..., k], m24 if vertical else m13, 0.0)
        d_area_hat = (lh[..., 1] + lh[..., 3]) if vertical else (lh[..., 0] + lh[..., 2])
        d_circ = np.where(lh[..., k] > l[..., k], big24 if vertical else big13, 0.0)
        d_union = d_area_hat - d_overlap
        d_iou = (d_overlap * union - overlap * d_union) / (union * union)
        # GIoU = IoU - 1 + union/circ
        grad[..., k] = d_iou + (d_union * circ - union * d_circ) / (circ * circ)
    return grad


def owam_weights(labels: LabelTensorSet, preds: PredictionTensorSet) -> OwamField:
    """Per-cell confidence G and the two adaptive weight fields.

    Both weights are 1 at negatives; at positives they average the Gaussian
    weight with G (box weight) or with the raw score at the true class
    (classification weight).
    """
    _check_shapes(labels, preds)
    scales = []
    for lab, pred in zip(labels.scales, preds.scales):
        pos = lab.obj > 0
        g = np.ones(lab.obj.shape, dtype=np.float64)
        if pos.any():
            loss_obb = obb_regression_loss(lab.obb[pos], pred.obb[pos])
            g[pos] = gcp_confidence(loss_obb)
        f = lab.f.astype(np.float64)
        gt_class = np.argmax(lab.cls, axis=-1)
        raw_at_gt = np.take_along_axis(pred.cls, gt_class[..., None], axis=-1)[..., 0]
        weight_obb = np.where(pos, 0.5 * (f + g), 1.0)
        weight_cls = np.where(pos, 0.5 * (f + raw_at_gt), 1.0)
        scales.append(OwamScale(g=g, weight_obb=weight_obb, weight_cls=weight_cls))
    return OwamField(scales)


def compose_training_predictions(labels: LabelTensorSet, preds: PredictionTensorSet, weights: OwamField | None = None) -> PredictionTensorSet:
    """Training-time composition: mask boxes at negatives, scale classes by G."""
    if weights is None:
        weights = owam_weights(labels, preds)
    out = []
    for lab, pred, ow in zip(labels.scales, preds.scales, weights.scales):
        obj = lab.obj.astype(np.float64)
        obb_eff = pred.obb * obj[..., None]
        cls_eff = pred.cls * (obj * ow.g)[..., None]
        out.append(ScalePredictions(pred.stride, pred.obj.copy(), obb_eff, cls_eff))
    return PredictionTensorSet(out)


def _per_cell_maps(
    labels: LabelTensorSet,
    preds: PredictionTensorSet,
    gamma: float,
    weights: OwamField,
    use_quadratic_l: bool,
    unit_weights: bool,
    unit_xi: bool,
):
    """Per-cell (obj_pos, obj_neg, obb, cls) loss maps for every scale."""
    maps = []
    for lab, pred, ow in zip(labels.scales, preds.scales, weights.scales):
        pos = lab.obj > 0
        xi = np.ones_like(lab.xi, dtype=np.float64) if unit_xi else lab.xi.astype(np.float64)
        w_obb = np.ones_like(ow.weight_obb) if unit_weights else ow.weight_obb
        w_cls = np.ones_like(ow.weight_cls) if unit_weights else ow.weight_cls
        p_obj = _clamp_prob(pred.obj.astype(np.float64))

        obj_pos = np.where(pos, -((1.0 - p_obj) ** gamma) * np.log(p_obj) * w_obb * xi, 0.0)
        obj_neg = np.where(pos, 0.0, -(p_obj ** gamma) * np.log(1.0 - p_obj))

        obb_map = np.zeros(lab.obj.shape, dtype=np.float64)
        cls_map = np.zeros(lab.obj.shape, dtype=np.float64)
        if pos.any():
            loss_obb = obb_regression_loss(lab.obb[pos], pred.obb[pos], use_quadratic_l=use_quadratic_l)
            obb_map[pos] = loss_obb * w_cls[pos] * xi[pos]
            t = lab.cls[pos].astype(np.float64)
            p_cls = _clamp_prob(ow.g[pos][..., None] * pred.cls[pos].astype(np.float64))
            bce = -(t * np.log(p_cls) + (1.0 - t) * np.log(1.0 - p_cls))
            cls_map[pos] = bce.sum(axis=-1) * xi[pos]
        maps.append((obj_pos, obj_neg, obb_map, cls_map))
    return maps


def total_loss(
    labels: LabelTensorSet,
    preds: PredictionTensorSet,
    gamma: float = 2.0,
    weights: OwamField | None = None,
    use_quadratic_l: bool = False,
    unit_weights: bool = False,
    unit_xi: bool = False,
    normalize_by_positives: bool = False,
) -> LossBreakdown:
    """Summed joint loss with a per-term breakdown.

    ``weights`` may be precomputed to keep the stop-gradient fields fixed
    while predictions vary (the finite-difference checker relies on this).
    ``normalize_by_positives`` divides every term by the positive count.
    """
    _check_shapes(labels, preds)
    if weights is None:
        weights = owam_weights(labels, preds)
    maps = _per_cell_maps(labels, preds, gamma, weights, use_quadratic_l, unit_weights, unit_xi)
    per_scale = [tuple(float(m.sum()) for m in scale_maps) for scale_maps in maps]
    obj_pos = sum(t[0] for t in per_scale)
    obj_neg = sum(t[1] for t in per_scale)
    obb = sum(t[2] for t in per_scale)
    cls = sum(t[3] for t in per_scale)
    if normalize_by_positives:
        n_pos = max(sum(int((lab.obj > 0).sum()) for lab in labels.scales), 1)
        obj_pos, obj_neg, obb, cls = (v / n_pos for v in (obj_pos, obj_neg, obb, cls))
        per_scale = [tuple(v / n_pos for v in t) for t in per_scale]
    total = obj_pos + obj_neg + obb + cls
    if not math.isfinite(total):
        raise NonFiniteLoss("total loss is not finite")
    return LossBreakdown(obj_pos, obj_neg, obb, cls, total, per_scale)


def joint_log_likelihood(
    labels: LabelTensorSet,
    preds: PredictionTensorSet,
    sigma: float,
    weights: OwamField | None = None,
) -> float:
    """Log of the joint likelihood: Bernoulli objectness and classification
    terms plus a Gaussian log-density of the 9-component box error."""
    _check_shapes(labels, preds)
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if weights is None:
        weights = owam_weights(labels, preds)
    ll = 0.0
    log_norm = -math.log(sigma) - 0.5 * math.log(2.0 * math.pi)
    for lab, pred, ow in zip(labels.scales, preds.scales, weights.scales):
        pos = lab.obj > 0
        p_obj = _clamp_prob(pred.obj.astype(np.float64))
        obj = lab.obj.astype(np.float64)
        ll += float(np.sum(obj * np.log(p_obj) + (1.0 - obj) * np.log(1.0 - p_obj)))
        if pos.any():
            quad = obb_regression_loss(lab.obb[pos], pred.obb[pos], use_quadratic_l=True)
            ll += float(np.sum(9.0 * log_norm - quad / (2.0 * sigma * sigma)))
            t = lab.cls[pos].astype(np.float64)
            p_cls = _clamp_prob(ow.g[pos][..., None] * pred.cls[pos].astype(np.float64))
            ll += float(np.sum(t * np.log(p_cls) + (1.0 - t) * np.log(1.0 - p_cls)))
    if not math.isfinite(ll):
        raise NonFiniteLoss("log-likelihood is not finite")
    return ll


def loss_gradients(
    labels: LabelTensorSet,
    preds: PredictionTensorSet,
    gamma: float = 2.0,
    weights: OwamField | None = None,
    use_quadratic_l: bool = False,
) -> GradientTensorSet:
    """Exact partials of :func:`total_loss` w.r.t. every prediction entry.

    G and the weight fields are held constant. Cells where a GIoU min/max
    branch boundary lies within ``GIOU_TIE_EPS`` are flagged; the gradient
    there follows the active branch.
    """
    _check_shapes(labels, preds)
    if weights is None:
        weights = owam_weights(labels, preds)
    d_obj_all, d_obb_all, d_cls_all, ties = [], [], [], []
    for lab, pred, ow in zip(labels.scales, preds.scales, weights.scales):
        pos = lab.obj > 0
        xi = lab.xi.astype(np.float64)
        p_obj = _clamp_prob(pred.obj.astype(np.float64))

        if gamma == 0.0:
            d_pos = -1.0 / p_obj
            d_neg = 1.0 / (1.0 - p_obj)
        else:
            d_pos = gamma * (1.0 - p_obj) ** (gamma - 1.0) * np.log(p_obj) - (1.0 - p_obj) ** gamma / p_obj
            d_neg = -gamma * p_obj ** (gamma - 1.0) * np.log(1.0 - p_obj) + p_obj ** gamma / (1.0 - p_obj)
        d_obj = np.where(pos, d_pos * ow.weight_obb * xi, d_neg)

        d_obb = np.zeros_like(pred.obb, dtype=np.float64)
        d_cls = np.zeros_like(pred.cls, dtype=np.float64)
        tie = np.zeros(pred.obb.shape[:2] + (4,), dtype=bool)
        if pos.any():
            l = lab.obb[pos][:, :4].astype(np.float64)
            lh = pred.obb[pos][:, :4].astype(np.float64)
            w = (ow.weight_cls[pos] * xi[pos])[:, None]
            if use_quadratic_l:
                dl = 2.0 * (lh - l) * w
            else:
                dl = -_giou_l_grad(l, lh) * w
            ds = 2.0 * (pred.obb[pos][:, 4:8].astype(np.float64) - lab.obb[pos][:, 4:8]) * w
            dar = 2.0 * (pred.obb[pos][:, 8].astype(np.float64) - lab.obb[pos][:, 8]) * w[:, 0]
            block = np.concatenate([dl, ds, dar[:, None]], axis=1)
            d_obb[pos] = block
            tie[pos] = np.abs(lh - l) < GIOU_TIE_EPS

            t = lab.cls[pos].astype(np.float64)
            g = ow.g[pos][..., None]
            raw = pred.cls[pos].astype(np.float64)
            p_cls = g * raw
            clamped = (p_cls <= PROB_EPS) | (p_cls >= 1.0 - PROB_EPS)
            p_cls = _clamp_prob(p_cls)
            dp = -t / p_cls + (1.0 - t) / (1.0 - p_cls)
            d_cls[pos] = np.where(clamped, 0.0, dp * g * xi[pos][:, None])
        d_obj_all.append(d_obj)
        d_obb_all.append(d_obb)
        d_cls_all.append(d_cls)
        ties.append(tie)
    return GradientTensorSet(d_obj_all, d_obb_all, d_cls_all, ties)


@dataclass
class FiniteDiffReport:
    max_rel_error: float
    num_checked: int
    num_excluded: int

    def passed(self, tol: float = 1e-4) -> bool:
        return self.max_rel_error <= tol


def finite_diff_check(
    labels: LabelTensorSet,
    preds: PredictionTensorSet,
    gamma: float = 2.0,
    h: float = 1e-5,
) -> FiniteDiffReport:
    """Central-difference verification of :func:`loss_gradients`.

    The weight fields are computed once from the unperturbed predictions
    and held fixed, matching the stop-gradient semantics of the analytic
    gradients. Entries within ``GIOU_TIE_EPS`` of a GIoU branch boundary
    are excluded. The relative-error denominator is floored at 1e-3 so
    near-zero gradients are compared absolutely.
    """
    if not 1e-7 <= h <= 1e-3:
        raise ValueError("h must be in [1e-7, 1e-3]")
    weights = owam_weights(labels, preds)
    grads = loss_gradients(labels, preds, gamma, weights=weights)

    def cell_total(p: PredictionTensorSet) -> list[np.ndarray]:
        maps = _per_cell_maps(labels, p, gamma, weights, False, False, False)
        return [sum(m) for m in maps]

    max_rel = 0.0
    checked = 0
    excluded = 0
    for si in range(len(preds.scales)):
        channels = (
            [("obj", None)]
            + [("obb", k) for k in range(9)]
            + [("cls", c) for c in range(preds.scales[si].cls.shape[-1])]
        )
        for name, k in channels:
            plus = preds.copy()
            minus = preds.copy()
            for p, sign in ((plus, h), (minus, -h)):
                arr = getattr(p.scales[si], name)
                if k is None:
                    arr += sign
                else:
                    arr[..., k] += sign
            fd = (cell_total(plus)[si] - cell_total(minus)[si]) / (2.0 * h)
            if name == "obj":
                an = grads.d_obj[si]
                mask = np.ones(fd.shape, dtype=bool)
            elif name == "obb":
                an = grads.d_obb[si][..., k]
                mask = ~grads.tie_mask[si][..., k] if k < 4 else np.ones(fd.shape, dtype=bool)
            else:
                an = grads.d_cls[si][..., k]
                mask = np.ones(fd.shape, dtype=bool)
            rel = np.abs(fd - an) / np.maximum(np.maximum(np.abs(fd), np.abs(an)), 1e-3)
            checked += int(mask.sum())
            excluded += int((~mask).sum())
            if mask.any():
                max_rel = max(max_rel, float(rel[mask].max()))
    return FiniteDiffReport(max_rel, checked, excluded)
