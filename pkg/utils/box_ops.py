"""
Box geometry in normalized coordinates.

Scalar helpers take `BBox` values or plain 4-sequences (center-size unless a
`form` says otherwise); the batched torch / numpy forms work on corner arrays.
"""
from typing import Sequence, Union

import numpy as np
import torch
from torch import Tensor

from models.enums import BoxForm
from models.schemas import BBox

BoxLike = Union[BBox, Sequence[float]]


def box_convert(box: Sequence[float], from_form, to_form) -> tuple[float, float, float, float]:
    """Convert one box between center-size and corner layouts; unknown form -> ValueError"""
    from_form, to_form = BoxForm(from_form), BoxForm(to_form)
    a, b, c, d = (float(v) for v in box)
    if from_form == to_form:
        return (a, b, c, d)
    if from_form == BoxForm.CENTER:
        return (a - 0.5 * c, b - 0.5 * d, a + 0.5 * c, b + 0.5 * d)
    return ((a + c) / 2, (b + d) / 2, c - a, d - b)


def _corners(box: BoxLike, form=BoxForm.CENTER) -> tuple[float, float, float, float]:
    if isinstance(box, BBox):
        return box.corners
    return box_convert(box, form, BoxForm.CORNERS)


_area = lambda x1, y1, x2, y2: max(0.0, x2 - x1) * max(0.0, y2 - y1)


def _overlap(a, b):
    ix1, iy1 = max(a[0], b[0]), max(a[1], b[1])
    ix2, iy2 = min(a[2], b[2]), min(a[3], b[3])
    inter = _area(ix1, iy1, ix2, iy2)
    union = _area(*a) + _area(*b) - inter
    return inter, union


def box_iou(a: BoxLike, b: BoxLike, form=BoxForm.CENTER) -> float:
    """Intersection over union; 0 when the union is empty"""
    inter, union = _overlap(_corners(a, form), _corners(b, form))
    return inter / union if union > 0 else 0.0


def box_giou(a: BoxLike, b: BoxLike, form=BoxForm.CENTER) -> float:
    """Generalized IoU in [-1, 1]; equals IoU when the enclosing hull is empty"""
    ca, cb = _corners(a, form), _corners(b, form)
    inter, union = _overlap(ca, cb)
    iou = inter / union if union > 0 else 0.0
    hull = _area(min(ca[0], cb[0]), min(ca[1], cb[1]), max(ca[2], cb[2]), max(ca[3], cb[3]))
    return iou - (hull - union) / hull if hull > 0 else iou


# Batched forms

def cxcywh_to_xyxy(boxes: Tensor) -> Tensor:
    cx, cy, w, h = boxes.unbind(-1)
    return torch.stack([cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h], dim=-1)


def elementwise_giou(boxes1: Tensor, boxes2: Tensor, eps: float = 1e-12) -> Tensor:
    """GIoU of aligned corner boxes [..., 4] x [..., 4] -> [...], differentiable"""
    area1 = (boxes1[..., 2] - boxes1[..., 0]).clamp(min=0) * (boxes1[..., 3] - boxes1[..., 1]).clamp(min=0)
    area2 = (boxes2[..., 2] - boxes2[..., 0]).clamp(min=0) * (boxes2[..., 3] - boxes2[..., 1]).clamp(min=0)

    lt = torch.max(boxes1[..., :2], boxes2[..., :2])
    rb = torch.min(boxes1[..., 2:], boxes2[..., 2:])
    wh = (rb - lt).clamp(min=0)
    inter = wh[..., 0] * wh[..., 1]
    union = area1 + area2 - inter
    iou = inter / union.clamp(min=eps)

    lt_hull = torch.min(boxes1[..., :2], boxes2[..., :2])
    rb_hull = torch.max(boxes1[..., 2:], boxes2[..., 2:])
    wh_hull = (rb_hull - lt_hull).clamp(min=0)
    hull = wh_hull[..., 0] * wh_hull[..., 1]
    return iou - (hull - union) / hull.clamp(min=eps)


def pairwise_giou(boxes1: np.ndarray, boxes2: np.ndarray) -> np.ndarray:
    """GIoU matrix of corner boxes (N, 4) x (M, 4) -> (N, M)"""
    b1, b2 = np.asarray(boxes1, dtype=np.float64)[:, None, :], np.asarray(boxes2, dtype=np.float64)[None, :, :]
    area = lambda b: np.clip(b[..., 2] - b[..., 0], 0, None) * np.clip(b[..., 3] - b[..., 1], 0, None)
    wh = np.clip(np.minimum(b1[..., 2:], b2[..., 2:]) - np.maximum(b1[..., :2], b2[..., :2]), 0, None)
    inter = wh[..., 0] * wh[..., 1]
    union = area(b1) + area(b2) - inter
    hull_wh = np.clip(np.maximum(b1[..., 2:], b2[..., 2:]) - np.minimum(b1[..., :2], b2[..., :2]), 0, None)
    hull = hull_wh[..., 0] * hull_wh[..., 1]
    with np.errstate(divide='ignore', invalid='ignore'):
        iou = np.where(union > 0, inter / union, 0.0)
        return np.where(hull > 0, iou - (hull - union) / hull, iou)
