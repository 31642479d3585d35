"""
Training objectives: the margin-based ITM distillation loss and the set-based
HOI detection losses (box L1, GIoU, object CE, verb BCE).

ITM scores are constants; gradient reaches the detector through the
per-sentence selection weights.
"""
import math
from dataclasses import dataclass
from typing import Sequence

import torch
import torch.nn.functional as F
from torch import Tensor

from models.configs import LossWeights
from models.enums import Polarity
from models.schemas import ImageAnnotation, MatchResult
from utils.box_ops import cxcywh_to_xyxy, elementwise_giou


def itm_contrastive_loss(pos_scores: Sequence[float], neg_scores: Sequence[float], alpha: float = 1.0) -> float:
    """Sum of hinge(alpha - s) over positives plus the sum of negative scores"""
    if alpha < 0 or not math.isfinite(alpha):
        raise ValueError(f"Margin must be finite and >= 0, got {alpha}")
    return sum(max(0.0, alpha - s) for s in pos_scores) + sum(neg_scores)


def weighted_itm_loss(weights: Tensor, scores: Sequence[float], polarities: Sequence[Polarity],
                      alpha: float = 1.0) -> Tensor:
    """itm_contrastive_loss with each sentence's term scaled by a differentiable weight"""
    if alpha < 0:
        raise ValueError(f"Margin must be >= 0, got {alpha}")
    if not (len(weights) == len(scores) == len(polarities)):
        raise ValueError(f"Misaligned ITM inputs: {len(weights)} weights, {len(scores)} scores, "
                         f"{len(polarities)} polarities")
    if len(weights) == 0:
        return weights.sum() * 0.0
    scores_t = torch.as_tensor(list(scores), dtype=weights.dtype, device=weights.device)
    positive = torch.tensor([Polarity(p) == Polarity.POSITIVE for p in polarities], device=weights.device)
    per_sentence = torch.where(positive, (alpha - scores_t).clamp(min=0), scores_t)
    return (weights * per_sentence).sum()


def l1_box_loss(pred_human: Tensor, pred_object: Tensor, gt_human: Tensor, gt_object: Tensor) -> Tensor:
    """Mean absolute error over the 8 box coordinates of each matched pair"""
    if pred_human.shape[0] == 0:
        return (pred_human.sum() + pred_object.sum()) * 0.0
    return torch.cat([(pred_human - gt_human).abs(), (pred_object - gt_object).abs()], dim=-1).mean()


def giou_loss(pred_human: Tensor, pred_object: Tensor, gt_human: Tensor, gt_object: Tensor) -> Tensor:
    """Mean of (1 - GIoU) over the 2 boxes of each matched pair"""
    if pred_human.shape[0] == 0:
        return (pred_human.sum() + pred_object.sum()) * 0.0
    giou = torch.cat([
        elementwise_giou(cxcywh_to_xyxy(pred_human), cxcywh_to_xyxy(gt_human)),
        elementwise_giou(cxcywh_to_xyxy(pred_object), cxcywh_to_xyxy(gt_object)),
    ])
    return (1.0 - giou).mean()


def obj_cls_loss(logits: Tensor, targets: Tensor, no_object_weight: float = 0.1) -> Tensor:
    """Softmax cross-entropy over K+1 classes; the trailing no-object class is down-weighted"""
    num_classes = logits.shape[-1]
    if targets.numel() and (targets.min() < 0 or targets.max() >= num_classes):
        raise ValueError(f"Object target outside [0, {num_classes})")
    class_weights = torch.ones(num_classes, dtype=logits.dtype, device=logits.device)
    class_weights[-1] = no_object_weight
    return F.cross_entropy(logits.reshape(-1, num_classes), targets.reshape(-1), weight=class_weights)


def verb_cls_loss(logits: Tensor, targets: Tensor) -> Tensor:
    """Element-wise binary cross-entropy with logits, averaged"""
    return F.binary_cross_entropy_with_logits(logits, targets.to(logits.dtype))


@dataclass
class HOILossTerms:
    l1: Tensor
    giou: Tensor
    obj: Tensor
    verb: Tensor
    total: Tensor

    as_floats = lambda self: {k: float(getattr(self, k).detach()) for k in ('l1', 'giou', 'obj', 'verb', 'total')}


def build_targets(matches: Sequence[MatchResult], annotations: Sequence[ImageAnnotation],
                  num_queries: int, num_objects: int, num_verbs: int):
    """
    Per-query classification targets plus matched box pairs for a batch.

    Unmatched queries get the no-object class and an all-zero verb vector. A
    matched query's verb target covers every GT verb sharing its pair's boxes and object.
    """
    batch = len(annotations)
    obj_targets = torch.full((batch, num_queries), num_objects, dtype=torch.long)
    verb_targets = torch.zeros((batch, num_queries, num_verbs))
    index, gt_h, gt_o = [], [], []
    for b, (match, annotation) in enumerate(zip(matches, annotations)):
        gts = annotation.gt_triplets
        verbs_of_pair = {}
        for t in gts:
            verbs_of_pair.setdefault(t.pair_key, set()).add(t.verb_id)
        for q, g in match.pairs:
            gt = gts[g]
            obj_targets[b, q] = gt.object_id
            verb_targets[b, q, sorted(verbs_of_pair[gt.pair_key])] = 1.0
            index.append((b, q))
            gt_h.append(gt.human_box.as_tuple())
            gt_o.append(gt.object_box.as_tuple())
    as_boxes = lambda rows: torch.tensor(rows, dtype=torch.float32).reshape(-1, 4)
    return obj_targets, verb_targets, index, as_boxes(gt_h), as_boxes(gt_o)


def hoi_loss(human_boxes: Tensor, object_boxes: Tensor, object_logits: Tensor, verb_logits: Tensor,
             matches: Sequence[MatchResult], annotations: Sequence[ImageAnnotation],
             weights: LossWeights = LossWeights(), no_object_weight: float = 0.1) -> HOILossTerms:
    """
    lambda-weighted detection loss for a batch of detector outputs.

    Box terms cover matched pairs only; classification terms cover every query.
    Each term and the total are float64.
    """
    batch, num_queries, num_classes = object_logits.shape
    obj_targets, verb_targets, index, gt_h, gt_o = build_targets(
        matches, annotations, num_queries, num_classes - 1, verb_logits.shape[-1])
    device = object_logits.device
    if index:
        bi = torch.tensor([b for b, _ in index], device=device)
        qi = torch.tensor([q for _, q in index], device=device)
        pred_h, pred_o = human_boxes[bi, qi], object_boxes[bi, qi]
    else:
        pred_h, pred_o = human_boxes.reshape(-1, 4)[:0], object_boxes.reshape(-1, 4)[:0]
    gt_h, gt_o = gt_h.to(device, human_boxes.dtype), gt_o.to(device, object_boxes.dtype)

    terms = {
        'l1': l1_box_loss(pred_h, pred_o, gt_h, gt_o),
        'giou': giou_loss(pred_h, pred_o, gt_h, gt_o),
        'obj': obj_cls_loss(object_logits, obj_targets.to(device), no_object_weight),
        'verb': verb_cls_loss(verb_logits, verb_targets.to(device)),
    }
    terms = {k: v.double() for k, v in terms.items()}
    total = (weights.l1 * terms['l1'] + weights.giou * terms['giou']
             + weights.obj * terms['obj'] + weights.verb * terms['verb'])
    return HOILossTerms(total=total, **terms)


_f64 = lambda x: x.double() if isinstance(x, Tensor) else torch.tensor(float(x), dtype=torch.float64)
total_loss = lambda hoi, itm: _f64(hoi) + _f64(itm)
