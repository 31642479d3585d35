"""
Benchmark-protocol evaluation: HICO-DET style mAP (Default / Known-Object,
Full / Rare / Non-Rare) and V-COCO style role AP (Scenario 1 / 2).

A prediction matches a ground truth when both its human and object boxes reach
the IoU threshold (>=). Every ground truth is claimed at most once.
"""
import csv
from pathlib import Path
from statistics import fmean
from typing import Dict, Iterable, List, Mapping, Optional, Sequence

import numpy as np
from terminaltables import AsciiTable

from models.configs import EvalConfig
from models.enums import Benchmark, EvalSetting, NoObjectMode
from models.errors import EvaluationError
from models.results import APResult
from models.schemas import HOITriplet, ImageAnnotation
from models.vocabulary import Vocabulary
from utils.box_ops import box_iou

Predictions = Mapping[str, Sequence[HOITriplet]]


def match_for_eval(preds: Sequence[HOITriplet], gts: Sequence[HOITriplet], iou_threshold: float = 0.5,
                   ignore_object: bool = False, require_empty_object: bool = False) -> List[bool]:
    """
    TP flags for predictions already sorted by descending score (one image, one category).

    Each prediction claims the unclaimed GT with the highest min(IoU_h, IoU_o),
    ties to the lower GT index. `ignore_object` skips the object check;
    `require_empty_object` accepts only a zero-area predicted object box.
    """
    claimed = [False] * len(gts)
    flags = []
    for p in preds:
        best, best_overlap = None, -1.0
        for g, gt in enumerate(gts):
            if claimed[g]:
                continue
            overlap = box_iou(p.human_box, gt.human_box)
            if require_empty_object:
                overlap = overlap if p.object_box.area == 0 else 0.0
            elif not ignore_object:
                overlap = min(overlap, box_iou(p.object_box, gt.object_box))
            if overlap >= iou_threshold and overlap > best_overlap:
                best, best_overlap = g, overlap
        if best is not None:
            claimed[best] = True
        flags.append(best is not None)
    return flags


def precision_recall(flags: Sequence[bool], n_gt: int) -> tuple[np.ndarray, np.ndarray]:
    """Precision and recall after each prediction in score order"""
    flags = np.asarray(flags, dtype=bool)
    tp = np.cumsum(flags, dtype=np.float64)
    fp = np.cumsum(~flags, dtype=np.float64)
    precision = tp / np.maximum(tp + fp, 1.0)
    recall = tp / n_gt if n_gt > 0 else np.zeros_like(tp)
    return precision, recall


def average_precision(flags: Sequence[bool], n_gt: int) -> Optional[float]:
    """All-point interpolated AP (area under the precision envelope); None when there is no GT"""
    if n_gt < 0:
        raise ValueError(f"n_gt must be >= 0, got {n_gt}")
    if n_gt == 0:
        return None
    precision, recall = precision_recall(flags, n_gt)
    mrec = np.concatenate(([0.0], recall, [1.0]))
    mpre = np.concatenate(([0.0], precision, [0.0]))
    for i in range(mpre.size - 1, 0, -1):
        mpre[i - 1] = max(mpre[i - 1], mpre[i])
    steps = np.where(mrec[1:] != mrec[:-1])[0]
    return float(np.sum((mrec[steps + 1] - mrec[steps]) * mpre[steps + 1]))


# Pooling

_by_score = lambda triplets: sorted(triplets, key=lambda t: -t.score)


def _check_images(predictions: Predictions, annotations: Sequence[ImageAnnotation]):
    known = {a.image_id for a in annotations}
    unknown = sorted(set(predictions) - known)
    if unknown:
        raise EvaluationError(f"Predictions for images without annotations: {unknown[:5]}")


def _pooled_flags(predictions: Predictions, images: Iterable[ImageAnnotation], select, iou_threshold: float,
                  **match_kwargs) -> tuple[list[bool], list[float], int]:
    """Match per image, then merge all images' predictions by descending score (stable)"""
    merged, n_gt = [], 0
    for order, annotation in enumerate(images):
        preds = _by_score(t for t in predictions.get(annotation.image_id, ()) if select(t))
        gts = [t for t in annotation.gt_triplets if select(t)]
        n_gt += len(gts)
        flags = match_for_eval(preds, gts, iou_threshold, **match_kwargs)
        merged.extend((-p.score, order, rank, flag) for rank, (p, flag) in enumerate(zip(preds, flags)))
    merged.sort(key=lambda row: row[:3])
    return [row[3] for row in merged], [-row[0] for row in merged], n_gt


def _hico_categories(predictions: Predictions, annotations: Sequence[ImageAnnotation], vocab: Vocabulary):
    listed = list(vocab.hoi_categories)
    seen = {(t.verb_id, t.object_id) for a in annotations for t in a.gt_triplets}
    categories = listed or sorted(seen)
    valid = set(categories) if listed else None
    for image_id, triplets in predictions.items():
        for t in triplets:
            key = (t.verb_id, t.object_id)
            ok = key in valid if valid is not None else (vocab.is_verb(t.verb_id) and vocab.is_object(t.object_id))
            if not ok:
                raise EvaluationError(f"Prediction on image {image_id!r} has unknown category "
                                      f"(verb={t.verb_id}, object={t.object_id})")
    return categories


def category_pr_curves(predictions: Predictions, annotations: Sequence[ImageAnnotation], vocab: Vocabulary,
                       setting=EvalSetting.DEFAULT, iou_threshold: float = 0.5) -> Dict[str, dict]:
    """Pooled flags, scores and GT count per HOI category"""
    _check_images(predictions, annotations)
    setting = EvalSetting(setting)
    curves = {}
    for verb_id, object_id in _hico_categories(predictions, annotations, vocab):
        images = annotations
        if setting == EvalSetting.KNOWN_OBJECT:
            images = [a for a in annotations if object_id in a.object_ids]
        select = lambda t, v=verb_id, o=object_id: t.verb_id == v and t.object_id == o
        flags, scores, n_gt = _pooled_flags(predictions, images, select, iou_threshold)
        curves[vocab.category_name(verb_id, object_id)] = {
            'flags': flags, 'scores': scores, 'n_gt': n_gt, 'rare': vocab.is_rare(verb_id, object_id),
        }
    return curves


_mean = lambda values: fmean(values) if values else None


def hico_map(predictions: Predictions, annotations: Sequence[ImageAnnotation], vocab: Vocabulary,
             setting=EvalSetting.DEFAULT, iou_threshold: float = 0.5) -> APResult:
    """Per-category AP and Full / Rare / Non-Rare means over categories that have GT"""
    curves = category_pr_curves(predictions, annotations, vocab, setting, iou_threshold)
    per_category = {name: average_precision(c['flags'], c['n_gt']) for name, c in curves.items()}
    rare = {name: c['rare'] for name, c in curves.items()}
    evaluated = {name: ap for name, ap in per_category.items() if ap is not None}
    return APResult(
        benchmark=vocab.benchmark.value,
        setting=EvalSetting(setting).value,
        per_category=per_category,
        gt_counts={name: c['n_gt'] for name, c in curves.items()},
        rare=rare,
        full_map=_mean(list(evaluated.values())),
        rare_map=_mean([ap for name, ap in evaluated.items() if rare[name]]),
        nonrare_map=_mean([ap for name, ap in evaluated.items() if not rare[name]]),
    )


def vcoco_role_ap(predictions: Predictions, annotations: Sequence[ImageAnnotation], vocab: Vocabulary,
                  scenario: int = 1, no_object_mode=NoObjectMode.IGNORE_BOX,
                  iou_threshold: float = 0.5) -> APResult:
    """
    Role AP per action, the object box being the role.

    Scenario 1 keeps the body-motion actions (no role object); Scenario 2 drops them.
    """
    if vocab.benchmark != Benchmark.VCOCO:
        raise EvaluationError(f"Role AP needs a vcoco vocabulary, got {vocab.benchmark.value}")
    if scenario not in (1, 2):
        raise EvaluationError(f"Scenario must be 1 or 2, got {scenario}")
    _check_images(predictions, annotations)
    bad = [t for ts in predictions.values() for t in ts if not vocab.is_verb(t.verb_id)]
    if bad:
        raise EvaluationError(f"Predictions with unknown action ids: {sorted({t.verb_id for t in bad})[:5]}")
    no_object_mode = NoObjectMode(no_object_mode)

    actions = [v for v in range(vocab.num_verbs) if scenario == 1 or v not in vocab.no_object_verbs]
    per_action, gt_counts = {}, {}
    for verb_id in actions:
        body_motion = verb_id in vocab.no_object_verbs
        flags, _, n_gt = _pooled_flags(
            predictions, annotations, lambda t, v=verb_id: t.verb_id == v, iou_threshold,
            ignore_object=body_motion and no_object_mode == NoObjectMode.IGNORE_BOX,
            require_empty_object=body_motion and no_object_mode == NoObjectMode.REQUIRE_EMPTY,
        )
        name = vocab.verb_names[verb_id]
        per_action[name], gt_counts[name] = average_precision(flags, n_gt), n_gt

    role_ap = _mean([ap for ap in per_action.values() if ap is not None])
    return APResult(
        benchmark=Benchmark.VCOCO.value, scenario=scenario, per_category=per_action, gt_counts=gt_counts,
        role_ap_s1=role_ap if scenario == 1 else None,
        role_ap_s2=role_ap if scenario == 2 else None,
    )


def evaluate(cfg: EvalConfig, predictions: Predictions, annotations: Sequence[ImageAnnotation],
             vocab: Vocabulary) -> APResult:
    if cfg.benchmark == Benchmark.VCOCO:
        return vcoco_role_ap(predictions, annotations, vocab, cfg.scenario or 1, cfg.no_object_mode, cfg.iou_threshold)
    return hico_map(predictions, annotations, vocab, cfg.setting, cfg.iou_threshold)


# Reports

_pct = lambda v: '-' if v is None else f'{100 * v:.2f}'


def format_hico_table(results: Sequence[APResult], reference: Optional[Mapping[str, Sequence[float]]] = None) -> str:
    """One row per result (setting), columns Full / Rare / Non-Rare in percent"""
    rows = [['Setting', 'Full', 'Rare', 'Non-Rare']]
    rows += [[r.setting or '-', _pct(r.full_map), _pct(r.rare_map), _pct(r.nonrare_map)] for r in results]
    rows += [[f'{name} (reference)', *(f'{v:.2f}' for v in values)] for name, values in (reference or {}).items()]
    table = AsciiTable(rows, ' HOI mAP ')
    for col in (1, 2, 3):
        table.justify_columns[col] = 'right'
    return table.table


def format_vcoco_table(s1: Optional[APResult], s2: Optional[APResult], per_action: bool = False) -> str:
    rows = [['Metric', 'Scenario 1', 'Scenario 2']]
    rows.append(['AP_role', _pct(s1.role_ap_s1 if s1 else None), _pct(s2.role_ap_s2 if s2 else None)])
    if per_action and s1:
        rows += [[name, _pct(ap), _pct(s2.per_category.get(name) if s2 else None)]
                 for name, ap in s1.per_category.items()]
    table = AsciiTable(rows, ' Role AP ')
    table.justify_columns[1] = table.justify_columns[2] = 'right'
    return table.table


def write_pr_csv(path, curves: Mapping[str, dict]) -> Path:
    """Dump precision / recall after every ranked prediction, per category"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f)
        writer.writerow(['category', 'rank', 'score', 'tp', 'precision', 'recall'])
        for name, c in curves.items():
            precision, recall = precision_recall(c['flags'], c['n_gt'])
            for rank, (score, flag, p, r) in enumerate(zip(c['scores'], c['flags'], precision, recall), 1):
                writer.writerow([name, rank, repr(float(score)), int(flag), repr(float(p)), repr(float(r))])
    return path
