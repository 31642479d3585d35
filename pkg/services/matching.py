"""
Bipartite matching of detector queries to ground-truth HOI triplets.

`hungarian` returns, among all minimum-cost assignments, the one whose pair
list (sorted by prediction index) is lexicographically smallest.
"""
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from models.configs import MatchCostWeights
from models.errors import MatchingError
from models.schemas import HOITriplet, MatchResult, QueryPrediction
from utils.box_ops import pairwise_giou


def _optimum(cost: np.ndarray) -> float:
    if cost.size == 0:
        return 0.0
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].sum())


def _same_cost(a: float, b: float, scale: float) -> bool:
    return bool(np.isclose(a, b, rtol=0.0, atol=1e-9 * scale))


def hungarian(cost) -> MatchResult:
    """Minimum-cost injective assignment of rows (predictions) to columns (ground truths)"""
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2:
        raise MatchingError(f"Cost matrix must be 2-D, got shape {cost.shape}")
    n_rows, n_cols = cost.shape
    if n_rows == 0 or n_cols == 0:
        return MatchResult.empty(n_rows)
    if not np.isfinite(cost).all():
        raise MatchingError("Cost matrix contains non-finite entries")

    scale = max(1.0, float(np.abs(cost).max()) * min(n_rows, n_cols))
    remaining_opt = _optimum(cost)
    free_cols = list(range(n_cols))
    pairs = []

    # Walk rows in order, taking the smallest column that keeps the rest optimal
    for r in range(n_rows):
        if not free_cols:
            break
        later = list(range(r + 1, n_rows))
        chosen = None
        for c in free_cols:
            rest = [k for k in free_cols if k != c]
            sub_opt = _optimum(cost[np.ix_(later, rest)]) if later and rest else 0.0
            if _same_cost(cost[r, c] + sub_opt, remaining_opt, scale):
                chosen, remaining_opt = c, sub_opt
                break
        if chosen is None:
            # Skipping this row is the only optimal option (more rows than columns left)
            if len(later) < len(free_cols):
                raise MatchingError("Assignment canonicalization failed")
            continue
        pairs.append((r, chosen))
        free_cols.remove(chosen)

    matched = {r for r, _ in pairs}
    return MatchResult(
        pairs=tuple(pairs),
        unmatched=tuple(r for r in range(n_rows) if r not in matched),
        total_cost=float(sum(cost[r, c] for r, c in pairs)),
    )


def cost_matrix_from_arrays(object_probs: np.ndarray, verb_probs: np.ndarray,
                            human_boxes: np.ndarray, object_boxes: np.ndarray,
                            gt_objects: np.ndarray, gt_verbs: np.ndarray,
                            gt_human_boxes: np.ndarray, gt_object_boxes: np.ndarray,
                            weights: MatchCostWeights = MatchCostWeights()) -> np.ndarray:
    """(N, M) matching cost; boxes are center-size, probability rows end with the sentinel class for objects"""
    gt_objects, gt_verbs = np.asarray(gt_objects, dtype=np.int64), np.asarray(gt_verbs, dtype=np.int64)
    n_obj, n_verb = object_probs.shape[1] - 1, verb_probs.shape[1]
    if ((gt_objects < 0) | (gt_objects >= n_obj)).any() or ((gt_verbs < 0) | (gt_verbs >= n_verb)).any():
        raise MatchingError("Ground truth carries a sentinel or out-of-range label")

    to_corners = lambda b: np.concatenate([b[:, :2] - 0.5 * b[:, 2:], b[:, :2] + 0.5 * b[:, 2:]], axis=1)
    l1 = lambda p, g: np.abs(p[:, None, :] - g[None, :, :]).sum(-1)

    cost = (weights.obj * (1.0 - object_probs[:, gt_objects])
            + weights.verb * (1.0 - verb_probs[:, gt_verbs])
            + weights.l1 * (l1(human_boxes, gt_human_boxes) + l1(object_boxes, gt_object_boxes))
            + weights.giou * (2.0 - pairwise_giou(to_corners(human_boxes), to_corners(gt_human_boxes))
                              - pairwise_giou(to_corners(object_boxes), to_corners(gt_object_boxes))))
    return cost


def _prediction_arrays(preds: Sequence[QueryPrediction]):
    return (np.stack([np.asarray(p.object_probs, dtype=np.float64) for p in preds]),
            np.stack([np.asarray(p.verb_probs, dtype=np.float64) for p in preds]),
            np.array([p.human_box.as_tuple() for p in preds], dtype=np.float64),
            np.array([p.object_box.as_tuple() for p in preds], dtype=np.float64))


def _gt_arrays(gts: Sequence[HOITriplet]):
    return (np.array([g.object_id for g in gts], dtype=np.int64),
            np.array([g.verb_id for g in gts], dtype=np.int64),
            np.array([g.human_box.as_tuple() for g in gts], dtype=np.float64).reshape(-1, 4),
            np.array([g.object_box.as_tuple() for g in gts], dtype=np.float64).reshape(-1, 4))


def cost_matrix(preds: Sequence[QueryPrediction], gts: Sequence[HOITriplet],
                weights: MatchCostWeights = MatchCostWeights()) -> np.ndarray:
    if not preds or not gts:
        return np.zeros((len(preds), len(gts)))
    return cost_matrix_from_arrays(*_prediction_arrays(preds), *_gt_arrays(gts), weights=weights)


def hoi_match_cost(pred: QueryPrediction, gt: HOITriplet, weights: MatchCostWeights = MatchCostWeights()) -> float:
    """Matching cost of one query against one ground-truth triplet"""
    return float(cost_matrix([pred], [gt], weights)[0, 0])


def match_predictions(preds: Sequence[QueryPrediction], gts: Sequence[HOITriplet],
                      weights: MatchCostWeights = MatchCostWeights()) -> MatchResult:
    if not gts:
        return MatchResult.empty(len(preds))
    return hungarian(cost_matrix(preds, gts, weights))


def triplet_as_query(triplet: HOITriplet, num_objects: int, num_verbs: int) -> QueryPrediction:
    """A hard-labelled triplet as a one-hot query (for matching stored predictions)"""
    if not 0 <= triplet.object_id <= num_objects:
        raise MatchingError(f"Object id {triplet.object_id} outside 0..{num_objects}")
    object_probs, verb_probs = np.zeros(num_objects + 1), np.zeros(num_verbs)
    object_probs[triplet.object_id] = 1.0
    if 0 <= triplet.verb_id < num_verbs:
        verb_probs[triplet.verb_id] = 1.0
    return QueryPrediction(triplet.human_box, triplet.object_box, object_probs, verb_probs)
