"""
One optimization step's worth of math, kept apart from the loop:
forward -> per-image matching -> grounding -> ITM scoring -> losses.
"""
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Mapping, Optional, Sequence

import numpy as np
import torch
from PIL import Image
from torch import Tensor

from models.configs import TrainConfig
from models.detector import DetectorOutput, HOIDetector, decode
from models.errors import UnknownImageError
from models.schemas import BBox, HOITriplet, ImageAnnotation, MatchResult
from models.vocabulary import Vocabulary
from services.grounding import cap_negatives, partition_and_ground
from services.losses import HOILossTerms, hoi_loss, total_loss, weighted_itm_loss
from services.matching import cost_matrix_from_arrays, hungarian


def load_image(annotation: ImageAnnotation, images: Optional[Mapping[str, Image.Image]] = None) -> Image.Image:
    """In-memory image by id, else the file behind image_ref"""
    if images and annotation.image_id in images:
        return images[annotation.image_id]
    if annotation.image_ref.startswith('memory://') or not Path(annotation.image_ref).is_file():
        raise UnknownImageError(f"No pixels for image {annotation.image_id!r} ({annotation.image_ref})")
    with Image.open(annotation.image_ref) as im:
        return im.convert('RGB')


def image_tensor(image: Image.Image, size: int) -> Tensor:
    """[3, size, size] float32 in [0, 1]"""
    image = image.convert('RGB')
    if image.size != (size, size):
        image = image.resize((size, size), Image.BILINEAR)
    return torch.from_numpy(np.asarray(image, dtype=np.float32) / 255.0).permute(2, 0, 1).contiguous()


stack_images = lambda annotations, images, size: torch.stack(
    [image_tensor(load_image(a, images), size) for a in annotations]) if annotations else torch.zeros((0, 3, size, size))


def match_batch(output: DetectorOutput, annotations: Sequence[ImageAnnotation], cfg: TrainConfig) -> List[MatchResult]:
    """Hungarian matching per image on detached probabilities"""
    matches = []
    for b, annotation in enumerate(annotations):
        gts = annotation.gt_triplets
        obj, verb, hb, ob = output.probabilities(b)
        if not gts:
            matches.append(MatchResult.empty(obj.shape[0]))
            continue
        cost = cost_matrix_from_arrays(
            obj, verb, hb, ob,
            np.array([t.object_id for t in gts]), np.array([t.verb_id for t in gts]),
            np.array([t.human_box.as_tuple() for t in gts]), np.array([t.object_box.as_tuple() for t in gts]),
            cfg.cost_weights)
        matches.append(hungarian(cost))
    return matches


def query_triplets(output: DetectorOutput, b: int, interaction_threshold: float) -> List[HOITriplet]:
    """
    One triplet per query with argmax labels.

    The object label may be the no-object sentinel; the verb label is the
    no-interaction sentinel when no verb probability reaches `interaction_threshold`.
    """
    obj, verb, hb, ob = output.probabilities(b)
    no_object, no_interaction = obj.shape[1] - 1, verb.shape[1]
    triplets = []
    for q in range(obj.shape[0]):
        o, v = int(np.argmax(obj[q])), int(np.argmax(verb[q]))
        if verb[q, v] < interaction_threshold:
            v = no_interaction
        sentinel = o == no_object or v == no_interaction
        score = 0.0 if sentinel else float(obj[q, o]) * float(verb[q, v])
        triplets.append(HOITriplet(BBox(*map(float, hb[q])), BBox(*map(float, ob[q])), o, v, score))
    return triplets


@dataclass
class StepResult:
    total: Tensor
    hoi: HOILossTerms
    itm: Tensor
    positives: int = 0
    negatives: int = 0
    image_ids: List[str] = field(default_factory=list)

    def as_floats(self) -> dict:
        hoi = self.hoi.as_floats()
        return {
            'total': float(self.total.detach()), 'hoi': hoi['total'], 'itm': float(self.itm.detach()),
            'l1': hoi['l1'], 'giou': hoi['giou'], 'obj': hoi['obj'], 'verb': hoi['verb'],
            'positives': self.positives, 'negatives': self.negatives,
        }


def itm_batch_loss(output: DetectorOutput, matches: Sequence[MatchResult], annotations: Sequence[ImageAnnotation],
                   scorer, vocab: Vocabulary, cfg: TrainConfig) -> tuple[Tensor, int, int]:
    """Per-image weighted ITM sums averaged over the batch; weights are p_obj * p_verb of each sentence's query"""
    obj_probs, verb_probs = output.object_logits.softmax(-1), output.verb_logits.sigmoid()
    per_image, n_pos, n_neg = [], 0, 0
    for b, (match, annotation) in enumerate(zip(matches, annotations)):
        triplets = query_triplets(output, b, cfg.interaction_threshold)
        positives, negatives = partition_and_ground(triplets, match, vocab, cfg.variant)
        sentences = positives + cap_negatives(negatives, cfg.negative_cap)
        n_pos, n_neg = n_pos + len(positives), n_neg + len(sentences) - len(positives)
        if not sentences:
            per_image.append(obj_probs[b].sum() * 0.0)
            continue
        scores = scorer.score(annotation, [s.text for s in sentences])
        weights = torch.stack([
            obj_probs[b, s.source_index, triplets[s.source_index].object_id]
            * verb_probs[b, s.source_index, triplets[s.source_index].verb_id]
            for s in sentences
        ])
        per_image.append(weighted_itm_loss(weights, list(scores.scores), [s.polarity for s in sentences], cfg.alpha))
    return torch.stack(per_image).mean(), n_pos, n_neg


def training_step(model: HOIDetector, images: Tensor, annotations: Sequence[ImageAnnotation], scorer,
                  vocab: Vocabulary, cfg: TrainConfig) -> StepResult:
    """Forward pass and every loss of one batch (no backward, no optimizer update)"""
    output = model(images)
    matches = match_batch(output, annotations, cfg)
    hoi = hoi_loss(output.human_boxes, output.object_boxes, output.object_logits, output.verb_logits,
                   matches, annotations, cfg.loss_weights, cfg.no_object_weight)
    if cfg.use_itm:
        itm, n_pos, n_neg = itm_batch_loss(output, matches, annotations, scorer, vocab, cfg)
    else:
        itm, n_pos, n_neg = torch.zeros((), dtype=torch.float64), 0, 0
    return StepResult(total=total_loss(hoi.total, itm), hoi=hoi, itm=itm.double(), positives=n_pos,
                      negatives=n_neg, image_ids=[a.image_id for a in annotations])


@torch.no_grad()
def predict(model: HOIDetector, annotations: Sequence[ImageAnnotation], images: Optional[Mapping] = None,
            score_threshold: float = 0.0, top_k_verbs: Optional[int] = None,
            batch_size: int = 16) -> dict[str, List[HOITriplet]]:
    """Decoded triplets per image id; every verb of a query is emitted unless top_k_verbs is set"""
    was_training = model.training
    model.eval()
    top_k = top_k_verbs or model.cfg.num_verbs
    predictions = {}
    for start in range(0, len(annotations), batch_size):
        chunk = annotations[start:start + batch_size]
        output = model(stack_images(chunk, images, model.cfg.image_size))
        for annotation, triplets in zip(chunk, decode(output, score_threshold, top_k)):
            predictions[annotation.image_id] = triplets
    model.train(was_training)
    return predictions
