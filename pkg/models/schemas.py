import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from models.enums import Polarity, Provenance
from models.vocabulary import Vocabulary


@dataclass(frozen=True)
class BBox:
    """Normalized center-size box; corners are a derived view"""
    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in self.as_tuple()):
            raise ValueError(f"Non-finite box: {self.as_tuple()}")
        if self.w < 0 or self.h < 0:
            raise ValueError(f"Negative box size: w={self.w}, h={self.h}")

    as_tuple = lambda self: (self.cx, self.cy, self.w, self.h)
    area = property(lambda self: self.w * self.h)

    @property
    def corners(self) -> tuple[float, float, float, float]:
        return (self.cx - 0.5 * self.w, self.cy - 0.5 * self.h,
                self.cx + 0.5 * self.w, self.cy + 0.5 * self.h)

    @classmethod
    def from_corners(cls, x1: float, y1: float, x2: float, y2: float) -> "BBox":
        return cls((x1 + x2) / 2, (y1 + y2) / 2, x2 - x1, y2 - y1)

    translated = lambda self, dx, dy: replace(self, cx=self.cx + dx, cy=self.cy + dy)
    inside_unit = lambda self, tol=1e-9: all(-tol <= v <= 1 + tol for v in self.corners)


@dataclass(frozen=True)
class HOITriplet:
    """One detected (or annotated) human-object interaction"""
    human_box: BBox
    object_box: BBox
    object_id: int
    verb_id: int
    score: float = 1.0

    def __post_init__(self):
        if not math.isfinite(self.score):
            raise ValueError(f"Non-finite triplet score: {self.score}")

    with_score = lambda self, score: replace(self, score=score)
    pair_key = property(lambda self: (self.human_box, self.object_box, self.object_id))


@dataclass(frozen=True)
class ImageAnnotation:
    """Ground truth for one image; gt triplets carry score 1 and no sentinel labels"""
    image_id: str
    image_ref: str
    gt_triplets: tuple[HOITriplet, ...]
    width: int
    height: int

    object_ids = property(lambda self: {t.object_id for t in self.gt_triplets})


@dataclass(frozen=True, eq=False)
class QueryPrediction:
    """One detector query in probability space"""
    human_box: BBox
    object_box: BBox
    object_probs: np.ndarray  # length K+1, last entry is no-object
    verb_probs: np.ndarray    # length V


@dataclass(frozen=True)
class GroundedSentence:
    text: str
    polarity: Polarity
    source_index: int
    weight: float = 1.0

    def __post_init__(self):
        if not self.text:
            raise ValueError("Grounded sentence text must be non-empty")
        if not 0.0 <= self.weight <= 1.0:
            raise ValueError(f"Sentence weight outside [0,1]: {self.weight}")

    to_dict = lambda self: {'text': self.text, 'polarity': self.polarity.value, 'source_index': self.source_index}


@dataclass(frozen=True)
class MatchResult:
    """Injective assignment of predictions to ground truths; unmatched predictions carry the no-object label"""
    pairs: tuple[tuple[int, int], ...]
    unmatched: tuple[int, ...]
    total_cost: float = 0.0

    num_predictions = property(lambda self: len(self.pairs) + len(self.unmatched))
    gt_of = property(lambda self: dict(self.pairs))
    matched = property(lambda self: tuple(p for p, _ in self.pairs))

    @classmethod
    def empty(cls, num_predictions: int) -> "MatchResult":
        return cls(pairs=(), unmatched=tuple(range(num_predictions)), total_cost=0.0)


@dataclass(frozen=True)
class DatasetManifest:
    """Annotated train / test splits over one vocabulary"""
    name: str
    vocabulary: Vocabulary
    train: tuple[ImageAnnotation, ...] = ()
    test: tuple[ImageAnnotation, ...] = ()
    provenance: Provenance = Provenance.REAL
    generator_seed: Optional[int] = None
    reference_split_sizes: Optional[tuple[int, int]] = None  # published (train, test) sizes, metadata only

    split_sizes = property(lambda self: (len(self.train), len(self.test)))
    all_images = property(lambda self: self.train + self.test)
    split = lambda self, name: {'train': self.train, 'test': self.test}[name]
