"""Pydantic models for scorer wire traffic and evaluation results"""
import math
from typing import Dict, List, Optional

from pydantic import BaseModel, Field, field_validator


def _finite_nonnegative(values: List[float]) -> List[float]:
    bad = [(i, v) for i, v in enumerate(values) if not math.isfinite(v) or v < 0]
    if bad:
        raise ValueError(f"ITM scores must be finite and >= 0, got {bad[:3]}")
    return values


class ITMScoreVector(BaseModel):
    """One nonnegative finite score per sentence, in sentence order"""
    scores: List[float] = Field(default_factory=list)

    @field_validator('scores')
    @classmethod
    def check_scores(cls, v):
        return _finite_nonnegative(v)

    __len__ = lambda self: len(self.scores)
    __getitem__ = lambda self, i: self.scores[i]


class ITMRequest(BaseModel):
    """POST {endpoint}/itm body"""
    image_b64: str
    texts: List[str]


class ITMResponse(BaseModel):
    """POST {endpoint}/itm reply"""
    scores: List[float]

    @field_validator('scores')
    @classmethod
    def check_scores(cls, v):
        return _finite_nonnegative(v)


class APResult(BaseModel):
    """Per-category average precision plus the protocol's summary means (percent-free, in [0, 1])"""
    benchmark: str
    per_category: Dict[str, Optional[float]] = Field(default_factory=dict)
    gt_counts: Dict[str, int] = Field(default_factory=dict)
    rare: Dict[str, bool] = Field(default_factory=dict)
    setting: Optional[str] = None
    scenario: Optional[int] = None

    full_map: Optional[float] = None
    rare_map: Optional[float] = None
    nonrare_map: Optional[float] = None
    role_ap_s1: Optional[float] = None
    role_ap_s2: Optional[float] = None

    evaluated = property(lambda self: {k: v for k, v in self.per_category.items() if v is not None})
    summary = lambda self: self.model_dump(include={'benchmark', 'setting', 'scenario', 'full_map', 'rare_map',
                                                    'nonrare_map', 'role_ap_s1', 'role_ap_s2'}, exclude_none=True)
