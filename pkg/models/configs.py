"""Validated configuration objects (pydantic, frozen)."""
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from models.enums import Benchmark, EvalSetting, NoObjectMode, PromptVariant, ScorerKind, AnnotationFormat


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True, extra='forbid')


class LossWeights(_Frozen):
    """Weights of the HOI detection loss terms"""
    l1: float = Field(2.5, ge=0)
    giou: float = Field(1.0, ge=0)
    obj: float = Field(1.0, ge=0)
    verb: float = Field(1.0, ge=0)


class MatchCostWeights(_Frozen):
    """Weights of the Hungarian matching cost terms"""
    obj: float = Field(1.0, ge=0)
    verb: float = Field(1.0, ge=0)
    l1: float = Field(2.5, ge=0)
    giou: float = Field(1.0, ge=0)


class MockScorerConfig(_Frozen):
    positive_level: float = 2.0
    negative_level: float = Field(0.1, ge=0)
    noise_sigma: float = Field(0.0, ge=0)
    seed: int = 0

    @model_validator(mode='after')
    def _levels_ordered(self):
        if not self.positive_level > self.negative_level:
            raise ValueError(f"positive_level ({self.positive_level}) must exceed "
                             f"negative_level ({self.negative_level})")
        return self


class ModelConfig(_Frozen):
    """Toy query-based detector dimensions"""
    image_size: int = Field(64, ge=8)
    patch_size: int = Field(8, ge=1)
    embed_dim: int = Field(64, ge=4)
    encoder_layers: int = Field(2, ge=1)
    decoder_layers: int = Field(2, ge=1)
    num_heads: int = Field(4, ge=1)
    ffn_dim: int = Field(128, ge=4)
    num_queries: int = Field(16, ge=1)
    num_branches: int = Field(3, ge=3, le=3)
    num_objects: int = Field(3, ge=1)
    num_verbs: int = Field(3, ge=1)
    seed: int = 0

    @model_validator(mode='after')
    def _divisible(self):
        if self.embed_dim % self.num_heads:
            raise ValueError(f"embed_dim {self.embed_dim} not divisible by num_heads {self.num_heads}")
        if self.image_size % self.patch_size:
            raise ValueError(f"image_size {self.image_size} not divisible by patch_size {self.patch_size}")
        return self

    num_patches = property(lambda self: (self.image_size // self.patch_size) ** 2)


class ObjectStyle(_Frozen):
    """How a synthetic object category is drawn"""
    name: str
    shape: str = Field(pattern='^(circle|square|triangle|diamond)$')
    color: tuple[int, int, int]


_DEFAULT_STYLES = (
    ObjectStyle(name='ball', shape='circle', color=(220, 40, 40)),
    ObjectStyle(name='box', shape='square', color=(40, 90, 220)),
    ObjectStyle(name='kite', shape='triangle', color=(40, 180, 60)),
)


class SyntheticSpec(_Frozen):
    """Shape-world dataset: a person glyph and one object per image, verbs realized as spatial relations"""
    image_size: int = Field(64, ge=32)
    objects: tuple[ObjectStyle, ...] = _DEFAULT_STYLES
    relations: dict[str, str] = Field(default_factory=lambda: {'hold': 'overlap', 'ride': 'above', 'look at': 'aligned'})
    rare_combination: tuple[str, str] = ('ride', 'kite')  # (verb, object)
    rare_rate: float = Field(0.04, ge=0, lt=0.05)
    train_count: int = Field(200, ge=0)
    test_count: int = Field(50, ge=0)
    seed: int = 7

    @field_validator('relations')
    @classmethod
    def _known_relations(cls, relations):
        unknown = {r for r in relations.values()} - {'overlap', 'above', 'aligned'}
        if unknown:
            raise ValueError(f"Unknown spatial relations: {sorted(unknown)}")
        if len(set(relations.values())) != len(relations):
            raise ValueError("Each verb needs a distinct spatial relation")
        return relations

    @model_validator(mode='after')
    def _satisfiable(self):
        if not self.objects or not self.relations:
            raise ValueError("Synthetic spec needs at least one object shape and one verb")
        verb, obj = self.rare_combination
        if verb not in self.relations or obj not in self.object_names:
            raise ValueError(f"Rare combination {self.rare_combination} not in the vocabulary")
        return self

    object_names = property(lambda self: tuple(o.name for o in self.objects))
    verb_names = property(lambda self: tuple(self.relations))


class EvalConfig(_Frozen):
    benchmark: Benchmark = Benchmark.SYNTHETIC
    setting: EvalSetting = EvalSetting.DEFAULT
    iou_threshold: float = Field(0.5, gt=0, lt=1)
    scenario: Optional[int] = None
    no_object_mode: NoObjectMode = NoObjectMode.IGNORE_BOX

    @model_validator(mode='after')
    def _scenario_only_vcoco(self):
        if self.scenario is not None and (self.benchmark != Benchmark.VCOCO or self.scenario not in (1, 2)):
            raise ValueError(f"scenario {self.scenario} is only valid as 1 or 2 with the vcoco benchmark")
        return self


class TrainConfig(_Frozen):
    """Every experiment knob; loaded from a flat TOML file, CLI flags override"""
    # Schedule
    epochs: int = Field(30, gt=0)
    batch_size: int = Field(4, gt=0)
    lr: float = Field(1e-4, gt=0)
    backbone_lr: Optional[float] = Field(None, gt=0)  # None: same as lr
    weight_decay: float = Field(1e-4, ge=0)
    optimizer: str = Field('adamw', pattern='^(adamw|sgd)$')
    grad_clip: float = Field(0.1, ge=0)  # 0 disables clipping
    seed: int = 0
    eval_every: int = Field(5, gt=0)

    # Objective
    alpha: float = Field(1.0, ge=0)
    lambda_l1: float = Field(2.5, ge=0)
    lambda_giou: float = Field(1.0, ge=0)
    lambda_obj: float = Field(1.0, ge=0)
    lambda_verb: float = Field(1.0, ge=0)
    no_object_weight: float = Field(0.1, ge=0)
    use_itm: bool = True
    variant: PromptVariant = PromptVariant.FULL
    negative_cap: int = Field(16, ge=0)
    interaction_threshold: float = Field(0.5, ge=0, le=1)

    # Hungarian matching cost, independent of the loss weights
    match_obj: float = Field(1.0, ge=0)
    match_verb: float = Field(1.0, ge=0)
    match_l1: float = Field(2.5, ge=0)
    match_giou: float = Field(1.0, ge=0)

    # Scorer
    scorer: ScorerKind = ScorerKind.MOCK
    endpoint: Optional[str] = None
    mock_positive_level: float = 2.0
    mock_negative_level: float = 0.1
    mock_noise_sigma: float = 0.0

    # Model
    num_queries: int = Field(16, ge=1)
    image_size: int = 64
    patch_size: int = 8
    embed_dim: int = 64
    encoder_layers: int = 2
    decoder_layers: int = 2
    num_heads: int = 4
    ffn_dim: int = 128

    # Data
    data: str = 'synthetic'  # 'synthetic' or an annotation file
    data_format: AnnotationFormat = AnnotationFormat.NATIVE
    synthetic_seed: int = 7
    synthetic_train_count: int = Field(200, ge=1)
    synthetic_test_count: int = Field(50, ge=0)
    score_threshold: float = Field(0.0, ge=0, le=1)

    loss_weights = property(lambda self: LossWeights(l1=self.lambda_l1, giou=self.lambda_giou,
                                                     obj=self.lambda_obj, verb=self.lambda_verb))
    cost_weights = property(lambda self: MatchCostWeights(obj=self.match_obj, verb=self.match_verb,
                                                          l1=self.match_l1, giou=self.match_giou))
    mock_config = property(lambda self: MockScorerConfig(positive_level=self.mock_positive_level,
                                                         negative_level=self.mock_negative_level,
                                                         noise_sigma=self.mock_noise_sigma, seed=self.seed))

    def detector_config(self, num_objects: int, num_verbs: int) -> ModelConfig:
        return ModelConfig(image_size=self.image_size, patch_size=self.patch_size, embed_dim=self.embed_dim,
                           encoder_layers=self.encoder_layers, decoder_layers=self.decoder_layers,
                           num_heads=self.num_heads, ffn_dim=self.ffn_dim, num_queries=self.num_queries,
                           num_objects=num_objects, num_verbs=num_verbs, seed=self.seed)

    def synthetic_spec(self) -> SyntheticSpec:
        return SyntheticSpec(image_size=self.image_size, seed=self.synthetic_seed,
                             train_count=self.synthetic_train_count, test_count=self.synthetic_test_count)
