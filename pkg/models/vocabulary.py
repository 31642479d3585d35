from collections import Counter
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Mapping, Optional

from models.enums import Benchmark

COCO_OBJECTS = (
    'person', 'bicycle', 'car', 'motorcycle', 'airplane', 'bus', 'train', 'truck', 'boat',
    'traffic light', 'fire hydrant', 'stop sign', 'parking meter', 'bench', 'bird', 'cat',
    'dog', 'horse', 'sheep', 'cow', 'elephant', 'bear', 'zebra', 'giraffe', 'backpack',
    'umbrella', 'handbag', 'tie', 'suitcase', 'frisbee', 'skis', 'snowboard', 'sports ball',
    'kite', 'baseball bat', 'baseball glove', 'skateboard', 'surfboard', 'tennis racket',
    'bottle', 'wine glass', 'cup', 'fork', 'knife', 'spoon', 'bowl', 'banana', 'apple',
    'sandwich', 'orange', 'broccoli', 'carrot', 'hot dog', 'pizza', 'donut', 'cake',
    'chair', 'couch', 'potted plant', 'bed', 'dining table', 'toilet', 'tv', 'laptop',
    'mouse', 'remote', 'keyboard', 'cell phone', 'microwave', 'oven', 'toaster', 'sink',
    'refrigerator', 'book', 'clock', 'vase', 'scissors', 'teddy bear', 'hair drier',
    'toothbrush',
)

HICO_VERBS = (
    'adjust', 'assemble', 'block', 'blow', 'board', 'break', 'brush with', 'buy', 'carry',
    'catch', 'chase', 'check', 'clean', 'control', 'cook', 'cut', 'cut with', 'direct',
    'drag', 'dribble', 'drink with', 'drive', 'dry', 'eat', 'eat at', 'exit', 'feed',
    'fill', 'flip', 'flush', 'fly', 'greet', 'grind', 'groom', 'herd', 'hit', 'hold',
    'hop on', 'hose', 'hug', 'hunt', 'inspect', 'install', 'jump', 'kick', 'kiss', 'lasso',
    'launch', 'lick', 'lie on', 'lift', 'light', 'load', 'lose', 'make', 'milk', 'move',
    'no interaction', 'open', 'operate', 'pack', 'paint', 'park', 'pay', 'peel', 'pet',
    'pick', 'pick up', 'point', 'pour', 'pull', 'push', 'race', 'read', 'release', 'repair',
    'ride', 'row', 'run', 'sail', 'scratch', 'serve', 'set', 'shear', 'sign', 'sip',
    'sit at', 'sit on', 'slide', 'smell', 'spin', 'squeeze', 'stab', 'stand on',
    'stand under', 'stick', 'stir', 'stop at', 'straddle', 'swing', 'tag', 'talk on',
    'teach', 'text on', 'throw', 'tie', 'toast', 'train', 'turn', 'type on', 'walk', 'wash',
    'watch', 'wave', 'wear', 'wield', 'zip',
)

# Valid COCO category ids, aligned with COCO_OBJECTS
COCO_CATEGORY_IDS = (
    *range(1, 12), *range(13, 26), 27, 28, *range(31, 45), *range(46, 66), 67, 70,
    *range(72, 83), *range(84, 91),
)

# V-COCO actions in annotation-file order; role suffix folded into a readable name
VCOCO_ACTIONS = (
    'hold', 'stand', 'sit on', 'ride', 'walk', 'look at', 'hit with', 'hit', 'eat', 'eat with',
    'jump on', 'lay on', 'talk on', 'carry', 'throw', 'catch', 'cut with', 'cut', 'run',
    'work on', 'ski on', 'surf on', 'skateboard on', 'smile', 'drink with', 'kick', 'point at',
    'read', 'snowboard on',
)
VCOCO_BODY_MOTIONS = ('stand', 'walk', 'run', 'smile')

SYNTHETIC_OBJECTS = ('ball', 'box', 'kite')
SYNTHETIC_VERBS = ('hold', 'ride', 'look at')
SYNTHETIC_RARE = ('ride', 'kite')

# Published category statistics, used to validate attached category lists
HICO_NUM_CATEGORIES, HICO_NUM_RARE = 600, 138
RARE_INSTANCE_THRESHOLD = 10  # fewer training instances than this marks a category rare


def _check_names(kind: str, names: tuple[str, ...]):
    if not names or not all(isinstance(n, str) and n.strip() for n in names):
        raise ValueError(f"{kind} names must be non-empty strings")
    if len(set(names)) != len(names):
        dupes = sorted(n for n, c in Counter(names).items() if c > 1)
        raise ValueError(f"Duplicate {kind} names: {dupes}")


@dataclass(frozen=True)
class Vocabulary:
    """Object / verb names, HOI categories and the trailing no-object / no-interaction sentinels"""
    object_names: tuple[str, ...]
    verb_names: tuple[str, ...]
    benchmark: Benchmark = Benchmark.SYNTHETIC
    hoi_categories: tuple[tuple[int, int], ...] = ()  # (verb_id, object_id)
    rare_flags: tuple[bool, ...] = ()
    no_object_verbs: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        _check_names('object', self.object_names)
        _check_names('verb', self.verb_names)
        if len(self.rare_flags) != len(self.hoi_categories):
            raise ValueError(f"rare_flags ({len(self.rare_flags)}) not aligned with "
                             f"hoi_categories ({len(self.hoi_categories)})")
        if len(set(self.hoi_categories)) != len(self.hoi_categories):
            raise ValueError("Duplicate HOI categories")
        bad = [c for c in self.hoi_categories if not (self.is_verb(c[0]) and self.is_object(c[1]))]
        if bad:
            raise ValueError(f"HOI categories out of range: {bad[:5]}")
        if not all(self.is_verb(v) for v in self.no_object_verbs):
            raise ValueError("no_object_verbs out of range")
        if self.benchmark == Benchmark.HICO and self.hoi_categories and (
                len(self.hoi_categories) != HICO_NUM_CATEGORIES or sum(self.rare_flags) != HICO_NUM_RARE):
            raise ValueError(f"HICO-DET category list must have {HICO_NUM_CATEGORIES} categories with "
                             f"{HICO_NUM_RARE} rare, got {len(self.hoi_categories)} / {sum(self.rare_flags)}")

    # Sizes and sentinels
    num_objects = property(lambda self: len(self.object_names))
    num_verbs = property(lambda self: len(self.verb_names))
    no_object_index = property(lambda self: len(self.object_names))
    no_interaction_index = property(lambda self: len(self.verb_names))

    is_object = lambda self, i: 0 <= i < len(self.object_names)
    is_verb = lambda self, i: 0 <= i < len(self.verb_names)
    is_sentinel = lambda self, object_id, verb_id: object_id == self.no_object_index or verb_id == self.no_interaction_index

    # Lookups
    @cached_property
    def _object_lookup(self) -> dict[str, int]:
        return {n: i for i, n in enumerate(self.object_names)}

    @cached_property
    def _verb_lookup(self) -> dict[str, int]:
        return {n: i for i, n in enumerate(self.verb_names)}

    @cached_property
    def category_index(self) -> dict[tuple[int, int], int]:
        return {c: i for i, c in enumerate(self.hoi_categories)}

    object_index = lambda self, name: self._object_lookup[name]
    verb_index = lambda self, name: self._verb_lookup[name]
    has_object_name = lambda self, name: name in self._object_lookup
    has_verb_name = lambda self, name: name in self._verb_lookup
    category_name = lambda self, verb_id, object_id: f"{self.verb_names[verb_id]} {self.object_names[object_id]}"
    is_rare = lambda self, verb_id, object_id: (
        (i := self.category_index.get((verb_id, object_id))) is not None and self.rare_flags[i])
    rare_categories = property(lambda self: [c for c, r in zip(self.hoi_categories, self.rare_flags) if r])

    def with_rare_from_counts(self, counts: Mapping[tuple[int, int], int],
                              threshold: int = RARE_INSTANCE_THRESHOLD) -> "Vocabulary":
        """Mark categories with fewer than `threshold` training instances as rare"""
        return replace(self, rare_flags=tuple(counts.get(c, 0) < threshold for c in self.hoi_categories))

    def with_categories(self, categories: Iterable[tuple[int, int]],
                        rare_flags: Optional[Iterable[bool]] = None) -> "Vocabulary":
        categories = tuple(tuple(c) for c in categories)
        flags = tuple(rare_flags) if rare_flags is not None else (False,) * len(categories)
        return replace(self, hoi_categories=categories, rare_flags=flags)

    # Serialization (native annotation schema)
    def to_dict(self) -> dict:
        return {
            'benchmark': self.benchmark.value,
            'objects': list(self.object_names),
            'verbs': list(self.verb_names),
            'hoi_categories': [[self.verb_names[v], self.object_names[o]] for v, o in self.hoi_categories],
            'rare': list(self.rare_flags),
            'no_object_verbs': [self.verb_names[v] for v in sorted(self.no_object_verbs)],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "Vocabulary":
        objects, verbs = tuple(data['objects']), tuple(data['verbs'])
        o_idx, v_idx = {n: i for i, n in enumerate(objects)}, {n: i for i, n in enumerate(verbs)}
        categories = tuple((v_idx[v], o_idx[o]) for v, o in data.get('hoi_categories', []))
        return cls(
            object_names=objects, verb_names=verbs,
            benchmark=Benchmark(data.get('benchmark', Benchmark.SYNTHETIC.value)),
            hoi_categories=categories,
            rare_flags=tuple(bool(r) for r in data.get('rare', [False] * len(categories))),
            no_object_verbs=frozenset(v_idx[v] for v in data.get('no_object_verbs', [])),
        )

    # Presets
    @classmethod
    def hico(cls, hoi_categories: Iterable[tuple[int, int]] = (), rare_flags: Iterable[bool] = ()) -> "Vocabulary":
        """HICO-DET names; the 600-category list comes from the annotation files"""
        return cls(COCO_OBJECTS, HICO_VERBS, Benchmark.HICO,
                   tuple(tuple(c) for c in hoi_categories), tuple(rare_flags))

    @classmethod
    def vcoco(cls) -> "Vocabulary":
        """V-COCO: 29 actions, 4 of them body motions without a role object"""
        body = frozenset(VCOCO_ACTIONS.index(a) for a in VCOCO_BODY_MOTIONS)
        return cls(COCO_OBJECTS, VCOCO_ACTIONS, Benchmark.VCOCO, no_object_verbs=body)

    @classmethod
    def synthetic(cls, objects: tuple[str, ...] = SYNTHETIC_OBJECTS, verbs: tuple[str, ...] = SYNTHETIC_VERBS,
                  rare: tuple[tuple[str, str], ...] = (SYNTHETIC_RARE,)) -> "Vocabulary":
        """Every verb x object combination is a category; `rare` lists (verb, object) name pairs"""
        categories = tuple((v, o) for v in range(len(verbs)) for o in range(len(objects)))
        rare_ids = {(verbs.index(v), objects.index(o)) for v, o in rare}
        return cls(tuple(objects), tuple(verbs), Benchmark.SYNTHETIC, categories,
                   tuple(c in rare_ids for c in categories))
