"""
Shape-world generator: one person glyph and one colored object per image,
the verb realized as a spatial relation between the two boxes.

`classify_relation` decides both where the renderer may place the object and
which verb the ground truth carries.
"""
import math
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image, ImageDraw

from models.configs import ObjectStyle, SyntheticSpec
from models.enums import Provenance
from models.schemas import DatasetManifest, HOITriplet, ImageAnnotation
from models.vocabulary import Vocabulary
from tasks.annotations import normalize_box, save_annotations

BACKGROUND = (245, 245, 240)
PERSON_COLOR = (50, 50, 50)
MAX_PLACEMENT_ATTEMPTS = 200


def classify_relation(human: tuple, obj: tuple) -> Optional[str]:
    """Spatial relation of two corner boxes: 'overlap', 'above', 'aligned' or None"""
    hx1, hy1, hx2, hy2 = human
    ox1, oy1, ox2, oy2 = obj
    overlap_w, overlap_h = min(hx2, ox2) - max(hx1, ox1), min(hy2, oy2) - max(hy1, oy1)
    if overlap_w > 0 and overlap_h > 0:
        return 'overlap'
    if hy2 <= oy1 and overlap_w > 0:
        return 'above'
    if overlap_h > 0 and overlap_w <= 0:
        return 'aligned'
    return None


def _place(relation: str, size: int, rng: np.random.Generator):
    """Integer pixel corner boxes (person, object) satisfying `relation`"""
    for _ in range(MAX_PLACEMENT_ATTEMPTS):
        pw, ph = int(rng.integers(round(0.14 * size), round(0.2 * size) + 1)), int(rng.integers(round(0.3 * size), round(0.42 * size) + 1))
        ow = oh = int(rng.integers(round(0.14 * size), round(0.22 * size) + 1))
        px1, py1 = int(rng.integers(0, size - pw + 1)), int(rng.integers(0, size - ph + 1))
        person = (px1, py1, px1 + pw, py1 + ph)

        if relation == 'overlap':
            shift = int(rng.integers(2, max(3, ow // 2)))
            ox1 = px1 + pw - shift if rng.random() < 0.5 else px1 - ow + shift
            oy1 = py1 + int(rng.integers(0, max(1, ph - oh)))
        elif relation == 'above':
            ox1 = px1 + pw // 2 - int(rng.integers(1, ow))
            oy1 = py1 + ph + int(rng.integers(0, 3))
        else:
            gap = int(rng.integers(2, max(3, size // 8)))
            ox1 = px1 + pw + gap if rng.random() < 0.5 else px1 - ow - gap
            oy1 = py1 + int(rng.integers(0, max(1, ph - oh // 2)))
        obj = (ox1, oy1, ox1 + ow, oy1 + oh)

        inside = all(0 <= v <= size for v in person + obj)
        if inside and classify_relation(person, obj) == relation:
            return person, obj
    raise ValueError(f"Could not place a '{relation}' pair in a {size}px image")


def _draw_person(draw: ImageDraw.ImageDraw, box):
    x1, y1, x2, y2 = box
    head = y1 + (y2 - y1) * 0.3
    draw.ellipse([x1 + 1, y1, x2 - 1, head], fill=PERSON_COLOR)
    draw.rectangle([x1 + (x2 - x1) * 0.2, head, x2 - (x2 - x1) * 0.2, y2 - 1], fill=PERSON_COLOR)


def _draw_object(draw: ImageDraw.ImageDraw, box, style: ObjectStyle):
    x1, y1, x2, y2 = box
    x2, y2 = x2 - 1, y2 - 1
    cx, cy = (x1 + x2) / 2, (y1 + y2) / 2
    shapes = {
        'circle': lambda: draw.ellipse([x1, y1, x2, y2], fill=style.color),
        'square': lambda: draw.rectangle([x1, y1, x2, y2], fill=style.color),
        'triangle': lambda: draw.polygon([(cx, y1), (x2, y2), (x1, y2)], fill=style.color),
        'diamond': lambda: draw.polygon([(cx, y1), (x2, cy), (cx, y2), (x1, cy)], fill=style.color),
    }
    shapes[style.shape]()


def render(person, obj, style: ObjectStyle, size: int) -> Image.Image:
    image = Image.new('RGB', (size, size), BACKGROUND)
    draw = ImageDraw.Draw(image)
    _draw_person(draw, person)
    _draw_object(draw, obj, style)
    return image


def _plan(spec: SyntheticSpec, rng: np.random.Generator) -> tuple[list, list]:
    """(verb, object) name pairs for the train and test splits"""
    combos = [(v, o) for v in spec.verb_names for o in spec.object_names]
    common = [c for c in combos if c != tuple(spec.rare_combination)]
    n_rare = math.floor(spec.rare_rate * spec.train_count + 1e-9)

    fill = lambda pool, n: [pool[i] for i in rng.permutation(np.resize(np.arange(len(pool)), n))] if n else []
    train = [tuple(spec.rare_combination)] * n_rare + fill(common, spec.train_count - n_rare)
    train = [train[i] for i in rng.permutation(len(train))]
    test = fill(combos, spec.test_count)
    return train, test


def generate_synthetic(spec: SyntheticSpec = SyntheticSpec(), out_dir=None) -> tuple[DatasetManifest, dict]:
    """
    Render a deterministic dataset for `spec.seed`.

    Returns the manifest and {image_id: PIL image}. With `out_dir`, images are
    written as PNG files next to an annotations.json in the native format and
    referenced by path; otherwise they are referenced as memory://<image_id>.
    """
    rng = np.random.default_rng(spec.seed)
    vocab = Vocabulary.synthetic(spec.object_names, spec.verb_names, (tuple(spec.rare_combination),))
    styles = {s.name: s for s in spec.objects}
    relation_verbs = {relation: verb for verb, relation in spec.relations.items()}
    size = spec.image_size
    out_dir = Path(out_dir) if out_dir else None
    if out_dir:
        (out_dir / 'images').mkdir(parents=True, exist_ok=True)

    images, splits = {}, {}
    for split, plan in zip(('train', 'test'), _plan(spec, rng)):
        annotations = []
        for i, (verb, obj_name) in enumerate(plan):
            image_id = f'{split}_{i:05d}'
            person, obj = _place(spec.relations[verb], size, rng)
            image = render(person, obj, styles[obj_name], size)
            labeled_verb = relation_verbs[classify_relation(person, obj)]
            triplet = HOITriplet(normalize_box(person, size, size), normalize_box(obj, size, size),
                                 vocab.object_index(obj_name), vocab.verb_index(labeled_verb))
            ref = f'memory://{image_id}'
            if out_dir:
                ref = str((out_dir / 'images' / f'{image_id}.png').resolve())
                image.save(ref, format='PNG')
            images[image_id] = image
            annotations.append(ImageAnnotation(image_id, ref, (triplet,), size, size))
        splits[split] = tuple(annotations)

    manifest = DatasetManifest(
        name=f'synthetic-shapes-{spec.seed}', vocabulary=vocab, train=splits['train'], test=splits['test'],
        provenance=Provenance.SYNTHETIC, generator_seed=spec.seed,
    )
    if out_dir:
        save_annotations(manifest, out_dir / 'annotations.json')
        print(f"[SYNTH] Wrote {len(images)} images and annotations.json to {out_dir}")
    return manifest, images
