"""
Annotation ingestion and export.

native_json
    {"name", "provenance", "generator_seed", "vocabulary": {...},
     "images": [{"image_id", "file", "width", "height", "split",
                 "triplets": [{"hbox": [x1, y1, x2, y2], "obox": [...] | null,
                               "object": name, "verb": name}]}]}
    Boxes are pixel corners; "obox": null marks a body-motion action without a role object.
hico_json / vcoco_json
    Per-image {"file_name", "width"?, "height"?, "annotations": [{"bbox", "category_id"}],
    "hoi_annotation": [{"subject_id", "object_id", "category_id"}]} lists; COCO category ids
    for objects, 1-based verb / action ids. Missing image sizes are read from the image file.
"""
import json
from collections import Counter
from pathlib import Path
from typing import Optional, Sequence

from PIL import Image

from models.enums import AnnotationFormat, Benchmark, Provenance
from models.errors import IngestionError
from models.schemas import BBox, DatasetManifest, HOITriplet, ImageAnnotation
from models.vocabulary import (
    COCO_CATEGORY_IDS, HICO_NUM_CATEGORIES, VCOCO_ACTIONS, Vocabulary,
)

HICO_REFERENCE_SPLITS = (38118, 9658)
_BOX_TOLERANCE = 1e-6


def _read_json(path: Path):
    try:
        with open(path, encoding='utf-8') as f:
            return json.load(f)
    except FileNotFoundError as e:
        raise IngestionError("file not found", str(path)) from e
    except json.JSONDecodeError as e:
        raise IngestionError(f"invalid JSON at line {e.lineno} column {e.colno}: {e.msg}", str(path)) from e


def normalize_box(corners: Sequence[float], width: float, height: float, path: str = None, entry: str = None) -> BBox:
    """Pixel corners -> normalized center-size; degenerate or out-of-image boxes are rejected"""
    try:
        x1, y1, x2, y2 = (float(v) for v in corners)
    except (TypeError, ValueError) as e:
        raise IngestionError(f"box must be 4 numbers, got {corners!r}", path, entry) from e
    if not (x1 < x2 and y1 < y2):
        raise IngestionError(f"degenerate box {list(corners)}", path, entry)
    tol_x, tol_y = _BOX_TOLERANCE * width, _BOX_TOLERANCE * height
    if x1 < -tol_x or y1 < -tol_y or x2 > width + tol_x or y2 > height + tol_y:
        raise IngestionError(f"box {list(corners)} outside the {width}x{height} image", path, entry)
    return BBox.from_corners(x1 / width, y1 / height, x2 / width, y2 / height)


def pixel_corners(box: BBox, width: int, height: int) -> list[float]:
    x1, y1, x2, y2 = box.corners
    return [x1 * width, y1 * height, x2 * width, y2 * height]


# Native format

def _native_image(raw: dict, vocab: Vocabulary, path: str, i: int, base_dir: Path) -> tuple[str, ImageAnnotation]:
    entry = f"images[{i}]"
    try:
        image_id, width, height = str(raw['image_id']), int(raw['width']), int(raw['height'])
    except (KeyError, TypeError, ValueError) as e:
        raise IngestionError(f"missing or invalid image field: {e}", path, entry) from e
    if width <= 0 or height <= 0:
        raise IngestionError(f"non-positive image size {width}x{height}", path, entry)
    split = raw.get('split', 'train')
    if split not in ('train', 'test'):
        raise IngestionError(f"unknown split {split!r}", path, entry)

    triplets = []
    for j, t in enumerate(raw.get('triplets', [])):
        t_entry = f"{entry}.triplets[{j}]"
        verb, obj = t.get('verb'), t.get('object')
        if not vocab.has_verb_name(verb):
            raise IngestionError(f"unknown verb {verb!r}", path, t_entry)
        verb_id = vocab.verb_index(verb)
        human = normalize_box(t.get('hbox'), width, height, path, t_entry)
        if t.get('obox') is None:
            if verb_id not in vocab.no_object_verbs:
                raise IngestionError(f"verb {verb!r} needs an object box", path, t_entry)
            obj = obj or 'person'
            obj_box = human
        else:
            obj_box = normalize_box(t['obox'], width, height, path, t_entry)
        if not vocab.has_object_name(obj):
            raise IngestionError(f"unknown object {obj!r}", path, t_entry)
        triplets.append(HOITriplet(human, obj_box, vocab.object_index(obj), verb_id))

    file_ref = raw.get('file') or f"memory://{image_id}"
    if not file_ref.startswith('memory://') and not Path(file_ref).is_absolute():
        file_ref = str(base_dir / file_ref)
    return split, ImageAnnotation(image_id, file_ref, tuple(triplets), width, height)


def _load_native(path: Path) -> DatasetManifest:
    data = _read_json(path)
    if not isinstance(data, dict) or 'vocabulary' not in data or 'images' not in data:
        raise IngestionError("expected an object with 'vocabulary' and 'images'", str(path))
    try:
        vocab = Vocabulary.from_dict(data['vocabulary'])
    except (KeyError, TypeError, ValueError) as e:
        raise IngestionError(f"invalid vocabulary: {e}", str(path), 'vocabulary') from e

    splits = {'train': [], 'test': []}
    seen = set()
    for i, raw in enumerate(data['images']):
        split, annotation = _native_image(raw, vocab, str(path), i, path.parent)
        if annotation.image_id in seen:
            raise IngestionError(f"duplicate image_id {annotation.image_id!r}", str(path), f"images[{i}]")
        seen.add(annotation.image_id)
        splits[split].append(annotation)

    seed = data.get('generator_seed')
    sizes = data.get('reference_split_sizes')
    return DatasetManifest(
        name=data.get('name', path.stem),
        vocabulary=vocab,
        train=tuple(splits['train']),
        test=tuple(splits['test']),
        provenance=Provenance(data.get('provenance', Provenance.REAL.value)),
        generator_seed=int(seed) if seed is not None else None,
        reference_split_sizes=tuple(sizes) if sizes else None,
    )


def manifest_to_dict(manifest: DatasetManifest) -> dict:
    vocab = manifest.vocabulary
    image_dict = lambda a, split: {
        'image_id': a.image_id, 'file': a.image_ref, 'width': a.width, 'height': a.height, 'split': split,
        'triplets': [{
            'hbox': pixel_corners(t.human_box, a.width, a.height),
            'obox': None if t.verb_id in vocab.no_object_verbs else pixel_corners(t.object_box, a.width, a.height),
            'object': vocab.object_names[t.object_id],
            'verb': vocab.verb_names[t.verb_id],
        } for t in a.gt_triplets],
    }
    return {
        'name': manifest.name,
        'provenance': manifest.provenance.value,
        'generator_seed': manifest.generator_seed,
        'reference_split_sizes': list(manifest.reference_split_sizes) if manifest.reference_split_sizes else None,
        'vocabulary': vocab.to_dict(),
        'images': [image_dict(a, 'train') for a in manifest.train] + [image_dict(a, 'test') for a in manifest.test],
    }


def save_annotations(manifest: DatasetManifest, path) -> Path:
    """Write the native JSON format"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(manifest_to_dict(manifest), f, indent=2)
    return path


# Benchmark-style formats

_COCO_INDEX = {cid: i for i, cid in enumerate(COCO_CATEGORY_IDS)}


def _image_size(raw: dict, image_root: Path, path: str, entry: str) -> tuple[int, int]:
    if raw.get('width') and raw.get('height'):
        return int(raw['width']), int(raw['height'])
    image_path = image_root / raw.get('file_name', '')
    try:
        with Image.open(image_path) as im:
            return im.size
    except (FileNotFoundError, OSError) as e:
        raise IngestionError(f"no width/height and cannot open {image_path}", path, entry) from e


def _load_benchmark(path: Path, fmt: AnnotationFormat, image_root: Optional[Path], split: str) -> DatasetManifest:
    data = _read_json(path)
    if not isinstance(data, list):
        raise IngestionError("expected a list of images", str(path))
    vocab = Vocabulary.hico() if fmt == AnnotationFormat.HICO else Vocabulary.vcoco()
    image_root = image_root or path.parent
    person = vocab.object_index('person')
    images, skipped = [], 0

    for i, raw in enumerate(data):
        entry = f"[{i}]"
        file_name = raw.get('file_name')
        if not file_name:
            raise IngestionError("missing file_name", str(path), entry)
        width, height = _image_size(raw, image_root, str(path), entry)
        boxes = raw.get('annotations', [])
        triplets = []
        for j, hoi in enumerate(raw.get('hoi_annotation', [])):
            h_entry = f"{entry}.hoi_annotation[{j}]"
            try:
                subject, obj_ref, verb_id = int(hoi['subject_id']), int(hoi['object_id']), int(hoi['category_id']) - 1
            except (KeyError, TypeError, ValueError) as e:
                raise IngestionError(f"invalid interaction: {e}", str(path), h_entry) from e
            if not vocab.is_verb(verb_id):
                raise IngestionError(f"unknown verb id {verb_id + 1}", str(path), h_entry)
            if not 0 <= subject < len(boxes) or obj_ref >= len(boxes):
                raise IngestionError("subject/object id outside the box list", str(path), h_entry)
            human = normalize_box(boxes[subject]['bbox'], width, height, str(path), h_entry)
            if obj_ref < 0:
                if verb_id not in vocab.no_object_verbs:
                    skipped += 1  # role object not visible
                    continue
                triplets.append(HOITriplet(human, human, person, verb_id))
                continue
            coco_id = boxes[obj_ref].get('category_id')
            if coco_id not in _COCO_INDEX:
                raise IngestionError(f"unknown COCO category id {coco_id}", str(path), h_entry)
            obj_box = normalize_box(boxes[obj_ref]['bbox'], width, height, str(path), h_entry)
            triplets.append(HOITriplet(human, obj_box, _COCO_INDEX[coco_id], verb_id))
        image_id = str(raw.get('img_id', Path(file_name).stem))
        images.append(ImageAnnotation(image_id, str(image_root / file_name), tuple(triplets), width, height))

    if skipped:
        print(f"[INGEST] Skipped {skipped} interactions without a visible role object in {path.name}")

    if fmt == AnnotationFormat.HICO:
        counts = Counter((t.verb_id, t.object_id) for a in images for t in a.gt_triplets)
        if len(counts) == HICO_NUM_CATEGORIES:
            vocab = vocab.with_categories(sorted(counts)).with_rare_from_counts(counts)
        else:
            print(f"[INGEST] {len(counts)} HOI categories observed (< {HICO_NUM_CATEGORIES}); "
                  f"categories derived from ground truth at evaluation")

    images = tuple(images)
    return DatasetManifest(
        name=path.stem,
        vocabulary=vocab,
        train=images if split == 'train' else (),
        test=images if split == 'test' else (),
        provenance=Provenance.REAL,
        reference_split_sizes=HICO_REFERENCE_SPLITS if fmt == AnnotationFormat.HICO else None,
    )


def load_annotations(path, fmt=AnnotationFormat.NATIVE, image_root=None, split: str = 'train') -> DatasetManifest:
    """Parse an annotation file into normalized ImageAnnotations; `split` applies to single-split formats"""
    path, fmt = Path(path), AnnotationFormat(fmt)
    if split not in ('train', 'test'):
        raise ValueError(f"split must be 'train' or 'test', got {split!r}")
    if fmt == AnnotationFormat.NATIVE:
        return _load_native(path)
    return _load_benchmark(path, fmt, Path(image_root) if image_root else None, split)


# Prediction files: [{image_id, human_box, object_box, object_id, verb_id, score}], boxes normalized center-size

def load_predictions(path) -> dict[str, list[HOITriplet]]:
    path = Path(path)
    data = _read_json(path)
    predictions = {}
    for i, p in enumerate(data):
        try:
            triplet = HOITriplet(BBox(*p['human_box']), BBox(*p['object_box']),
                                 int(p['object_id']), int(p['verb_id']), float(p['score']))
        except (KeyError, TypeError, ValueError) as e:
            raise IngestionError(f"invalid prediction: {e}", str(path), f"[{i}]") from e
        predictions.setdefault(str(p['image_id']), []).append(triplet)
    return predictions


def save_predictions(predictions: dict, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = [{'image_id': image_id, 'human_box': list(t.human_box.as_tuple()),
             'object_box': list(t.object_box.as_tuple()), 'object_id': t.object_id,
             'verb_id': t.verb_id, 'score': t.score}
            for image_id, triplets in predictions.items() for t in triplets]
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(rows, f, indent=2)
    return path
