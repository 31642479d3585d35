"""
Annotation ingestion (native / HICO-style / V-COCO-style), export, and prediction files.
"""
import json

import pytest

from models.enums import Provenance
from models.errors import IngestionError
from models.schemas import BBox, HOITriplet
from models.vocabulary import COCO_CATEGORY_IDS, Vocabulary
from tasks.annotations import (load_annotations, load_predictions, normalize_box, save_annotations,
                               save_predictions)

SHAPES = Vocabulary.synthetic()

NATIVE = {
    "name": "desk",
    "provenance": "synthetic",
    "generator_seed": 3,
    "vocabulary": SHAPES.to_dict(),
    "images": [
        {"image_id": "a", "width": 200, "height": 200, "split": "train", "triplets": [
            {"hbox": [10, 10, 90, 190], "obox": [50, 50, 150, 150], "object": "ball", "verb": "hold"},
            {"hbox": [10, 10, 90, 190], "obox": [50, 50, 150, 150], "object": "ball", "verb": "look at"},
        ]},
        {"image_id": "b", "width": 100, "height": 50, "split": "test", "triplets": [
            {"hbox": [0, 0, 50, 50], "obox": [50, 0, 100, 50], "object": "kite", "verb": "ride"},
        ]},
    ],
}

NORMALIZE_CASES = [
    {"id": "square_image", "corners": (50, 50, 150, 150), "size": (200, 200), "expected": (0.25, 0.25, 0.75, 0.75)},
    {"id": "wide_image", "corners": (0, 0, 100, 50), "size": (100, 50), "expected": (0.0, 0.0, 1.0, 1.0)},
]

BAD_BOXES = [
    {"id": "degenerate", "corners": (10, 10, 10, 20)},
    {"id": "inverted", "corners": (30, 10, 20, 20)},
    {"id": "outside", "corners": (0, 0, 250, 20)},
    {"id": "not_numbers", "corners": ("a", 0, 1, 1)},
]


def _write(tmp_path, data, name='annotations.json'):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return path


class TestNormalizeBox:

    @pytest.mark.parametrize("case", NORMALIZE_CASES, ids=lambda x: x["id"])
    def test_pixel_corners(self, case):
        box = normalize_box(case["corners"], *case["size"])
        assert box.corners == pytest.approx(case["expected"], abs=1e-12)

    @pytest.mark.parametrize("case", BAD_BOXES, ids=lambda x: x["id"])
    def test_rejected(self, case):
        with pytest.raises(IngestionError):
            normalize_box(case["corners"], 200, 200)


class TestNativeFormat:

    def test_loads_splits_and_triplets(self, tmp_path):
        manifest = load_annotations(_write(tmp_path, NATIVE))
        assert manifest.name == 'desk'
        assert manifest.provenance == Provenance.SYNTHETIC
        assert manifest.split_sizes == (1, 1)
        assert sum(len(a.gt_triplets) for a in manifest.all_images) == 3
        first = manifest.train[0].gt_triplets[0]
        assert first.object_box.corners == pytest.approx((0.25, 0.25, 0.75, 0.75))
        assert (first.object_id, first.verb_id) == (SHAPES.object_index('ball'), SHAPES.verb_index('hold'))
        assert manifest.vocabulary.is_rare(SHAPES.verb_index('ride'), SHAPES.object_index('kite'))

    def test_unknown_verb_names_the_entry(self, tmp_path):
        data = json.loads(json.dumps(NATIVE))
        data["images"][1]["triplets"][0]["verb"] = "juggle"
        with pytest.raises(IngestionError) as info:
            load_annotations(_write(tmp_path, data))
        assert info.value.entry == 'images[1].triplets[0]'
        assert 'juggle' in str(info.value)

    def test_missing_object_box_needs_body_motion(self, tmp_path):
        data = json.loads(json.dumps(NATIVE))
        data["images"][0]["triplets"][0]["obox"] = None
        with pytest.raises(IngestionError):
            load_annotations(_write(tmp_path, data))

    def test_duplicate_image_id(self, tmp_path):
        data = json.loads(json.dumps(NATIVE))
        data["images"][1]["image_id"] = "a"
        with pytest.raises(IngestionError):
            load_annotations(_write(tmp_path, data))

    @pytest.mark.parametrize("content", ["{not json", "[]"], ids=["invalid_json", "wrong_shape"])
    def test_malformed_file(self, tmp_path, content):
        path = tmp_path / 'broken.json'
        path.write_text(content)
        with pytest.raises(IngestionError):
            load_annotations(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(IngestionError):
            load_annotations(tmp_path / 'absent.json')

    def test_round_trip(self, tmp_path):
        manifest = load_annotations(_write(tmp_path, NATIVE))
        reloaded = load_annotations(save_annotations(manifest, tmp_path / 'out' / 'copy.json'))
        assert reloaded.vocabulary == manifest.vocabulary
        assert reloaded.split_sizes == manifest.split_sizes
        assert reloaded.generator_seed == 3
        for before, after in zip(manifest.all_images, reloaded.all_images):
            assert before.image_id == after.image_id
            for t, u in zip(before.gt_triplets, after.gt_triplets):
                assert (t.object_id, t.verb_id) == (u.object_id, u.verb_id)
                assert t.human_box.as_tuple() == pytest.approx(u.human_box.as_tuple(), abs=1e-12)

    def test_unknown_split_argument(self, tmp_path):
        with pytest.raises(ValueError):
            load_annotations(_write(tmp_path, NATIVE), split='val')


class TestBenchmarkFormats:

    def test_hico_style(self, tmp_path):
        vocab = Vocabulary.hico()
        ball_id = COCO_CATEGORY_IDS[vocab.object_index('sports ball')]
        data = [{"file_name": "HICO_test_0001.jpg", "width": 200, "height": 100,
                 "annotations": [{"bbox": [0, 0, 100, 100], "category_id": 1},
                                 {"bbox": [100, 0, 200, 50], "category_id": ball_id}],
                 "hoi_annotation": [{"subject_id": 0, "object_id": 1,
                                     "category_id": vocab.verb_index('kick') + 1}]}]
        manifest = load_annotations(_write(tmp_path, data), 'hico_json', split='test')
        assert manifest.split_sizes == (0, 1)
        (triplet,) = manifest.test[0].gt_triplets
        assert triplet.object_id == vocab.object_index('sports ball')
        assert triplet.verb_id == vocab.verb_index('kick')
        assert triplet.object_box.corners == pytest.approx((0.5, 0.0, 1.0, 0.5))
        assert manifest.test[0].image_id == 'HICO_test_0001'

    def test_hico_unknown_coco_category(self, tmp_path):
        data = [{"file_name": "x.jpg", "width": 10, "height": 10,
                 "annotations": [{"bbox": [0, 0, 5, 5], "category_id": 1}, {"bbox": [0, 0, 5, 5], "category_id": 12}],
                 "hoi_annotation": [{"subject_id": 0, "object_id": 1, "category_id": 1}]}]
        with pytest.raises(IngestionError):
            load_annotations(_write(tmp_path, data), 'hico_json')

    def test_vcoco_body_motion_and_missing_role(self, tmp_path):
        vocab = Vocabulary.vcoco()
        data = [{"file_name": "COCO_val_0001.jpg", "width": 100, "height": 100,
                 "annotations": [{"bbox": [0, 0, 50, 100], "category_id": 1}],
                 "hoi_annotation": [
                     {"subject_id": 0, "object_id": -1, "category_id": vocab.verb_index('stand') + 1},
                     {"subject_id": 0, "object_id": -1, "category_id": vocab.verb_index('hold') + 1},
                 ]}]
        manifest = load_annotations(_write(tmp_path, data), 'vcoco_json')
        (triplet,) = manifest.train[0].gt_triplets
        assert triplet.verb_id == vocab.verb_index('stand')
        assert triplet.object_id == vocab.object_index('person')

    def test_missing_size_without_image(self, tmp_path):
        data = [{"file_name": "missing.jpg", "annotations": [], "hoi_annotation": []}]
        with pytest.raises(IngestionError):
            load_annotations(_write(tmp_path, data), 'vcoco_json')


class TestPredictionFiles:

    def test_round_trip(self, tmp_path):
        triplet = HOITriplet(BBox(0.3, 0.5, 0.2, 0.6), BBox(0.6, 0.5, 0.2, 0.2), 1, 2, 0.75)
        path = save_predictions({'a': [triplet], 'b': []}, tmp_path / 'preds.json')
        assert load_predictions(path) == {'a': [triplet]}

    def test_invalid_row(self, tmp_path):
        path = _write(tmp_path, [{"image_id": "a", "human_box": [0.5, 0.5, 0.1]}], 'preds.json')
        with pytest.raises(IngestionError) as info:
            load_predictions(path)
        assert info.value.entry == '[0]'
