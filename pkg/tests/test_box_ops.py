"""
Box geometry: exact fixtures, a rasterized oracle, and the batched torch / numpy forms.
"""
import numpy as np
import pytest
import torch

from models.enums import BoxForm
from models.schemas import BBox
from utils.box_ops import box_convert, box_giou, box_iou, cxcywh_to_xyxy, elementwise_giou, pairwise_giou

C = BoxForm.CORNERS

IOU_CASES = [
    {"id": "identical", "a": (0, 0, 1, 1), "b": (0, 0, 1, 1), "iou": 1.0, "giou": 1.0},
    {"id": "disjoint", "a": (0, 0, .1, .1), "b": (.5, .5, .6, .6), "iou": 0.0, "giou": None},
    {"id": "one_seventh", "a": (0, 0, .2, .2), "b": (.1, .1, .3, .3), "iou": 1 / 7, "giou": None},
    {"id": "minus_seven_ninths", "a": (0, 0, .1, .1), "b": (.2, .2, .3, .3), "iou": 0.0, "giou": -7 / 9},
]

CONVERT_CASES = [
    {"id": "full_image", "box": (0.5, 0.5, 1, 1), "from": "center", "to": "corners", "expected": (0, 0, 1, 1)},
    {"id": "offset", "box": (0.3, 0.4, 0.2, 0.2), "from": "center", "to": "corners", "expected": (0.2, 0.3, 0.4, 0.5)},
    {"id": "back", "box": (0.2, 0.3, 0.4, 0.5), "from": "corners", "to": "center", "expected": (0.3, 0.4, 0.2, 0.2)},
]


def _raster_oracle(a, b, samples=200_000):
    """IoU / GIoU by counting sample points per axis (boxes are axis-aligned, so counts factor)"""
    grid = (np.arange(samples) + 0.5) / samples
    count = lambda lo, hi: np.count_nonzero((grid >= lo) & (grid < hi)) / samples
    area = lambda x1, y1, x2, y2: count(x1, x2) * count(y1, y2)
    inter = area(max(a[0], b[0]), max(a[1], b[1]), min(a[2], b[2]), min(a[3], b[3])) \
        if min(a[2], b[2]) > max(a[0], b[0]) and min(a[3], b[3]) > max(a[1], b[1]) else 0.0
    union = area(*a) + area(*b) - inter
    hull = area(min(a[0], b[0]), min(a[1], b[1]), max(a[2], b[2]), max(a[3], b[3]))
    iou = inter / union
    return iou, iou - (hull - union) / hull


def _random_corners(rng):
    w, h = rng.uniform(0.05, 0.6, size=2)
    x1, y1 = rng.uniform(0, 1 - w), rng.uniform(0, 1 - h)
    return (x1, y1, x1 + w, y1 + h)


class TestBoxIoU:
    """Scalar IoU / GIoU"""

    @pytest.mark.parametrize("case", IOU_CASES, ids=lambda x: x["id"])
    def test_exact_fixtures(self, case):
        assert box_iou(case["a"], case["b"], form=C) == pytest.approx(case["iou"], abs=1e-12)
        if case["giou"] is not None:
            assert box_giou(case["a"], case["b"], form=C) == pytest.approx(case["giou"], abs=1e-12)

    def test_bbox_values_use_their_own_corners(self):
        a, b = BBox.from_corners(0, 0, .2, .2), BBox.from_corners(.1, .1, .3, .3)
        assert box_iou(a, b) == pytest.approx(1 / 7, abs=1e-12)

    def test_giou_never_exceeds_iou(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            a, b = _random_corners(rng), _random_corners(rng)
            assert box_giou(a, b, form=C) <= box_iou(a, b, form=C) + 1e-12
            assert -1.0 <= box_giou(a, b, form=C) <= 1.0

    def test_matches_rasterized_oracle(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            a, b = _random_corners(rng), _random_corners(rng)
            iou, giou = _raster_oracle(a, b)
            assert box_iou(a, b, form=C) == pytest.approx(iou, abs=2e-3)
            assert box_giou(a, b, form=C) == pytest.approx(giou, abs=2e-3)


class TestBoxProperties:
    """Invariants over random pairs"""
    PAIRS = 1000

    def test_exact_symmetry(self):
        rng = np.random.default_rng(1)
        for _ in range(self.PAIRS):
            a, b = _random_corners(rng), _random_corners(rng)
            assert box_iou(a, b, form=C) == box_iou(b, a, form=C)
            assert box_giou(a, b, form=C) == box_giou(b, a, form=C)

    def test_translation_invariance(self):
        rng = np.random.default_rng(5)
        for _ in range(self.PAIRS):
            a, b = _random_corners(rng), _random_corners(rng)
            dx, dy = rng.uniform(-2, 2, size=2)
            shift = lambda box: (box[0] + dx, box[1] + dy, box[2] + dx, box[3] + dy)
            assert abs(box_iou(shift(a), shift(b), form=C) - box_iou(a, b, form=C)) <= 1e-12
            assert abs(box_giou(shift(a), shift(b), form=C) - box_giou(a, b, form=C)) <= 1e-12

    def test_containment_giou_equals_iou(self):
        rng = np.random.default_rng(6)
        for _ in range(self.PAIRS):
            outer = _random_corners(rng)
            x1, x2 = np.sort(rng.uniform(outer[0], outer[2], size=2))
            y1, y2 = np.sort(rng.uniform(outer[1], outer[3], size=2))
            inner = (x1, y1, x2, y2)
            for a, b in ((outer, inner), (inner, outer)):
                assert box_giou(a, b, form=C) == pytest.approx(box_iou(a, b, form=C), abs=1e-12)


class TestBoxConvert:

    @pytest.mark.parametrize("case", CONVERT_CASES, ids=lambda x: x["id"])
    def test_convert(self, case):
        assert box_convert(case["box"], case["from"], case["to"]) == pytest.approx(case["expected"], abs=1e-12)

    def test_unknown_form_rejected(self):
        with pytest.raises(ValueError):
            box_convert((0, 0, 1, 1), "polar", "corners")

    def test_degenerate_box_has_zero_iou(self):
        assert box_iou((0.2, 0.2, 0.2, 0.4), (0, 0, 1, 1), form=C) == 0.0


class TestBatchedGIoU:

    def test_torch_matches_scalar(self):
        rng = np.random.default_rng(3)
        a = [_random_corners(rng) for _ in range(20)]
        b = [_random_corners(rng) for _ in range(20)]
        got = elementwise_giou(torch.tensor(a, dtype=torch.float64), torch.tensor(b, dtype=torch.float64))
        expected = [box_giou(x, y, form=C) for x, y in zip(a, b)]
        assert got.tolist() == pytest.approx(expected, abs=1e-12)

    def test_numpy_pairwise_matches_scalar(self):
        rng = np.random.default_rng(4)
        a = [_random_corners(rng) for _ in range(4)]
        b = [_random_corners(rng) for _ in range(3)]
        matrix = pairwise_giou(np.array(a), np.array(b))
        assert matrix.shape == (4, 3)
        for i in range(4):
            for j in range(3):
                assert matrix[i, j] == pytest.approx(box_giou(a[i], b[j], form=C), abs=1e-12)

    def test_center_to_corners(self):
        boxes = torch.tensor([[0.3, 0.4, 0.2, 0.2]], dtype=torch.float64)
        assert cxcywh_to_xyxy(boxes)[0].tolist() == pytest.approx([0.2, 0.3, 0.4, 0.5], abs=1e-12)
