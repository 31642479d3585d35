"""
Training: the per-batch ITM term, loss accounting, determinism, the frozen-scorer check,
divergence handling, run bookkeeping and the TOML config loader.
"""
import math
from pathlib import Path

import pytest
import torch
from pydantic import ValidationError

from models.configs import LossWeights, MatchCostWeights, TrainConfig
from models.detector import DetectorOutput, HOIDetector
from models.errors import ScorerMutatedError, ScorerTimeoutError, TrainingDivergedError, UnknownImageError
from models.schemas import BBox, DatasetManifest, HOITriplet, ImageAnnotation, MatchResult
from models.vocabulary import Vocabulary
from repositories import RunRepository
from services.scoring import MockScorer
from tasks.training_step import itm_batch_loss, load_image, predict, query_triplets
from utils.config_file import load_train_config
from workflows.training import load_dataset, train

DESK_CONFIG = Path(__file__).parent.parent / 'configs' / 'synthetic_desk.toml'
SHAPES = Vocabulary.synthetic()
BOX = BBox(0.5, 0.5, 0.3, 0.3)


class DriftingScorer(MockScorer):
    """Reports a different digest every time it is asked"""
    calls = 0

    def state_digest(self) -> str:
        self.calls += 1
        return f"{super().state_digest()}-{self.calls}"


class TimeoutScorer(MockScorer):
    def score(self, image, sentences):
        raise ScorerTimeoutError("scorer did not answer")


def _scorer(data, cls=MockScorer):
    return cls(data.all_images, data.vocabulary)


def _two_query_output():
    """Query 0: ball / hold at 0.7 x 0.8; query 1: box / look at at 0.7 x 0.8"""
    lo, hi = math.log(0.1), math.log(0.7)
    v_lo, v_hi = math.log(0.2 / 0.8), math.log(0.8 / 0.2)
    object_logits = torch.tensor([[[hi, lo, lo, lo], [lo, hi, lo, lo]]], dtype=torch.float64, requires_grad=True)
    verb_logits = torch.tensor([[[v_hi, v_lo, v_lo], [v_lo, v_lo, v_hi]]], dtype=torch.float64, requires_grad=True)
    boxes = torch.tensor([[BOX.as_tuple(), BOX.as_tuple()]], dtype=torch.float64)
    return DetectorOutput(boxes, boxes.clone(), object_logits, verb_logits)


def _runs(db_url):
    with RunRepository.transaction(db_url) as repo:
        return [(run.status, len(repo.epoch_metrics(run.id))) for run in repo.list_runs()]


class TestItmBatchLoss:
    ANNOTATION = ImageAnnotation('img', 'memory://img', (HOITriplet(BOX, BOX, 0, 0),), 64, 64)

    def test_weighted_negative_term(self):
        output = _two_query_output()
        scorer = MockScorer([self.ANNOTATION], SHAPES)
        match = MatchResult(pairs=((0, 0),), unmatched=(1,))
        loss, positives, negatives = itm_batch_loss(output, [match], [self.ANNOTATION], scorer, SHAPES, TrainConfig())
        assert (positives, negatives) == (1, 1)
        # positive scored 2.0 clears the margin; negative scored 0.1 weighted by 0.7 * 0.8
        assert float(loss) == pytest.approx(0.1 * 0.56, abs=1e-9)
        loss.backward()
        assert output.object_logits.grad[0, 1].abs().sum() > 0
        assert output.object_logits.grad[0, 0].abs().sum() == 0

    def test_query_triplets_apply_interaction_threshold(self):
        triplets = query_triplets(_two_query_output(), 0, interaction_threshold=0.9)
        assert [t.verb_id for t in triplets] == [SHAPES.no_interaction_index] * 2
        assert [t.score for t in triplets] == [0.0, 0.0]

    def test_scorer_failure_propagates(self):
        match = MatchResult(pairs=((0, 0),), unmatched=(1,))
        with pytest.raises(ScorerTimeoutError):
            itm_batch_loss(_two_query_output(), [match], [self.ANNOTATION], TimeoutScorer([], SHAPES), SHAPES,
                           TrainConfig())

    def test_no_pixels_for_memory_image(self):
        with pytest.raises(UnknownImageError):
            load_image(self.ANNOTATION)


class TestTrain:

    def test_one_epoch(self, tiny_synthetic, tiny_train_config, run_logger, db_url, silent):
        data, images = tiny_synthetic
        result = train(tiny_train_config, data, _scorer(data), images, silent, run_logger, db_url=db_url)
        assert len(result.metrics) == 1
        assert all(math.isfinite(result.metrics[0][k]) for k in ('total_loss', 'hoi_loss', 'itm_loss'))
        assert result.steps == 2
        assert result.scorer_frozen
        assert result.final_eval is not None and 0.0 <= result.final_eval.full_map <= 1.0
        assert run_logger.read_jsonl() == result.metrics
        assert len(run_logger.read_jsonl('steps.jsonl')) == 2
        assert Path(result.checkpoint_path).exists() and run_logger.path('eval.json').exists()
        assert _runs(db_url) == [('completed', 1)]

    def test_loss_accounting(self, tiny_synthetic, tiny_train_config, run_logger, db_url, silent):
        data, images = tiny_synthetic
        cfg = tiny_train_config.model_copy(update={'epochs': 2})
        result = train(cfg, data, _scorer(data), images, silent, run_logger, db_url=db_url)
        w = cfg.loss_weights
        for row in result.history:
            assert abs(row['total'] - (row['hoi'] + row['itm'])) <= 1e-9
            weighted = w.l1 * row['l1'] + w.giou * row['giou'] + w.obj * row['obj'] + w.verb * row['verb']
            assert row['hoi'] == pytest.approx(weighted, abs=1e-9)

    def test_zero_detection_weights(self, tiny_synthetic, tiny_train_config, run_logger, db_url, silent):
        data, images = tiny_synthetic
        cfg = tiny_train_config.model_copy(update={'lambda_l1': 0.0, 'lambda_giou': 0.0, 'lambda_obj': 0.0,
                                                   'lambda_verb': 0.0})
        result = train(cfg, data, _scorer(data), images, silent, run_logger, db_url=db_url)
        assert all(row['hoi'] == 0.0 for row in result.history)
        assert all(row['total'] == row['itm'] for row in result.history)

    def test_without_itm(self, tiny_synthetic, tiny_train_config, run_logger, db_url, silent):
        data, images = tiny_synthetic
        cfg = tiny_train_config.model_copy(update={'use_itm': False})
        result = train(cfg, data, _scorer(data), images, silent, run_logger, db_url=db_url)
        assert all(row['itm'] == 0.0 and row['positives'] == 0 for row in result.history)

    def test_same_seed_is_bit_identical(self, tiny_synthetic, tiny_train_config, run_logger, db_url, silent):
        data, images = tiny_synthetic
        runs = [train(tiny_train_config, data, _scorer(data), images, silent, run_logger.subrun(label), db_url=db_url)
                for label in ('first', 'second')]
        assert runs[0].metrics == runs[1].metrics
        assert Path(runs[0].checkpoint_path).read_bytes() == Path(runs[1].checkpoint_path).read_bytes()

    def test_mutated_scorer_fails_the_run(self, tiny_synthetic, tiny_train_config, run_logger, db_url, silent):
        data, images = tiny_synthetic
        with pytest.raises(ScorerMutatedError):
            train(tiny_train_config, data, _scorer(data, DriftingScorer), images, silent, run_logger, db_url=db_url)
        assert _runs(db_url)[0][0] == 'failed'

    def test_non_finite_loss_writes_dump(self, tiny_synthetic, tiny_train_config, run_logger, db_url, silent,
                                         monkeypatch):
        data, images = tiny_synthetic
        monkeypatch.setattr('tasks.training_step.total_loss', lambda hoi, itm: hoi + itm + float('nan'))
        with pytest.raises(TrainingDivergedError) as info:
            train(tiny_train_config, data, _scorer(data), images, silent, run_logger, db_url=db_url)
        assert Path(info.value.dump_path).exists()
        assert _runs(db_url) == [('failed', 0)]

    def test_scorer_error_is_fatal(self, tiny_synthetic, tiny_train_config, run_logger, db_url, silent, monkeypatch):
        data, images = tiny_synthetic

        def timed_out(*args, **kwargs):
            raise ScorerTimeoutError("scorer did not answer")

        monkeypatch.setattr('tasks.training_step.itm_batch_loss', timed_out)
        with pytest.raises(ScorerTimeoutError):
            train(tiny_train_config, data, _scorer(data), images, silent, run_logger, db_url=db_url)
        assert _runs(db_url)[0][0] == 'failed'

    def test_no_training_images(self, tiny_synthetic, tiny_train_config, run_logger, db_url, silent):
        data, images = tiny_synthetic
        empty = DatasetManifest(name='empty', vocabulary=data.vocabulary, test=data.test)
        with pytest.raises(ValueError):
            train(tiny_train_config, empty, None, images, silent, run_logger, db_url=db_url)

    def test_predict_covers_every_image(self, tiny_synthetic):
        data, images = tiny_synthetic
        model = HOIDetector(TrainConfig(num_queries=4).detector_config(3, 3))
        predictions = predict(model, data.test, images)
        assert set(predictions) == {a.image_id for a in data.test}
        assert all(len(ts) <= 4 * 3 for ts in predictions.values())
        assert model.training

    @pytest.mark.slow
    def test_desk_scale_run(self, run_logger, db_url, silent):
        cfg = load_train_config(DESK_CONFIG)
        data, images = load_dataset(cfg)
        result = train(cfg, data, None, images, silent, run_logger, db_url=db_url)
        assert result.scorer_frozen
        assert result.final_eval.full_map >= 0.6


class TestLoadTrainConfig:

    def test_desk_config(self):
        cfg = load_train_config(DESK_CONFIG)
        assert (cfg.epochs, cfg.synthetic_train_count, cfg.synthetic_test_count) == (30, 200, 50)

    def test_overrides_win_and_none_is_ignored(self):
        cfg = load_train_config(DESK_CONFIG, {'alpha': 2.0, 'seed': None, 'variant': 'object'})
        assert cfg.alpha == 2.0
        assert cfg.seed == 0
        assert cfg.variant.value == 'object'

    def test_defaults_without_file(self):
        assert load_train_config() == TrainConfig()

    def test_nested_table_rejected(self, tmp_path):
        path = tmp_path / 'nested.toml'
        path.write_text('epochs = 3\n[model]\nembed_dim = 32\n')
        with pytest.raises(ValueError):
            load_train_config(path)

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / 'typo.toml'
        path.write_text('epoch = 3\n')
        with pytest.raises(ValidationError):
            load_train_config(path)

    def test_match_cost_weights_are_their_own_keys(self, tmp_path):
        path = tmp_path / 'cost.toml'
        path.write_text('lambda_obj = 0.0\nlambda_verb = 3.0\nlambda_l1 = 5.0\nmatch_obj = 2.0\nmatch_giou = 0.5\n')
        cfg = load_train_config(path)
        assert cfg.cost_weights == MatchCostWeights(obj=2.0, verb=1.0, l1=2.5, giou=0.5)
        assert cfg.loss_weights == LossWeights(l1=5.0, giou=1.0, obj=0.0, verb=3.0)
        assert TrainConfig().cost_weights == MatchCostWeights()
