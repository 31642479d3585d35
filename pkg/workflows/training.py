"""
End-to-end training: detector + frozen ITM scorer, per-epoch accounting,
periodic evaluation, checkpoint. Deterministic for a given seed with the mock scorer.
"""
import math
import time
from dataclasses import dataclass, field
from typing import List, Mapping, Optional

import numpy as np
import torch

from models.configs import EvalConfig, TrainConfig
from models.detector import HOIDetector
from models.errors import ScorerMutatedError, TrainingDivergedError
from models.results import APResult
from models.schemas import DatasetManifest
from repositories import RunRepository
from services.evaluation import evaluate
from services.scoring import build_scorer
from tasks.annotations import load_annotations
from tasks.synthetic import generate_synthetic
from tasks.training_step import predict, stack_images, training_step
from utils.checkpoint import save_checkpoint
from utils.debug_logger import RunLogger, get_run_logger
from utils.workflow_observer import ConsoleObserver


@dataclass
class TrainResult:
    checkpoint_path: str
    metrics: List[dict]
    final_eval: Optional[APResult]
    scorer_digest_before: str
    scorer_digest_after: str
    run_dir: str
    run_id: Optional[int] = None
    steps: int = 0
    history: List[dict] = field(default_factory=list)  # per-step losses

    scorer_frozen = property(lambda self: self.scorer_digest_before == self.scorer_digest_after)


def load_dataset(cfg: TrainConfig, out_dir=None) -> tuple[DatasetManifest, Optional[dict]]:
    """(manifest, in-memory images or None) for cfg.data: 'synthetic' or an annotation file"""
    if cfg.data == 'synthetic':
        return generate_synthetic(cfg.synthetic_spec(), out_dir)
    return load_annotations(cfg.data, cfg.data_format), None


def seed_everything(seed: int):
    torch.manual_seed(seed)
    torch.use_deterministic_algorithms(True, warn_only=True)
    return np.random.default_rng(seed)


def build_optimizer(model: HOIDetector, cfg: TrainConfig) -> torch.optim.Optimizer:
    """Backbone and heads as separate parameter groups; backbone_lr None means one learning rate"""
    groups = [
        {'params': model.backbone_parameters(), 'lr': cfg.backbone_lr or cfg.lr},
        {'params': model.head_parameters(), 'lr': cfg.lr},
    ]
    if cfg.optimizer == 'sgd':
        return torch.optim.SGD(groups, lr=cfg.lr, momentum=0.9, weight_decay=cfg.weight_decay)
    return torch.optim.AdamW(groups, lr=cfg.lr, weight_decay=cfg.weight_decay)


def evaluate_model(model: HOIDetector, data: DatasetManifest, images: Optional[Mapping],
                   cfg: TrainConfig) -> Optional[APResult]:
    """Evaluate on the test split (None when it is empty)"""
    if not data.test:
        return None
    vocab = data.vocabulary
    predictions = predict(model, data.test, images, cfg.score_threshold, top_k_verbs=vocab.num_verbs)
    return evaluate(EvalConfig(benchmark=vocab.benchmark), predictions, data.test, vocab)


def _epoch_row(epoch: int, rows: List[dict], result: Optional[APResult]) -> dict:
    mean = lambda key: math.fsum(r[key] for r in rows) / len(rows) if rows else 0.0
    metrics = {'epoch': epoch, 'total_loss': mean('total'), 'hoi_loss': mean('hoi'), 'itm_loss': mean('itm')}
    if result is not None:
        metrics.update({k: v for k, v in result.summary().items() if k.endswith('_map') or k.startswith('role_ap')})
    return metrics


def _diverged(logger: RunLogger, cfg: TrainConfig, epoch: int, step: int, losses: dict, image_ids, model):
    grads = {n: float(p.grad.abs().max()) for n, p in model.named_parameters()
             if p.grad is not None and torch.isfinite(p.grad).all()}
    non_finite = [n for n, p in model.named_parameters() if not torch.isfinite(p).all()]
    dump = logger.log_nan_dump({
        'epoch': epoch, 'step': step, 'losses': losses, 'image_ids': list(image_ids),
        'non_finite_parameters': non_finite, 'max_abs_grad': grads, 'config': cfg.model_dump(mode='json'),
    })
    return TrainingDivergedError(f"Non-finite loss at epoch {epoch} step {step}: {losses}", dump_path=str(dump))


def train(cfg: TrainConfig, data: DatasetManifest, scorer=None, images: Optional[Mapping] = None,
          observer=None, logger: Optional[RunLogger] = None, label: str = 'train',
          db_url: Optional[str] = None) -> TrainResult:
    """
    Train a detector on `data.train` with the frozen `scorer`.

    Each step: forward, Hungarian match per image, ground matched / unmatched
    predictions, score the sentences, L = L_hoi + L_itm, one optimizer step.
    Evaluates every `cfg.eval_every` epochs and after the last one.
    """
    observer = observer or ConsoleObserver()
    logger = logger or get_run_logger().subrun(label)
    vocab = data.vocabulary
    scorer = scorer or build_scorer(cfg.scorer, data.all_images, vocab, cfg.mock_config, cfg.endpoint, images)
    if not data.train:
        raise ValueError(f"Dataset {data.name!r} has no training images")

    config_dump = cfg.model_dump(mode='json')
    logger.log_config({**config_dump, 'dataset': data.name, 'num_objects': vocab.num_objects,
                       'num_verbs': vocab.num_verbs})
    with RunRepository.transaction(db_url) as repo:
        run_id = repo.start_run(logger.run_dir, config_dump, label).id
    observer.on_run_start(label, config_dump, str(logger.run_dir))

    rng = seed_everything(cfg.seed)
    model = HOIDetector(cfg.detector_config(vocab.num_objects, vocab.num_verbs))
    model.train()
    optimizer = build_optimizer(model, cfg)
    digest_before = scorer.state_digest()

    metrics, history, result, step = [], [], None, 0
    try:
        for epoch in range(1, cfg.epochs + 1):
            started, rows = time.perf_counter(), []
            order = rng.permutation(len(data.train))
            for start in range(0, len(order), cfg.batch_size):
                batch = [data.train[i] for i in order[start:start + cfg.batch_size]]
                out = training_step(model, stack_images(batch, images, cfg.image_size), batch, scorer, vocab, cfg)
                losses = {'epoch': epoch, 'step': step, **out.as_floats()}
                if not torch.isfinite(out.total):
                    raise _diverged(logger, cfg, epoch, step, losses, out.image_ids, model)

                optimizer.zero_grad(set_to_none=True)
                out.total.backward()
                if cfg.grad_clip > 0:
                    torch.nn.utils.clip_grad_norm_(model.parameters(), cfg.grad_clip)
                optimizer.step()

                logger.log_step(losses)
                history.append(losses)
                rows.append(losses)
                observer.on_step(epoch, step, losses)
                step += 1

            result = None
            if epoch % cfg.eval_every == 0 or epoch == cfg.epochs:
                result = evaluate_model(model, data, images, cfg)
                if result is not None:
                    observer.on_eval(epoch, result.summary())
            row = _epoch_row(epoch, rows, result)
            logger.log_epoch(row)
            metrics.append(row)
            with RunRepository.transaction(db_url) as repo:
                repo.record_epoch(run_id, row)
            observer.on_epoch_end(epoch, {**row, 'seconds': time.perf_counter() - started})
    except Exception:
        with RunRepository.transaction(db_url) as repo:
            repo.finish_run(run_id, 'failed')
        raise

    digest_after = scorer.state_digest()
    if digest_after != digest_before:
        with RunRepository.transaction(db_url) as repo:
            repo.finish_run(run_id, 'failed')
        raise ScorerMutatedError(f"Scorer state changed during training ({digest_before[:12]} -> {digest_after[:12]})")

    checkpoint = save_checkpoint(logger.path('checkpoint.safetensors'), model, config_dump)
    if result is not None:
        logger.log_eval(result.model_dump())
    with RunRepository.transaction(db_url) as repo:
        repo.finish_run(run_id, 'completed', str(checkpoint), result.summary() if result else None)

    observer.on_run_complete({
        'checkpoint': str(checkpoint), 'epochs': cfg.epochs,
        'full_map': result.full_map if result else None, 'rare_map': result.rare_map if result else None,
        'scorer_frozen': True,
    })
    return TrainResult(
        checkpoint_path=str(checkpoint), metrics=metrics, final_eval=result,
        scorer_digest_before=digest_before, scorer_digest_after=digest_after,
        run_dir=str(logger.run_dir), run_id=run_id, steps=step, history=history,
    )
