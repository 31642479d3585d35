"""Sweeps: one training run per arm, evaluated and tabulated."""
import math
from typing import Dict, List, Mapping, Optional, Sequence

from models.configs import TrainConfig
from models.enums import PromptVariant
from models.schemas import DatasetManifest
from tasks.reports import (REFERENCE_NOTE, arm_row, distillation_summary, format_distillation_table,
                           format_margin_table, format_prompt_table)
from utils.debug_logger import RunLogger, get_run_logger
from utils.workflow_observer import ConsoleObserver
from workflows.training import train


def _sweep(name: str, cfg: TrainConfig, data: DatasetManifest, arms: Sequence[tuple], images, observer,
           logger: RunLogger, db_url) -> List[Dict]:
    """arms: (value, config overrides) pairs, run in the order given"""
    rows = []
    for idx, (value, overrides) in enumerate(arms, 1):
        observer.on_arm_start(name, value, idx, len(arms))
        arm_cfg = cfg.model_copy(update=overrides)
        result = train(arm_cfg, data, images=images, observer=observer,
                       logger=logger.subrun(f'{name}_{value}'), label=f'{name}={value}', db_url=db_url)
        rows.append(arm_row(value, result.final_eval, checkpoint=result.checkpoint_path, run_dir=result.run_dir))
    return rows


def ablate_margin(cfg: TrainConfig, data: DatasetManifest, alphas: Sequence[float], images: Optional[Mapping] = None,
                  observer=None, logger: Optional[RunLogger] = None, db_url: Optional[str] = None) -> tuple[List[Dict], str]:
    """One run per margin, echoed in the given order; returns (rows, table)"""
    bad = [a for a in alphas if not (math.isfinite(a) and a >= 0)]
    if bad:
        raise ValueError(f"Margins must be finite and >= 0, got {bad}")
    observer = observer or ConsoleObserver()
    logger = logger or get_run_logger().subrun('ablate_margin')
    rows = _sweep('alpha', cfg, data, [(a, {'alpha': float(a)}) for a in alphas], images, observer, logger, db_url)
    table = format_margin_table(rows)
    logger.write_json('ablation.json', {'sweep': 'margin', 'rows': rows})
    print(f"{table}\n{REFERENCE_NOTE}")
    return rows, table


def ablate_prompt(cfg: TrainConfig, data: DatasetManifest, variants: Sequence[str], images: Optional[Mapping] = None,
                  observer=None, logger: Optional[RunLogger] = None, db_url: Optional[str] = None) -> tuple[List[Dict], str]:
    """One run per prompt variant; unknown variants are rejected before any training"""
    known = {v.value for v in PromptVariant}
    unknown = [v for v in variants if str(v) not in known]
    if unknown:
        raise ValueError(f"Unknown prompt variant(s) {unknown}; expected a subset of {sorted(known)}")
    observer = observer or ConsoleObserver()
    logger = logger or get_run_logger().subrun('ablate_prompt')
    arms = [(PromptVariant(v).value, {'variant': PromptVariant(v)}) for v in variants]
    rows = _sweep('prompt', cfg, data, arms, images, observer, logger, db_url)
    table = format_prompt_table(rows)
    logger.write_json('ablation.json', {'sweep': 'prompt', 'rows': rows})
    print(f"{table}\n{REFERENCE_NOTE}")
    return rows, table


def compare_distillation(cfg: TrainConfig, data: DatasetManifest, seeds: Sequence[int] = (0, 1, 2),
                         images: Optional[Mapping] = None, observer=None, logger: Optional[RunLogger] = None,
                         db_url: Optional[str] = None) -> tuple[Dict, str]:
    """Per seed, train with and without the ITM loss and compare rare-category AP"""
    if not seeds:
        raise ValueError("At least one seed is required")
    observer = observer or ConsoleObserver()
    logger = logger or get_run_logger().subrun('compare_distillation')
    rare = {True: [], False: []}
    for idx, seed in enumerate(seeds, 1):
        for use_itm in (True, False):
            observer.on_arm_start('distill', f'seed={seed} use_itm={use_itm}', idx, len(seeds))
            label = f"seed{seed}_{'itm' if use_itm else 'no_itm'}"
            result = train(cfg.model_copy(update={'seed': seed, 'use_itm': use_itm}), data, images=images,
                           observer=observer, logger=logger.subrun(label), label=label, db_url=db_url)
            rare[use_itm].append(result.final_eval.rare_map if result.final_eval else None)
    summary = distillation_summary(rare[True], rare[False], seeds)
    table = format_distillation_table(summary)
    logger.write_json('distillation.json', summary)
    print(table)
    return summary, table
