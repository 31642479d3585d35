import json
from datetime import datetime
from typing import Dict, List, Optional

from models.database import Run, EpochMetric
from .base import BaseRepository


class RunRepository(BaseRepository):
    """Experiment runs and their per-epoch metrics"""

    # Factory
    create_run = lambda self, run_dir, config, label=None: Run(
        run_dir=str(run_dir),
        label=label,
        config_json=json.dumps(config, sort_keys=True, default=str),
        status='running',
        started_at=datetime.utcnow()
    )

    def start_run(self, run_dir, config: Dict, label: Optional[str] = None) -> Run:
        return self.save(self.create_run(run_dir, config, label))

    def record_epoch(self, run_id: int, metrics: Dict) -> EpochMetric:
        """Persist one metrics.jsonl line"""
        return self.save(EpochMetric(
            run_id=run_id,
            epoch=metrics['epoch'],
            total_loss=metrics['total_loss'],
            hoi_loss=metrics['hoi_loss'],
            itm_loss=metrics['itm_loss'],
            full_map=metrics.get('full_map'),
            rare_map=metrics.get('rare_map'),
            recorded_at=datetime.utcnow()
        ))

    def finish_run(self, run_id: int, status: str, checkpoint_path: Optional[str] = None,
                   final_eval: Optional[Dict] = None) -> Run:
        run = self.session.get(Run, run_id)
        run.status = status
        run.checkpoint_path = checkpoint_path
        run.finished_at = datetime.utcnow()
        if final_eval:
            run.full_map = final_eval.get('full_map')
            run.rare_map = final_eval.get('rare_map')
            run.nonrare_map = final_eval.get('nonrare_map')
        self.session.flush()
        return run

    get_run = lambda self, run_id: self.session.get(Run, run_id)
    list_runs = lambda self, label=None: (
        self.session.query(Run).filter(*([Run.label == label] if label else [])).order_by(Run.id).all()
    )
    epoch_metrics = lambda self, run_id: (
        self.session.query(EpochMetric).filter(EpochMetric.run_id == run_id).order_by(EpochMetric.epoch).all()
    )
