from typing import Dict, Optional


class TrainingObserver:
    """Base observer for training / ablation events"""

    def on_run_start(self, label: str, config: Dict, run_dir: str):
        pass

    def on_step(self, epoch: int, step: int, losses: Dict):
        pass

    def on_epoch_end(self, epoch: int, metrics: Dict):
        pass

    def on_eval(self, epoch: int, summary: Dict):
        pass

    def on_run_complete(self, summary: Dict):
        pass

    def on_arm_start(self, sweep: str, value, idx: int, total: int):
        pass


class ConsoleObserver(TrainingObserver):
    """Console output observer"""

    def __init__(self, step_every: Optional[int] = None):
        self.step_every = step_every

    def on_run_start(self, label: str, config: Dict, run_dir: str):
        print(f"\n{'='*60}")
        print(f"Training {label}  (epochs={config.get('epochs')}, alpha={config.get('alpha')}, "
              f"variant={config.get('variant')}, use_itm={config.get('use_itm')})")
        print(f"Artifacts: {run_dir}")
        print(f"{'='*60}")

    def on_step(self, epoch: int, step: int, losses: Dict):
        if self.step_every and step % self.step_every == 0:
            print(f"  [STEP {epoch}:{step}] total={losses['total']:.4f} hoi={losses['hoi']:.4f} itm={losses['itm']:.4f}")

    def on_epoch_end(self, epoch: int, metrics: Dict):
        print(f"[TRAIN] epoch {epoch:3d}  total={metrics['total_loss']:.4f}  "
              f"hoi={metrics['hoi_loss']:.4f}  itm={metrics['itm_loss']:.4f}  "
              f"({metrics['seconds']:.1f}s)")

    def on_eval(self, epoch: int, summary: Dict):
        fmt = lambda v: '-' if v is None else f'{100 * v:.2f}'
        print(f"[EVAL] epoch {epoch:3d}  full={fmt(summary.get('full_map'))}  "
              f"rare={fmt(summary.get('rare_map'))}  non-rare={fmt(summary.get('nonrare_map'))}")

    def on_run_complete(self, summary: Dict):
        print(f"\n{'='*60}")
        print("Training complete")
        print(f"{'='*60}")
        print(f"  Checkpoint: {summary['checkpoint']}")
        print(f"  Epochs: {summary['epochs']}")
        print(f"  Final full mAP: {summary.get('full_map')}")
        print(f"  Final rare mAP: {summary.get('rare_map')}")
        print(f"  Scorer digest unchanged: {summary['scorer_frozen']}")

    def on_arm_start(self, sweep: str, value, idx: int, total: int):
        print(f"\n[ABLATE] {sweep} [{idx}/{total}] = {value}")


class SilentObserver(TrainingObserver):
    """No-op observer for silent execution"""
    pass
