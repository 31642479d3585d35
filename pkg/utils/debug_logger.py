import json
import threading
from datetime import datetime
from functools import lru_cache
from pathlib import Path

from config import RUNS_DIR

# Helper functions
_slugify = lambda name: ''.join(c if c.isalnum() or c in '-_.=' else '_' for c in str(name))


def _write_json(file_path, data):
    """Write JSON data to file"""
    with open(file_path, 'w', encoding='utf-8') as f:
        json.dump(data, f, indent=2, default=str)
    return file_path


@lru_cache(maxsize=None)
def get_run_logger(base_dir=RUNS_DIR):
    """Get or create the run logger for this process (cached per base directory)"""
    return RunLogger(base_dir)


class RunLogger:
    """Writes run artifacts (config, metrics, evaluations, diagnostics) into a timestamped directory."""

    def __init__(self, base_dir=RUNS_DIR, run_dir=None):
        if run_dir is None:
            timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
            run_dir = Path(base_dir) / timestamp
        self.run_dir = Path(run_dir)
        self.run_dir.mkdir(parents=True, exist_ok=True)
        self._children = 0
        self._lock = threading.Lock()

    def subrun(self, label: str) -> "RunLogger":
        """Numbered child directory for one training run of a sweep"""
        with self._lock:
            self._children += 1
            index = self._children
        return RunLogger(run_dir=self.run_dir / f"{index:02d}_{_slugify(label)}")

    path = lambda self, name: self.run_dir / name

    def log_config(self, config: dict) -> Path:
        return _write_json(self.path('config.json'), config)

    def append_jsonl(self, name: str, row: dict) -> Path:
        file_path = self.path(name)
        with open(file_path, 'a', encoding='utf-8') as f:
            f.write(json.dumps(row, sort_keys=True) + '\n')
        return file_path

    log_epoch = lambda self, metrics: self.append_jsonl('metrics.jsonl', metrics)
    log_step = lambda self, losses: self.append_jsonl('steps.jsonl', losses)

    def read_jsonl(self, name: str = 'metrics.jsonl') -> list:
        file_path = self.path(name)
        if not file_path.exists():
            return []
        with open(file_path, encoding='utf-8') as f:
            return [json.loads(line) for line in f if line.strip()]

    def log_eval(self, result: dict, name: str = 'eval.json') -> Path:
        log_file = _write_json(self.path(name), result)
        print(f"[DEBUG] Evaluation logged to: {log_file}")
        return log_file

    def log_nan_dump(self, diagnostics: dict) -> Path:
        """Diagnostics for a diverged step"""
        log_file = _write_json(self.path('nan_dump.json'), {'timestamp': datetime.now().isoformat(), **diagnostics})
        print(f"[DEBUG] Non-finite loss diagnostics written to: {log_file}")
        return log_file

    def write_json(self, name: str, data) -> Path:
        return _write_json(self.path(name), data)
