import json
from pathlib import Path
from typing import Optional

from safetensors import safe_open
from safetensors.torch import save_file, load_file

from models.configs import ModelConfig
from models.detector import HOIDetector

CHECKPOINT_FORMAT = 'hoikit-detector'
CHECKPOINT_VERSION = 1


def save_checkpoint(path, model: HOIDetector, train_config: Optional[dict] = None) -> Path:
    """Write weights (little-endian float32) plus a single JSON metadata entry"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {
        'format': CHECKPOINT_FORMAT,
        'version': CHECKPOINT_VERSION,
        'model_config': model.cfg.model_dump(),
        'train_config': train_config or {},
    }
    tensors = {k: v.detach().cpu().float().contiguous() for k, v in model.state_dict().items()}
    save_file(tensors, str(path), metadata={'hoikit': json.dumps(header, sort_keys=True, default=str)})
    return path


def read_checkpoint_header(path) -> dict:
    with safe_open(str(path), framework='pt') as f:
        meta = f.metadata() or {}
    if 'hoikit' not in meta:
        raise ValueError(f"{path} is not a hoikit checkpoint")
    header = json.loads(meta['hoikit'])
    if header.get('format') != CHECKPOINT_FORMAT or header.get('version') != CHECKPOINT_VERSION:
        raise ValueError(f"Unsupported checkpoint {header.get('format')} v{header.get('version')}")
    return header


def load_checkpoint(path) -> tuple[HOIDetector, dict]:
    """Rebuild the detector from its stored config; returns (model, header)"""
    header = read_checkpoint_header(path)
    model = HOIDetector(ModelConfig(**header['model_config']))
    model.load_state_dict(load_file(str(path)))
    model.eval()
    return model, header
