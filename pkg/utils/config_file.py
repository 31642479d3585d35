import sys
from pathlib import Path
from typing import Mapping, Optional

from models.configs import TrainConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


def read_toml(path) -> dict:
    with open(path, 'rb') as f:
        return tomllib.load(f)


def load_train_config(path=None, overrides: Optional[Mapping] = None) -> TrainConfig:
    """
    Flat TOML file -> TrainConfig. Overrides (CLI flags) win over file values;
    None-valued overrides are ignored. Unknown keys fail validation.
    """
    values = read_toml(path) if path else {}
    nested = [k for k, v in values.items() if isinstance(v, dict)]
    if nested:
        raise ValueError(f"Config file {Path(path).name} must be flat, found tables: {nested}")
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return TrainConfig(**values)
