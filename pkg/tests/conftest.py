import os
import sys
import tempfile
from pathlib import Path

import pytest

# Keep run artifacts and the score cache out of the user's directories
_SANDBOX = Path(tempfile.mkdtemp(prefix='hoikit_tests_'))
os.environ.setdefault('HOIKIT_RUNS_DIR', str(_SANDBOX / 'runs'))
os.environ.setdefault('HOIKIT_CACHE_DIR', str(_SANDBOX / 'cache'))

sys.path.insert(0, str(Path(__file__).parent.parent))

from models.configs import SyntheticSpec, TrainConfig  # noqa: E402
from tasks.synthetic import generate_synthetic  # noqa: E402
from utils.debug_logger import RunLogger  # noqa: E402
from utils.workflow_observer import SilentObserver  # noqa: E402


@pytest.fixture(scope='session')
def tiny_synthetic():
    """8 train / 4 test shape-world images"""
    return generate_synthetic(SyntheticSpec(train_count=8, test_count=4, seed=7))


@pytest.fixture
def tiny_train_config():
    return TrainConfig(epochs=1, batch_size=4, num_queries=4, embed_dim=32, num_heads=4, ffn_dim=64,
                       encoder_layers=1, decoder_layers=1, eval_every=1)


@pytest.fixture
def run_logger(tmp_path):
    return RunLogger(run_dir=tmp_path / 'run')


@pytest.fixture
def db_url(tmp_path):
    return f"sqlite:///{tmp_path / 'runs.db'}"


@pytest.fixture
def silent():
    return SilentObserver()
