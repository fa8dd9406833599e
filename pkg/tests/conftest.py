import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from landkit.dataset import DatasetManifest
from landkit.synthworld import WorldConfig, gen_dataset


@pytest.fixture(scope="session")
def small_world(tmp_path_factory) -> tuple[DatasetManifest, WorldConfig]:
    """24 structured 32x32 samples shared by the faster integration tests."""
    cfg = WorldConfig(seed=11, n_samples=24, width=32, height=32)
    manifest = gen_dataset(cfg, tmp_path_factory.mktemp("small_world"))
    return manifest, cfg
