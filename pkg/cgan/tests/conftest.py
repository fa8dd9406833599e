import subprocess
import sys
from pathlib import Path

import pytest


@pytest.fixture(scope="session")
def toy_dataset(tmp_path_factory) -> Path:
    """128-sample 32x32 toy world produced by the evaluation toolkit's CLI.

    Built through a subprocess so this package only ever touches the
    interchange files, never the other package's Python API.
    """
    root = tmp_path_factory.mktemp("toy_world")
    subprocess.run(
        [
            sys.executable, "-m", "landkit.cli", "synth",
            "--out", str(root), "--seed", "40", "--n-samples", "128",
            "--width", "32", "--height", "32",
        ],
        check=True,
    )
    subprocess.run(
        [
            sys.executable, "-m", "landkit.cli", "split",
            "--dataset", str(root), "--design", "random",
            "--test-frac", "0.25", "--seed", "0",
            "--out", str(root / "split.json"),
        ],
        check=True,
    )
    return root
