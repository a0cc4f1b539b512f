import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def write_workspace(root, n_stocks=6, n_days=500, seed=0, train=None):
    """Synthetic CSVs plus a YAML run config; returns the config path."""
    import yaml

    from cubic.synthetic import write_synthetic

    root = Path(root)
    manifest = write_synthetic(root / "data", n_stocks=n_stocks, n_days=n_days, seed=seed)
    cfg = {
        "seed": seed,
        "output_dir": str(root / "run"),
        "data": {"index": "data/INDEX.csv",
                 "constituents": [str(Path(p).relative_to(root)) for p in manifest["constituents"]]},
        "model": {"embed_dim": 8, "hidden_dim": 16, "n_hidden": 2},
        "train": train or {"max_epochs": 2},
    }
    path = root / "config.yaml"
    path.write_text(yaml.safe_dump(cfg))
    return path


@pytest.fixture(scope="session")
def workspace(tmp_path_factory):
    return write_workspace(tmp_path_factory.mktemp("ws"))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
