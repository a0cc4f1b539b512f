import json

import pytest

from cubic.config import apply_overrides, from_dict, load_config
from cubic.errors import ConfigError

BASE = {"data": {"index": "I.csv", "constituents": ["A.csv"]}}


def test_defaults_and_seed_propagation(tmp_path):
    cfg = from_dict({**BASE, "seed": 9}, tmp_path)
    assert cfg.train.seed == 9 and cfg.seed == 9
    assert cfg.split.train_ratio == 0.7 and cfg.indicators.n_osc == 14
    assert cfg.train.learning_rate == 1e-3 and cfg.train.batch_size == 32
    assert cfg.trading.cost_rate == 0.001 and cfg.window == 5
    assert cfg.data.index == str(tmp_path / "I.csv")


@pytest.mark.parametrize("raw", [
    {"data": {"index": "I.csv"}},
    {**BASE, "extra": {}},
    {**BASE, "train": {"lr": 1}},
    {**BASE, "model": {"width": 3}},
    {**BASE, "split": {"train_ratio": 0.9}},
    {**BASE, "codec": {"clamp_sigma": -1}},
    {**BASE, "trading": {"confidence_source": "median"}},
])
def test_invalid_configs(raw):
    with pytest.raises(ConfigError):
        from_dict(raw)


def test_overrides():
    raw = apply_overrides(BASE, ["train.learning_rate=0.01", "trading.confidence_source=trend",
                                 "model.window=3"])
    cfg = from_dict(raw)
    assert cfg.train.learning_rate == 0.01 and cfg.trading.confidence_source == "trend"
    assert cfg.window == 3
    with pytest.raises(ConfigError):
        apply_overrides(BASE, ["train.learning_rate"])


def test_load_yaml_and_json(tmp_path):
    (tmp_path / "c.json").write_text(json.dumps(BASE))
    cfg = load_config(tmp_path / "c.json", seed=3, output_dir="out", validate_paths=False)
    assert cfg.seed == 3 and cfg.output_dir == "out"
    (tmp_path / "c.yaml").write_text("data: {index: I.csv, constituents: [A.csv]}\n")
    with pytest.raises(ConfigError, match="does not exist"):
        load_config(tmp_path / "c.yaml")
    (tmp_path / "bad.yaml").write_text("[1, 2]")
    with pytest.raises(ConfigError, match="mapping"):
        load_config(tmp_path / "bad.yaml")
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "missing.yaml")


def test_to_dict_round_trips(tmp_path):
    cfg = from_dict({**BASE, "seed": 2, "train": {"loss_variant": "ce+mean"}}, tmp_path)
    again = from_dict(cfg.to_dict())
    assert again == cfg
