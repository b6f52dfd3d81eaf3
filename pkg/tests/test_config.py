import json
import os

import pytest

from hashcf.core.config import MFConfig, RunConfig, TrainConfig, get_default_config, merge_configs
from hashcf.core.errors import ConfigurationError


def test_defaults():
    config = TrainConfig()
    assert (config.bits, config.learning_rate, config.batch_size, config.kl_weight) == (32, 0.001, 400, 0.1)
    assert config.train_sampling == "stochastic" and config.eval_sampling == "deterministic"
    assert config.patience == 10 and config.eval_k == 10
    assert MFConfig().use_bias is False


@pytest.mark.parametrize("overrides", [
    {"bits": 4}, {"learning_rate": 0}, {"dissimilarity": "cosine"}, {"train_sampling": "gumbel"},
    {"noise_decay": 1.5}, {"patience": 0}, {"kl_warmup_fraction": 2.0},
])
def test_invalid_train_config(overrides):
    with pytest.raises(ConfigurationError):
        TrainConfig(**overrides)


def test_run_config_validation():
    with pytest.raises(ConfigurationError):
        RunConfig(model="svd")
    with pytest.raises(ConfigurationError):
        RunConfig(proportions=[0.5, 0.5, 0.5])
    with pytest.raises(ConfigurationError):
        RunConfig(ks=[0])


def test_derived_configs():
    config = RunConfig(model="vh-hamming", bits=64, seed=3, patience=None)
    train = config.train_config()
    assert train.dissimilarity == "hamming" and train.bits == 64 and train.seed == 3 and train.patience is None
    assert RunConfig(model="mf-median", bits=16).mf_config().dim == 16
    assert RunConfig().train_config().dissimilarity == "phd"


def test_from_yaml_reads_json_and_rejects_unknown_keys(tmp_path):
    path = os.path.join(tmp_path, "run.json")
    with open(path, "w") as handle:
        json.dump({"bits": 64, "model": "mf"}, handle)
    config = RunConfig.from_yaml(path)
    assert config.bits == 64 and config.model == "mf"
    with open(path, "w") as handle:
        json.dump({"bitz": 64}, handle)
    with pytest.raises(ConfigurationError):
        RunConfig.from_yaml(path)


def test_yaml_round_trip(tmp_path):
    path = os.path.join(tmp_path, "train.yaml")
    config = TrainConfig(bits=16, patience=None)
    config.to_yaml(path)
    assert TrainConfig.from_yaml(path) == config


def test_merge_configs_flags_win_and_none_is_ignored():
    base = RunConfig(bits=64, seed=1)
    merged = merge_configs(base, {"seed": 5, "bits": None, "model": "mf"})
    assert (merged.bits, merged.seed, merged.model) == (64, 5, "mf")
    assert base.seed == 1
    with pytest.raises(ConfigurationError):
        merge_configs(base, {"nonsense": 1})


def test_config_hash_is_stable():
    assert get_default_config().config_hash() == RunConfig().config_hash()
    assert RunConfig(seed=1).config_hash() != RunConfig(seed=2).config_hash()
