# -*- coding: utf-8 -*-
"""配置加载、检查点与运行目录测试"""

import json

import numpy as np
import pytest

from src.core.errors import ConfigError
from src.data import checkpoint
from src.data.models import EpisodeMetrics, TrainConfig, WorldConfig
from src.data.storage import (
    RunStorage, default_document, load_config, merge_flat, parse_override, read_config_file,
)
from src.utils.constants import CHECKPOINT_FORMAT_VERSION


def write_json(path, data):
    path.write_text(json.dumps(data), encoding='utf-8')
    return path


class TestLoadConfig:
    def test_defaults_without_file(self):
        world, train = load_config()
        assert world == WorldConfig()
        assert train == TrainConfig()

    def test_empty_file_gives_defaults(self, tmp_path):
        path = tmp_path / "empty.json"
        path.write_text("", encoding='utf-8')
        assert load_config(path) == (WorldConfig(), TrainConfig())

    def test_nested_and_dotted_keys_mix(self, tmp_path):
        path = write_json(tmp_path / "c.json", {
            "acoustics": {"f": 20.0},
            "train.lr_actor": 1e-3,
            "world": {"n_auvs": 4},
            "ocean.background_drift": [0.0, 0.2, 0.0],
        })
        world, train = load_config(path)
        assert world.acoustics.f == 20.0
        assert world.n_auvs == 4
        assert world.ocean.background_drift == (0.0, 0.2, 0.0)
        assert train.lr_actor == 1e-3
        assert world.acoustics.k == 1.5

    def test_override_beats_file(self, tmp_path):
        path = write_json(tmp_path / "c.json", {"covertness": {"epsilon_c": 0.1}})
        world, _ = load_config(path, overrides={"covertness.epsilon_c": 0.02})
        assert world.covertness.epsilon_c == 0.02

    def test_unknown_key(self, tmp_path):
        path = write_json(tmp_path / "c.json", {"acoustics": {"frequency": 20.0}})
        with pytest.raises(ConfigError) as err:
            load_config(path)
        assert err.value.code == "unknown_key"
        assert err.value.key == "acoustics.frequency"

    def test_parse_error(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"acoustics": {', encoding='utf-8')
        with pytest.raises(ConfigError) as err:
            load_config(path)
        assert err.value.code == "parse_error"

    def test_non_object_document(self, tmp_path):
        path = write_json(tmp_path / "list.json", [1, 2])
        with pytest.raises(ConfigError) as err:
            read_config_file(path)
        assert err.value.code == "parse_error"

    def test_invariant_violation(self):
        with pytest.raises(ConfigError) as err:
            load_config(overrides={"world.p_min": 3.0})
        assert err.value.code == "invariant"
        assert err.value.key == "world.p_min"

    def test_wrong_value_type(self):
        with pytest.raises(ConfigError) as err:
            load_config(overrides={"world.n_auvs": "five"})
        assert err.value.code == "invariant"

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError) as err:
            load_config(tmp_path / "nope.json")
        assert err.value.code == "missing_file"


class TestProfiles:
    def test_desk_profile(self):
        world, train = load_config(profile="desk")
        assert world.acoustics.noise_scale == 1.2e-11
        assert world.energy.G == 9.81
        assert world.target_bearing_obs
        assert train.episodes == 300
        assert train.lr_actor == 3e-4 and train.lr_critic == 5e-4

    def test_paper_profile_keeps_literal_values(self):
        world, train = load_config(profile="paper")
        assert world.acoustics.noise_scale == 1.0
        assert world.energy.G == 981.0
        assert train.lr_actor == 3e-5 and train.episodes == 2000

    def test_unknown_profile(self):
        with pytest.raises(ConfigError) as err:
            load_config(profile="huge")
        assert err.value.code == "unknown_key"


def test_parse_override():
    assert parse_override("train.hidden=[32, 32]") == ("train.hidden", [32, 32])
    assert parse_override("world.target_bearing_obs=true") == ("world.target_bearing_obs", True)
    assert parse_override("covertness.epsilon_c = 0.01") == ("covertness.epsilon_c", 0.01)
    with pytest.raises(ConfigError):
        parse_override("train.episodes")


def test_merge_flat_rejects_unknown():
    with pytest.raises(ConfigError):
        merge_flat(default_document(), {"train.learning_rate": 1.0})


def test_world_config_round_trip():
    world = WorldConfig(n_auvs=3, target_bearing_obs=True)
    assert WorldConfig.from_dict(world.to_dict()) == world


# ==================== 检查点 ====================

class TestCheckpoint:
    def test_round_trip_is_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        arrays = {"a.w": rng.normal(size=(3, 4)), "a.t": np.array(7), "bits": np.array([1, 0, 1])}
        path = checkpoint.save_checkpoint(tmp_path / "c", arrays, {"episode": 4})
        assert path.suffix == ".npz"
        loaded, meta = checkpoint.load_checkpoint(path)
        assert meta["episode"] == 4
        assert "code_version" in meta
        for key, value in arrays.items():
            assert np.array_equal(loaded[key], value)
            assert loaded[key].dtype == value.dtype

    def test_rng_state_restores_stream(self):
        rng = np.random.default_rng(42)
        rng.normal(size=5)
        state = checkpoint.rng_state(rng)
        expected = rng.normal(size=5)
        assert np.array_equal(checkpoint.restore_rng(state).normal(size=5), expected)

    def test_missing_checkpoint(self, tmp_path):
        with pytest.raises(ConfigError) as err:
            checkpoint.load_checkpoint(tmp_path / "none.npz")
        assert err.value.code == "missing_checkpoint"

    def test_incompatible_format(self, tmp_path):
        path = tmp_path / "old.npz"
        np.savez(path, **{checkpoint.FORMAT_KEY: np.array("2.0"),
                          checkpoint.META_KEY: np.array("{}")})
        with pytest.raises(ConfigError) as err:
            checkpoint.load_checkpoint(path)
        assert err.value.code == "invariant"

    def test_not_a_checkpoint(self, tmp_path):
        path = tmp_path / "plain.npz"
        np.savez(path, x=np.zeros(2))
        with pytest.raises(ConfigError) as err:
            checkpoint.load_checkpoint(path)
        assert err.value.code == "parse_error"

    @pytest.mark.parametrize("found, ok", [
        (CHECKPOINT_FORMAT_VERSION, True),
        ("1.3", True),
        ("1.4", False),
        ("0.9", False),
        ("2.0", False),
        ("garbage", False),
    ])
    def test_is_compatible(self, found, ok):
        assert checkpoint.is_compatible(found, "1.3") is ok


# ==================== 运行目录 ====================

def metrics(episode):
    return EpisodeMetrics(episode, 1.0, 0.5, 0.3, 40.0, 0.0075, 1.0, 0.5)


def test_run_storage_layout(tmp_path):
    storage = RunStorage(tmp_path, "exp", 3)
    assert storage.run_dir == tmp_path / "exp" / "seed_3"
    assert storage.checkpoint_path(12).name == "ckpt_00012.npz"
    assert storage.trace_file("random").name == "trace_random.csv"


def test_snapshot_round_trip(tmp_path):
    storage = RunStorage(tmp_path, "exp", 0)
    storage.prepare()
    world = WorldConfig(n_auvs=3)
    train = TrainConfig(episodes=7, hidden=(16,))
    assert storage.save_snapshot(world, train, [0, 1])
    assert storage.load_snapshot() == (world, train)
    data = json.loads(storage.config_file.read_text(encoding='utf-8'))
    assert data["seeds"] == [0, 1]
    assert data["checkpoint_format"] == CHECKPOINT_FORMAT_VERSION


def test_truncate_metrics(tmp_path):
    storage = RunStorage(tmp_path, "exp", 0)
    storage.prepare()
    for ep in range(5):
        storage.append_metrics(metrics(ep))
    storage.truncate_metrics(3)
    lines = storage.metrics_file.read_text(encoding='utf-8').splitlines()
    assert lines[0].startswith("episode,")
    assert [ln.split(',')[0] for ln in lines[1:]] == ["0", "1", "2"]


def test_prepare_fresh_clears_previous_run(tmp_path):
    storage = RunStorage(tmp_path, "exp", 0)
    storage.prepare()
    storage.append_metrics(metrics(0))
    checkpoint.save_checkpoint(storage.latest_checkpoint, {"x": np.zeros(1)}, {})
    storage.prepare(fresh=False)
    assert storage.metrics_file.exists() and storage.latest_checkpoint.exists()
    storage.prepare(fresh=True)
    assert not storage.metrics_file.exists()
    assert not storage.checkpoint_dir.exists()
