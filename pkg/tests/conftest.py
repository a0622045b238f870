# -*- coding: utf-8 -*-
"""测试公共夹具"""

from dataclasses import replace

import numpy as np
import pytest

from src.core.acoustics import AcousticParams
from src.core.mission import EnergyParams
from src.core.ocean import VortexField
from src.data.models import ExperimentSpec, TrainConfig, WorldConfig


@pytest.fixture
def small_world() -> WorldConfig:
    """两台 AUV、2×5 时域的小世界"""
    return WorldConfig(n_auvs=2, high_horizon=2, low_horizon=5, seed=3)


@pytest.fixture
def desk_world() -> WorldConfig:
    """与 desk 档案一致的物理标定"""
    return WorldConfig(
        n_auvs=3,
        high_horizon=2,
        low_horizon=20,
        acoustics=AcousticParams(noise_scale=1.2e-11),
        energy=EnergyParams(G=9.81),
        target_bearing_obs=True,
        seed=5,
    )


@pytest.fixture
def small_train() -> TrainConfig:
    return TrainConfig(
        episodes=2,
        high_steps=2,
        low_steps=5,
        batch_auv=8,
        batch_central=2,
        minibatch_size=8,
        hidden=(8, 8),
        lr_actor=1e-3,
        lr_critic=1e-3,
        checkpoint_every=1,
    )


@pytest.fixture
def small_spec(small_world, small_train, tmp_path) -> ExperimentSpec:
    return ExperimentSpec(
        name="unit",
        world=small_world,
        train=small_train,
        output_dir=str(tmp_path / "runs"),
        seeds=[0],
        epsilons=[0.01, 0.2],
        eval_episodes=2,
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


def zero_velocity_world(world: WorldConfig) -> WorldConfig:
    """关闭海流的世界，方便构造确定的运动"""
    return replace(world, ocean=VortexField(centers=(), circulations=(), core_radii=(),
                                            background_drift=(0.0, 0.0, 0.0)))
