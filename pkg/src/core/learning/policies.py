# -*- coding: utf-8 -*-
"""执行策略

执行阶段只使用执行者网络与局部观测（集中训练、分散执行）：
这里的类不持有任何评价者，也不接触 O_global。
"""

import logging
from abc import ABC, abstractmethod
from pathlib import Path
from typing import List, Optional

import numpy as np

from .mappo import HMappoModel
from .neural import BernoulliPolicy, GaussianPolicy
from .. import acoustics
from ..envsim import CovertMissionEnv
from ..errors import ConfigError
from ...data.checkpoint import load_checkpoint
from ...data.models import TrainConfig, WorldConfig

logger = logging.getLogger(__name__)


class ExecutionPolicy(ABC):
    """高层选择 + 低层动作的执行接口"""

    name = "policy"

    @abstractmethod
    def select(self, state: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """由全局状态给出选择向量 G（至少一位为 1）"""

    @abstractmethod
    def act(self, agent: int, obs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """由 AUV 的局部观测给出 [P, vx, vy, vz]"""


class HMappoPolicy(ExecutionPolicy):
    """训练得到的中心执行者与 AUV 执行者"""

    name = "hmappo"

    def __init__(self, central_actor: BernoulliPolicy, actors: List[GaussianPolicy],
                 deterministic: bool = True):
        self.central_actor = central_actor
        self.actors = actors
        self.deterministic = deterministic

    @classmethod
    def from_model(cls, model: HMappoModel, deterministic: bool = True) -> 'HMappoPolicy':
        return cls(model.central_actor, list(model.actors), deterministic)

    def _actor(self, agent: int) -> GaussianPolicy:
        return self.actors[0] if len(self.actors) == 1 else self.actors[agent]

    def select(self, state, rng):
        bits, _ = self.central_actor.sample(np.asarray(state)[None, :], rng, self.deterministic)
        return bits[0]

    def act(self, agent, obs, rng):
        _, action, _ = self._actor(agent).sample(np.asarray(obs)[None, :], rng, self.deterministic)
        return action[0]


class RandomDelegationPolicy(ExecutionPolicy):
    """每个时隙每台 AUV 以 ½ 概率被选中（全零时重采样），低层沿用给定策略"""

    name = "random"

    def __init__(self, low_level: ExecutionPolicy, n: int):
        self.low_level = low_level
        self.n = n

    def select(self, state, rng):
        bits = np.zeros(self.n, dtype=np.int64)
        while not bits.any():
            bits = (rng.random(self.n) < 0.5).astype(np.int64)
        return bits

    def act(self, agent, obs, rng):
        return self.low_level.act(agent, obs, rng)


class AllSelectedPolicy(ExecutionPolicy):
    """扁平 MAPPO：去掉中心选择，所有 AUV 每个时隙都参与"""

    name = "flat_mappo"

    def __init__(self, low_level: ExecutionPolicy, n: int):
        self.low_level = low_level
        self.n = n

    def select(self, state, rng):
        return np.ones(self.n, dtype=np.int64)

    def act(self, agent, obs, rng):
        return self.low_level.act(agent, obs, rng)


class CovertCapPolicy(ExecutionPolicy):
    """
    诊断用：在给定策略之上把功率压到隐蔽上限以内

    上限按全队等功率、等距离同时发射估算，窃听者位置取自世界配置；
    AUV 位置由局部观测中的归一化坐标还原。
    """

    name = "covert_cap"

    def __init__(self, base: ExecutionPolicy, world: WorldConfig):
        self.base = base
        self.world = world

    def select(self, state, rng):
        return self.base.select(state, rng)

    def act(self, agent, obs, rng):
        action = np.array(self.base.act(agent, obs, rng), dtype=np.float64)
        w = self.world
        position = np.array([obs[2] * w.extent, obs[3] * w.extent, obs[4] * w.depth])
        d_e = max(float(np.linalg.norm(position - np.array(w.eavesdropper_position))), 1.0)
        cap = acoustics.max_covert_power(d_e, w.n_auvs, w.acoustics, w.covertness)
        action[0] = min(action[0], max(cap, w.p_min))
        return action


def build_policy(kind: str, base: HMappoPolicy, world: WorldConfig) -> ExecutionPolicy:
    """按名称构造执行策略：hmappo / random / flat_mappo / covert_cap"""
    if kind == HMappoPolicy.name:
        return base
    if kind == RandomDelegationPolicy.name:
        return RandomDelegationPolicy(base, world.n_auvs)
    if kind == AllSelectedPolicy.name:
        return AllSelectedPolicy(base, world.n_auvs)
    if kind == CovertCapPolicy.name:
        return CovertCapPolicy(base, world)
    raise ConfigError(f"未知策略: {kind}", code="unknown_key", key="policy")


POLICY_KINDS = (HMappoPolicy.name, RandomDelegationPolicy.name, AllSelectedPolicy.name,
                CovertCapPolicy.name)


def load_hmappo_policy(path: Path, world: WorldConfig, train: TrainConfig,
                       deterministic: bool = True) -> HMappoPolicy:
    """
    从训练检查点恢复执行者

    评价者与优化器状态随模型一起读入后即被丢弃，执行策略只保留执行者。
    """
    env = CovertMissionEnv(world)
    space = env.low_action_space
    model = HMappoModel(env.n, env.state_dim, env.obs_dim, space.low, space.high, train,
                        np.random.default_rng(0))
    arrays, meta = load_checkpoint(path)
    model.load_state_dict(arrays)
    logger.info("已加载执行策略 %s（训练回合 %s）", path, meta.get('episode'))
    return HMappoPolicy.from_model(model, deterministic)


def policy_for(kind: str, checkpoint: Optional[Path], world: WorldConfig,
               train: TrainConfig) -> ExecutionPolicy:
    """加载检查点并按名称包装"""
    return build_policy(kind, load_hmappo_policy(checkpoint, world, train), world)
