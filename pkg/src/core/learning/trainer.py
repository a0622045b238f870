# -*- coding: utf-8 -*-
"""H-MAPPO 双时间尺度训练循环

每个回合：每个高层步从中心策略采样 G(t)，低层逐时间片执行各 AUV 的动作，
低层转移存入 B_AUV，时隙结束后把高层转移存入 B_c；
缓冲区达到批大小即更新并清空。
"""

import logging
from dataclasses import replace
from typing import Callable, Dict, List, Optional

import numpy as np

from .buffer import RolloutBuffer, Transition
from .mappo import HMappoModel, central_update, mappo_update
from ..envsim import CovertMissionEnv
from ..errors import ContractViolation
from ...data.checkpoint import load_checkpoint, restore_rng, rng_state, save_checkpoint
from ...data.models import EpisodeMetrics, SlotInfo, TrainConfig, WorldConfig
from ...data.storage import RunStorage

logger = logging.getLogger(__name__)


def episode_seed(base_seed: int, episode: int) -> int:
    """由基础种子与回合号派生环境种子，与运行历史无关"""
    return int(np.random.SeedSequence([base_seed, episode]).generate_state(1)[0])


def summarize_episode(episode: int, slots: List[SlotInfo]) -> EpisodeMetrics:
    """把一个回合内各时隙的统计汇总成一行指标"""
    communicating = sum(s.communicating_slices for s in slots)
    covert = sum(s.covert_slices for s in slots)
    kl_weighted = sum(s.mean_kl * s.communicating_slices for s in slots)
    return EpisodeMetrics(
        episode=episode,
        high_reward_avg=float(np.mean([s.high_reward for s in slots])),
        low_reward_avg=float(np.mean([s.avg_low_reward for s in slots])),
        coverage=float(np.mean([s.coverage for s in slots])),
        task_delay=float(np.mean([s.task_delay for s in slots])),
        efficiency=float(np.mean([s.efficiency for s in slots])),
        covert_fraction=covert / communicating if communicating else 1.0,
        completion_ratio=float(np.mean([s.completion_ratio for s in slots])),
        mean_kl=kl_weighted / communicating if communicating else 0.0,
    )


class HMappoTrainer:
    """训练器：持有环境、模型、两个缓冲区与随机数发生器"""

    def __init__(self, world: WorldConfig, train: TrainConfig,
                 storage: Optional[RunStorage] = None):
        train.validate()
        self.train_cfg = train
        self.world = replace(world, high_horizon=train.high_steps, low_horizon=train.low_steps)
        self.env = CovertMissionEnv(self.world)
        self.storage = storage

        init_rng = np.random.default_rng([train.seed, 0])
        self.rng = np.random.default_rng([train.seed, 1])
        space = self.env.low_action_space
        self.model = HMappoModel(self.env.n, self.env.state_dim, self.env.obs_dim,
                                 space.low, space.high, train, init_rng)
        self.buffer_auv = RolloutBuffer()
        self.buffer_central = RolloutBuffer()

        self.episode = 0
        self.low_updates = 0
        self.high_updates = 0
        self.low_transitions = 0
        self.high_transitions = 0
        self.history: List[EpisodeMetrics] = []

    # ==================== 主循环 ====================

    def run_episode(self) -> EpisodeMetrics:
        """按算法流程执行一个回合并在需要时更新"""
        cfg = self.train_cfg
        env = self.env
        model = self.model
        state = env.reset(seed=episode_seed(cfg.seed, self.episode))
        slots: List[SlotInfo] = []

        for _ in range(cfg.high_steps):
            bits, logp_c = model.central_actor.sample(state[None, :], self.rng)
            bits = bits[0]
            obs = env.begin_slot(bits)

            done = False
            while not done:
                global_obs = env.global_observation(obs)
                actions: Dict[int, np.ndarray] = {}
                behaviour = {}
                for i in sorted(obs):
                    u, action, logp = model.actor_for(i).sample(obs[i][None, :], self.rng)
                    actions[i] = action[0]
                    behaviour[i] = (u[0], float(logp[0]))
                next_obs, rewards, done, _ = env.low_step(actions)
                next_global = env.global_observation(next_obs)
                for i in sorted(obs):
                    u, logp = behaviour[i]
                    self.buffer_auv.add(i, Transition(
                        obs=obs[i],
                        critic_obs=model.critic_input(global_obs, i),
                        action=u,
                        log_prob=logp,
                        reward=rewards[i],
                        done=done,      # 时隙截断也视为终止，回报不跨时隙
                        next_critic_obs=model.critic_input(next_global, i),
                        agent=i,
                    ))
                    self.low_transitions += 1
                obs = next_obs
            self.buffer_auv.close_all()

            next_state, high_reward, info = env.end_slot()
            self.buffer_central.add('central', Transition(
                obs=state,
                critic_obs=state,
                action=bits,
                log_prob=float(logp_c[0]),
                reward=high_reward,
                done=info.episode_done,
                next_critic_obs=next_state,
            ))
            self.high_transitions += 1
            if info.episode_done:
                self.buffer_central.close_all()
            slots.append(info)

            if len(self.buffer_auv) >= cfg.batch_auv:
                mappo_update(model, self.buffer_auv, cfg, self.rng)
                self.low_updates += 1
            if len(self.buffer_central) >= cfg.batch_central:
                central_update(model, self.buffer_central, cfg, self.rng)
                self.high_updates += 1
            state = next_state

        metrics = summarize_episode(self.episode, slots)
        self.history.append(metrics)
        if self.storage:
            self.storage.append_metrics(metrics)
        self.episode += 1
        return metrics

    def train(self, episodes: Optional[int] = None,
              callback: Optional[Callable[[EpisodeMetrics], None]] = None) -> List[EpisodeMetrics]:
        """
        训练到第 episodes 个回合（含已完成的回合）

        Args:
            episodes: 目标回合总数，缺省取 TrainConfig.episodes
            callback: 每个回合结束后调用

        Returns:
            本次调用产生的指标
        """
        target = self.train_cfg.episodes if episodes is None else episodes
        every = self.train_cfg.checkpoint_every
        produced = []
        while self.episode < target:
            metrics = self.run_episode()
            produced.append(metrics)
            if callback:
                callback(metrics)
            if metrics.episode % 10 == 0 or self.episode == target:
                logger.info(
                    "回合 %d/%d 高层奖励 %.3f 低层奖励 %.3f 覆盖率 %.3f 效率 %.5f 隐蔽比例 %.3f",
                    self.episode, target, metrics.high_reward_avg, metrics.low_reward_avg,
                    metrics.coverage, metrics.efficiency, metrics.covert_fraction,
                )
            if self.storage and every and self.episode % every == 0:
                self.save(self.storage.checkpoint_path(self.episode))
        if self.storage and (not every or self.episode % every):
            self.save(self.storage.checkpoint_path(self.episode))
        return produced

    # ==================== 检查点 ====================

    def state_dict(self) -> Dict[str, np.ndarray]:
        state = self.model.state_dict()
        state.update(self.buffer_auv.state_dict("buffer_auv"))
        state.update(self.buffer_central.state_dict("buffer_central"))
        return state

    def meta(self) -> Dict:
        return {
            'episode': self.episode,
            'low_updates': self.low_updates,
            'high_updates': self.high_updates,
            'low_transitions': self.low_transitions,
            'high_transitions': self.high_transitions,
            'rng': rng_state(self.rng),
            'train_seed': self.train_cfg.seed,
            'share_actor': self.train_cfg.share_actor,
        }

    def save(self, path) -> None:
        """保存检查点，同时刷新 latest.npz"""
        written = save_checkpoint(path, self.state_dict(), self.meta())
        if self.storage:
            save_checkpoint(self.storage.latest_checkpoint, self.state_dict(), self.meta())
        logger.info("已保存检查点 %s（回合 %d）", written, self.episode)

    def load(self, path) -> None:
        """从检查点恢复全部状态，续训结果与不中断训练逐位一致"""
        arrays, meta = load_checkpoint(path)
        if meta.get('share_actor') != self.train_cfg.share_actor:
            raise ContractViolation("检查点的执行者共享设置与当前配置不一致")
        self.model.load_state_dict(arrays)
        self.buffer_auv.load_state_dict(arrays, "buffer_auv")
        self.buffer_central.load_state_dict(arrays, "buffer_central")
        self.episode = int(meta['episode'])
        self.low_updates = int(meta['low_updates'])
        self.high_updates = int(meta['high_updates'])
        self.low_transitions = int(meta['low_transitions'])
        self.high_transitions = int(meta['high_transitions'])
        self.rng = restore_rng(meta['rng'])
        logger.info("已从 %s 恢复，下一回合 %d", path, self.episode)


def train(world: WorldConfig, train_cfg: TrainConfig,
          storage: Optional[RunStorage] = None) -> HMappoTrainer:
    """按 TrainConfig 训练一个新模型并返回训练器（含模型与指标历史）"""
    trainer = HMappoTrainer(world, train_cfg, storage)
    trainer.train()
    return trainer
