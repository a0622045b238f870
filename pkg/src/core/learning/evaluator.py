# -*- coding: utf-8 -*-
"""策略评估

所有执行策略走同一条评估流程，环境种子只由 (seed, 回合号) 决定，
因此不同策略之间是配对比较。
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .policies import ExecutionPolicy
from .trainer import summarize_episode
from ..envsim import CovertMissionEnv
from ...data.models import EpisodeMetrics, SlotInfo, WorldConfig
from ...utils.helpers import mean_std

logger = logging.getLogger(__name__)

EVAL_FIELDS = ('coverage', 'task_delay', 'efficiency', 'covert_fraction', 'completion_ratio',
               'mean_kl', 'high_reward_avg', 'low_reward_avg')
EVAL_HEADER = ['episode', *EVAL_FIELDS]


def evaluation_seed(seed: int, episode: int) -> int:
    """评估用环境种子，与训练回合种子错开"""
    return int(np.random.SeedSequence([seed, episode, 1]).generate_state(1)[0])


@dataclass
class EvalSummary:
    """评估汇总：每个指标的均值与标准差"""
    policy: str
    episodes: int
    seed: int
    empty: bool
    stats: Dict[str, Dict[str, float]] = field(default_factory=dict)

    def mean(self, name: str) -> float:
        return self.stats[name]['mean']

    def std(self, name: str) -> float:
        return self.stats[name]['std']

    def to_dict(self) -> Dict[str, Any]:
        return {
            'policy': self.policy,
            'episodes': self.episodes,
            'seed': self.seed,
            'empty': self.empty,
            'stats': self.stats,
        }


def run_episode(env: CovertMissionEnv, policy: ExecutionPolicy, rng: np.random.Generator,
                seed: int) -> List[SlotInfo]:
    """用执行策略跑一个完整回合，返回各时隙统计"""
    state = env.reset(seed=seed)
    slots = []
    while not env.episode_done:
        obs = env.begin_slot(policy.select(state, rng))
        done = False
        while not done:
            actions = {i: policy.act(i, obs[i], rng) for i in sorted(obs)}
            obs, _, done, _ = env.low_step(actions)
        state, _, info = env.end_slot()
        slots.append(info)
    return slots


def evaluate(
    policy: ExecutionPolicy,
    world: WorldConfig,
    episodes: int,
    seed: int,
    trace_path: Optional[Path] = None
) -> Tuple[EvalSummary, List[EpisodeMetrics]]:
    """
    评估一个执行策略

    Args:
        policy: 执行策略
        world: 世界配置（使用其中的高/低层时域）
        episodes: 评估回合数，0 时返回 empty=True 的空汇总
        seed: 评估种子
        trace_path: 若给出，导出第一个回合的逐时间片轨迹

    Returns:
        (汇总, 每回合指标)
    """
    env = CovertMissionEnv(world)
    rng = np.random.default_rng([seed, 2])
    rows: List[EpisodeMetrics] = []
    for ep in range(episodes):
        env.record_trace = trace_path is not None and ep == 0
        slots = run_episode(env, policy, rng, evaluation_seed(seed, ep))
        if env.record_trace:
            env.export_trace(trace_path)
        rows.append(summarize_episode(ep, slots))

    summary = EvalSummary(policy=policy.name, episodes=episodes, seed=seed, empty=not rows)
    for name in EVAL_FIELDS:
        stat = mean_std([getattr(m, name) for m in rows])
        if stat is not None:
            summary.stats[name] = stat
    if rows:
        logger.info("评估 %s：%d 回合 效率 %.5f±%.5f 隐蔽比例 %.3f 完成率 %.3f",
                    policy.name, episodes, summary.mean('efficiency'), summary.std('efficiency'),
                    summary.mean('covert_fraction'), summary.mean('completion_ratio'))
    else:
        logger.warning("评估 %s：回合数为 0，返回空汇总", policy.name)
    return summary, rows


def episode_rows(rows: List[EpisodeMetrics]) -> List[List[Any]]:
    return [[m.episode, *(getattr(m, name) for name in EVAL_FIELDS)] for m in rows]
