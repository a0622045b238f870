# -*- coding: utf-8 -*-
"""分层 MAPPO 模型与多智能体更新

高层：中心执行者（伯努利头）+ 中心评价者 V_c(S_global)。
低层：AUV 执行者（高斯头，默认共享参数）+ 集中式评价者 V(O_global, 智能体编号)。
执行时只用执行者；评价者只在训练中使用。
"""

import logging
from typing import Dict, List, Sequence

import numpy as np

from .buffer import RolloutBuffer
from .neural import Adam, BernoulliPolicy, GaussianPolicy, ValueNet
from .ppo import UpdateStats, build_batch, policy_step, value_step, ppo_update
from ..errors import ContractViolation
from ...data.models import TrainConfig

logger = logging.getLogger(__name__)


class HMappoModel:
    """两层全部网络与优化器的容器"""

    def __init__(self, n: int, state_dim: int, obs_dim: int, act_low: Sequence[float],
                 act_high: Sequence[float], cfg: TrainConfig, rng: np.random.Generator):
        self.n = n
        self.state_dim = state_dim
        self.obs_dim = obs_dim
        self.share_actor = cfg.share_actor
        hidden = cfg.hidden

        self.central_actor = BernoulliPolicy(state_dim, n, hidden, rng, require_any=True)
        self.central_critic = ValueNet(state_dim, hidden, rng)
        n_actors = 1 if cfg.share_actor else n
        self.actors: List[GaussianPolicy] = [
            GaussianPolicy(obs_dim, act_low, act_high, hidden, rng) for _ in range(n_actors)
        ]
        self.critic = ValueNet(self.critic_dim, hidden, rng)

        self.central_actor_opt = Adam(self.central_actor.params, cfg.lr_actor)
        self.central_critic_opt = Adam(self.central_critic.params, cfg.lr_critic)
        self.actor_opts = [Adam(a.params, cfg.lr_actor) for a in self.actors]
        self.critic_opt = Adam(self.critic.params, cfg.lr_critic)

    @property
    def critic_dim(self) -> int:
        return self.n * self.obs_dim + self.n

    def actor_for(self, agent: int) -> GaussianPolicy:
        return self.actors[0 if self.share_actor else agent]

    def critic_input(self, global_obs: np.ndarray, agent: int) -> np.ndarray:
        """O_global 拼接智能体 one-hot 编号"""
        one_hot = np.zeros(self.n)
        one_hot[agent] = 1.0
        return np.concatenate([global_obs, one_hot])

    # ==================== 序列化 ====================

    def state_dict(self) -> Dict[str, np.ndarray]:
        state: Dict[str, np.ndarray] = {}
        state.update(self.central_actor.state_dict("central_actor"))
        state.update(self.central_critic.state_dict("central_critic"))
        state.update(self.critic.state_dict("critic"))
        state.update(self.central_actor_opt.state_dict("opt.central_actor"))
        state.update(self.central_critic_opt.state_dict("opt.central_critic"))
        state.update(self.critic_opt.state_dict("opt.critic"))
        for i, (actor, opt) in enumerate(zip(self.actors, self.actor_opts)):
            state.update(actor.state_dict(f"actor{i}"))
            state.update(opt.state_dict(f"opt.actor{i}"))
        return state

    def load_state_dict(self, state: Dict[str, np.ndarray]):
        self.central_actor.load_state_dict(state, "central_actor")
        self.central_critic.load_state_dict(state, "central_critic")
        self.critic.load_state_dict(state, "critic")
        self.central_actor_opt.load_state_dict(state, "opt.central_actor")
        self.central_critic_opt.load_state_dict(state, "opt.central_critic")
        self.critic_opt.load_state_dict(state, "opt.critic")
        for i, (actor, opt) in enumerate(zip(self.actors, self.actor_opts)):
            actor.load_state_dict(state, f"actor{i}")
            opt.load_state_dict(state, f"opt.actor{i}")


def mappo_update(model: HMappoModel, buffer: RolloutBuffer, cfg: TrainConfig,
                 rng: np.random.Generator) -> UpdateStats:
    """
    低层更新：集中式评价者计算优势，执行者按智能体分组（共享时合并）更新

    完成后清空缓冲区。
    """
    if len(buffer) == 0:
        raise ContractViolation("B_AUV 为空，无法更新")
    if any(t.critic_obs is None for seg in buffer.segments() for t in seg):
        raise ContractViolation("低层转移缺少 O_global")
    batch = build_batch(buffer, model.critic, cfg.gamma, cfg.gae_lambda)
    if model.share_actor:
        stats = policy_step(model.actors[0], model.actor_opts[0], batch, cfg, rng)
    else:
        stats = UpdateStats(samples=len(batch))
        groups = 0
        for i in range(model.n):
            mask = batch.agents == i
            if not np.any(mask):
                continue
            part = policy_step(model.actors[i], model.actor_opts[i], batch.subset(mask), cfg, rng)
            stats.policy_loss += part.policy_loss
            stats.entropy += part.entropy
            stats.clip_fraction += part.clip_fraction
            stats.approx_kl += part.approx_kl
            stats.grad_norm += part.grad_norm
            groups += 1
        if groups:
            stats.policy_loss /= groups
            stats.entropy /= groups
            stats.clip_fraction /= groups
            stats.approx_kl /= groups
            stats.grad_norm /= groups
    stats.value_loss = value_step(model.critic, model.critic_opt, batch, cfg, rng)
    buffer.clear()
    logger.debug("低层更新 样本=%d 策略损失=%.4f 价值损失=%.4f",
                 stats.samples, stats.policy_loss, stats.value_loss)
    return stats


def central_update(model: HMappoModel, buffer: RolloutBuffer, cfg: TrainConfig,
                   rng: np.random.Generator) -> UpdateStats:
    """高层更新：中心执行者与 V_c 的标准 PPO"""
    stats = ppo_update(model.central_actor, model.central_critic, model.central_actor_opt,
                       model.central_critic_opt, buffer, cfg, rng)
    logger.debug("高层更新 样本=%d 策略损失=%.4f 价值损失=%.4f",
                 stats.samples, stats.policy_loss, stats.value_loss)
    return stats
