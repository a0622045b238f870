# -*- coding: utf-8 -*-
"""PPO：GAE 优势估计与裁剪代理目标更新"""

from dataclasses import dataclass, asdict
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .buffer import RolloutBuffer
from .neural import Adam, ValueNet, clip_grad_norm
from ..errors import ContractViolation, DomainError
from ...data.models import TrainConfig


@dataclass
class UpdateStats:
    """一次更新的统计量（对所有 minibatch 取平均）"""
    policy_loss: float = 0.0
    value_loss: float = 0.0
    entropy: float = 0.0
    clip_fraction: float = 0.0
    approx_kl: float = 0.0
    grad_norm: float = 0.0
    samples: int = 0

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


@dataclass
class Batch:
    """展平后的训练批"""
    obs: np.ndarray
    critic_obs: np.ndarray
    actions: np.ndarray
    old_log_probs: np.ndarray
    advantages: np.ndarray
    returns: np.ndarray
    agents: np.ndarray

    def __len__(self) -> int:
        return self.obs.shape[0]

    def subset(self, mask: np.ndarray) -> 'Batch':
        return Batch(self.obs[mask], self.critic_obs[mask], self.actions[mask],
                     self.old_log_probs[mask], self.advantages[mask], self.returns[mask],
                     self.agents[mask])


def compute_gae(
    rewards: Sequence[float],
    values: Sequence[float],
    dones: Sequence[bool],
    last_value: float,
    gamma: float,
    lam: float
) -> Tuple[np.ndarray, np.ndarray]:
    """
    广义优势估计

    Args:
        rewards: 每步奖励
        values: 每步状态价值 V(s_t)
        dones: 每步之后是否终止
        last_value: 最后一步之后的自举价值（终止时忽略）

    Returns:
        (advantages, returns)，returns = advantages + values
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones, dtype=np.float64)
    if not (rewards.shape == values.shape == dones.shape):
        raise DomainError("rewards / values / dones 长度不一致")
    T = rewards.shape[0]
    adv = np.zeros(T)
    gae = 0.0
    for t in reversed(range(T)):
        next_value = last_value if t == T - 1 else values[t + 1]
        nonterminal = 1.0 - dones[t]
        delta = rewards[t] + gamma * next_value * nonterminal - values[t]
        gae = delta + gamma * lam * nonterminal * gae
        adv[t] = gae
    return adv, adv + values


def build_batch(buffer: RolloutBuffer, critic: ValueNet, gamma: float, lam: float,
                normalize: bool = True) -> Batch:
    """逐条轨迹计算 GAE 并展平；未终止的轨迹用 V(next) 自举"""
    obs, crit, acts, logps, advs, rets, agents = [], [], [], [], [], [], []
    for seg in buffer.segments():
        crit_obs = np.stack([t.critic_obs for t in seg])
        values = critic(crit_obs)
        last = seg[-1]
        last_value = 0.0 if last.done else float(critic(last.next_critic_obs[None, :])[0])
        adv, ret = compute_gae([t.reward for t in seg], values, [t.done for t in seg],
                               last_value, gamma, lam)
        obs.append(np.stack([t.obs for t in seg]))
        crit.append(crit_obs)
        acts.append(np.stack([np.asarray(t.action, dtype=np.float64) for t in seg]))
        logps.append(np.array([t.log_prob for t in seg]))
        agents.append(np.array([t.agent for t in seg], dtype=np.int64))
        advs.append(adv)
        rets.append(ret)
    advantages = np.concatenate(advs)
    if normalize and advantages.shape[0] > 1:
        advantages = (advantages - advantages.mean()) / (advantages.std() + 1e-8)
    return Batch(np.concatenate(obs), np.concatenate(crit), np.concatenate(acts),
                 np.concatenate(logps), advantages, np.concatenate(rets), np.concatenate(agents))


def _minibatches(n: int, size: int, rng: np.random.Generator) -> List[np.ndarray]:
    perm = rng.permutation(n)
    return [perm[i:i + size] for i in range(0, n, size)]


def policy_step(policy, optimizer: Adam, batch: Batch, cfg: TrainConfig,
                rng: np.random.Generator) -> UpdateStats:
    """
    裁剪代理目标 L = −E[min(r·A, clip(r, 1±ε)·A)] − c_ent·H

    policy 需提供 params / evaluate / backward（GaussianPolicy 或 BernoulliPolicy）。
    """
    stats = UpdateStats(samples=len(batch))
    rounds = 0
    for _ in range(cfg.epochs):
        for idx in _minibatches(len(batch), cfg.minibatch_size, rng):
            adv = batch.advantages[idx]
            logp, entropy, state = policy.evaluate(batch.obs[idx], batch.actions[idx])
            ratio = np.exp(logp - batch.old_log_probs[idx])
            surr1 = ratio * adv
            surr2 = np.clip(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps) * adv
            unclipped = surr1 <= surr2
            loss = -float(np.mean(np.minimum(surr1, surr2))) - cfg.entropy_coef * entropy
            # 被裁剪的样本对参数没有梯度
            g_logp = -(unclipped * adv * ratio) / len(idx)
            grads = policy.backward(state, g_logp, -cfg.entropy_coef)
            norm = clip_grad_norm(grads, cfg.max_grad_norm)
            optimizer.step(policy.params, grads)

            rounds += 1
            stats.policy_loss += loss
            stats.entropy += entropy
            stats.clip_fraction += float(np.mean(np.abs(ratio - 1.0) > cfg.clip_eps))
            stats.approx_kl += float(np.mean(batch.old_log_probs[idx] - logp))
            stats.grad_norm += norm
    if rounds:
        stats.policy_loss /= rounds
        stats.entropy /= rounds
        stats.clip_fraction /= rounds
        stats.approx_kl /= rounds
        stats.grad_norm /= rounds
    return stats


def value_step(critic: ValueNet, optimizer: Adam, batch: Batch, cfg: TrainConfig,
               rng: np.random.Generator) -> float:
    """均方误差回归回报，返回平均损失"""
    total = 0.0
    rounds = 0
    for _ in range(cfg.epochs):
        for idx in _minibatches(len(batch), cfg.minibatch_size, rng):
            loss, grads = critic.loss_and_grads(batch.critic_obs[idx], batch.returns[idx])
            clip_grad_norm(grads, cfg.max_grad_norm)
            optimizer.step(critic.params, grads)
            total += loss
            rounds += 1
    return total / rounds if rounds else 0.0


def ppo_update(
    policy,
    critic: ValueNet,
    actor_opt: Adam,
    critic_opt: Adam,
    buffer: RolloutBuffer,
    cfg: TrainConfig,
    rng: np.random.Generator,
    batch: Optional[Batch] = None
) -> UpdateStats:
    """
    单执行者 PPO 更新，完成后清空缓冲区

    Returns:
        更新统计

    Raises:
        ContractViolation: 缓冲区为空
    """
    if batch is None:
        if len(buffer) == 0:
            raise ContractViolation("缓冲区为空，无法更新")
        batch = build_batch(buffer, critic, cfg.gamma, cfg.gae_lambda)
    stats = policy_step(policy, actor_opt, batch, cfg, rng)
    stats.value_loss = value_step(critic, critic_opt, batch, cfg, rng)
    buffer.clear()
    return stats
