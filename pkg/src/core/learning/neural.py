# -*- coding: utf-8 -*-
"""纯 numpy 的小型神经网络：多层感知机、Adam 优化器与两种策略分布头

前向与反向都按批处理，输入形状 (batch, features)。
"""

import math
from typing import List, Sequence, Tuple, Dict, Optional

import numpy as np
from scipy.special import expit, log_expit

from ..errors import ContractViolation, DomainError

# 高斯头标准差下限
MIN_STD = 1e-3
LOG_2PI = math.log(2.0 * math.pi)


class Mlp:
    """tanh 隐藏层 + 线性输出层"""

    def __init__(self, sizes: Sequence[int], rng: np.random.Generator, out_scale: float = 1.0):
        """
        Args:
            sizes: [输入维度, 隐藏层..., 输出维度]
            rng: 初始化用随机数发生器
            out_scale: 输出层权重缩放，策略均值头取较小值
        """
        if len(sizes) < 2 or any(s < 1 for s in sizes):
            raise DomainError(f"网络层宽度非法: {sizes}")
        self.sizes = tuple(int(s) for s in sizes)
        self.params: List[np.ndarray] = []
        n_layers = len(sizes) - 1
        for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            limit = math.sqrt(6.0 / (fan_in + fan_out))
            W = rng.uniform(-limit, limit, size=(fan_in, fan_out))
            if i == n_layers - 1:
                W *= out_scale
            self.params.append(W)
            self.params.append(np.zeros(fan_out))

    @property
    def n_layers(self) -> int:
        return len(self.params) // 2

    def forward(self, x) -> Tuple[np.ndarray, List[np.ndarray]]:
        """
        前向传播

        Returns:
            (输出, 反向传播用的各层输入缓存)
        """
        h = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if h.shape[1] != self.sizes[0]:
            raise DomainError(f"输入维度 {h.shape[1]} 与网络输入宽度 {self.sizes[0]} 不一致")
        cache = []
        for i in range(self.n_layers):
            W, b = self.params[2 * i], self.params[2 * i + 1]
            cache.append(h)
            h = h @ W + b
            if i < self.n_layers - 1:
                h = np.tanh(h)
        return h, cache

    def __call__(self, x) -> np.ndarray:
        return self.forward(x)[0]

    def backward(self, cache: List[np.ndarray], grad_out: np.ndarray,
                 return_input: bool = False):
        """
        由输出梯度计算参数梯度，顺序与 params 一致

        Args:
            cache: 同一网络 forward 返回的缓存
            grad_out: dL/dy，形状 (batch, 输出维度)
            return_input: 是否同时返回 dL/dx

        Returns:
            参数梯度列表；return_input 时为 (参数梯度列表, dL/dx)
        """
        if len(cache) != self.n_layers or any(
                c.shape[1] != self.params[2 * i].shape[0] for i, c in enumerate(cache)):
            raise ContractViolation("缓存与网络结构不匹配")
        g = np.atleast_2d(np.asarray(grad_out, dtype=np.float64))
        grads: List[Optional[np.ndarray]] = [None] * len(self.params)
        grad_in = None
        for i in reversed(range(self.n_layers)):
            h_in = cache[i]
            W = self.params[2 * i]
            grads[2 * i] = h_in.T @ g
            grads[2 * i + 1] = g.sum(axis=0)
            g_prev = g @ W.T
            if i > 0:
                g = g_prev * (1.0 - h_in * h_in)
            else:
                grad_in = g_prev
        return (grads, grad_in) if return_input else grads

    def state_dict(self, prefix: str) -> Dict[str, np.ndarray]:
        return {f"{prefix}.p{i}": p.copy() for i, p in enumerate(self.params)}

    def load_state_dict(self, state: Dict[str, np.ndarray], prefix: str):
        for i in range(len(self.params)):
            arr = np.asarray(state[f"{prefix}.p{i}"], dtype=np.float64)
            if arr.shape != self.params[i].shape:
                raise DomainError(f"{prefix}.p{i} 形状不匹配: {arr.shape} != {self.params[i].shape}")
            self.params[i] = arr.copy()


# ==================== 优化器 ====================

class Adam:
    """Adam 优化器，原地更新参数列表"""

    def __init__(self, params: List[np.ndarray], lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params: List[np.ndarray], grads: List[np.ndarray]):
        if len(params) != len(self.m) or any(
                p.shape != g.shape or p.shape != m.shape
                for p, g, m in zip(params, grads, self.m)):
            raise DomainError("参数、梯度与优化器状态的形状不一致")
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def state_dict(self, prefix: str) -> Dict[str, np.ndarray]:
        state = {f"{prefix}.t": np.array(self.t)}
        for i, (m, v) in enumerate(zip(self.m, self.v)):
            state[f"{prefix}.m{i}"] = m.copy()
            state[f"{prefix}.v{i}"] = v.copy()
        return state

    def load_state_dict(self, state: Dict[str, np.ndarray], prefix: str):
        self.t = int(state[f"{prefix}.t"])
        self.m = [np.asarray(state[f"{prefix}.m{i}"], dtype=np.float64).copy()
                  for i in range(len(self.m))]
        self.v = [np.asarray(state[f"{prefix}.v{i}"], dtype=np.float64).copy()
                  for i in range(len(self.v))]


def clip_grad_norm(grads: List[np.ndarray], max_norm: float) -> float:
    """按全局 L2 范数原地裁剪梯度，返回裁剪前的范数"""
    total = math.sqrt(sum(float(np.sum(g * g)) for g in grads))
    if total > max_norm > 0:
        scale = max_norm / (total + 1e-12)
        for g in grads:
            g *= scale
    return total


# ==================== 策略分布头 ====================

class GaussianPolicy:
    """
    对角高斯策略，均值由网络输出，对数标准差为独立参数

    采样值 u 经 tanh 压缩并仿射映射到动作边界：a = mid + half·tanh(u)。
    log π(a) = log N(u) − Σ log(half·(1 − tanh²u))，雅可比项与参数无关，
    因此 PPO 比值只依赖高斯部分。
    """

    def __init__(self, obs_dim: int, low, high, hidden: Sequence[int],
                 rng: np.random.Generator, init_std: float = 1.0):
        """
        Args:
            init_std: 初始标准差，按压缩前坐标计；压缩前的归一化区间 [−1, 1] 宽度为 2，
                默认取其一半
        """
        self.low = np.asarray(low, dtype=np.float64)
        self.high = np.asarray(high, dtype=np.float64)
        if np.any(self.high <= self.low):
            raise DomainError("动作上界必须大于下界")
        self.act_dim = self.low.shape[0]
        self.mid = 0.5 * (self.high + self.low)
        self.half = 0.5 * (self.high - self.low)
        self.net = Mlp([obs_dim, *hidden, self.act_dim], rng, out_scale=0.01)
        self.log_std = np.full(self.act_dim, math.log(max(init_std, MIN_STD)))

    @property
    def params(self) -> List[np.ndarray]:
        return [*self.net.params, self.log_std]

    def _log_std(self) -> np.ndarray:
        return np.maximum(self.log_std, math.log(MIN_STD))

    def squash(self, u) -> np.ndarray:
        return self.mid + self.half * np.tanh(u)

    def log_jacobian(self, u) -> np.ndarray:
        """Σ log|da/du|，使用 log(1 − tanh²u) = 2(log2 − u − softplus(−2u))"""
        u = np.atleast_2d(np.asarray(u, dtype=np.float64))
        log_dtanh = 2.0 * (math.log(2.0) - u - np.logaddexp(0.0, -2.0 * u))
        return np.sum(np.log(self.half) + log_dtanh, axis=1)

    def _gaussian_log_prob(self, mean: np.ndarray, u) -> np.ndarray:
        log_std = self._log_std()
        z = (np.atleast_2d(u) - mean) / np.exp(log_std)
        return np.sum(-0.5 * z * z - log_std - 0.5 * LOG_2PI, axis=1)

    def sample(self, obs, rng: np.random.Generator, deterministic: bool = False):
        """
        采样动作；deterministic 时取均值（评估用）

        Returns:
            (u, 压缩后的动作, log π(a))，批维度与 obs 一致
        """
        mean = self.net(obs)
        if deterministic:
            u = mean
        else:
            u = mean + np.exp(self._log_std()) * rng.standard_normal(mean.shape)
        return u, self.squash(u), self._gaussian_log_prob(mean, u) - self.log_jacobian(u)

    def log_prob(self, obs, u) -> np.ndarray:
        """压缩后动作的对数概率，以压缩前的 u 表示"""
        return self._gaussian_log_prob(self.net(obs), u) - self.log_jacobian(u)

    def entropy(self) -> float:
        """压缩前高斯分布的熵"""
        return float(np.sum(self._log_std() + 0.5 * (LOG_2PI + 1.0)))

    def evaluate(self, obs, u):
        """返回 (log π, 熵, 缓存)"""
        mean, cache = self.net.forward(obs)
        log_std = self._log_std()
        std = np.exp(log_std)
        diff = np.atleast_2d(u) - mean
        logp = self._gaussian_log_prob(mean, u) - self.log_jacobian(u)
        return logp, self.entropy(), (cache, diff, std)

    def backward(self, state, g_logp: np.ndarray, g_entropy: float) -> List[np.ndarray]:
        """
        Args:
            state: evaluate 返回的缓存
            g_logp: 损失对每个样本 log π 的梯度 (batch,)
            g_entropy: 损失对熵的梯度
        """
        cache, diff, std = state
        g = np.asarray(g_logp, dtype=np.float64)[:, None]
        grad_mean = g * diff / (std * std)
        net_grads = self.net.backward(cache, grad_mean)
        grad_log_std = np.sum(g * ((diff / std) ** 2 - 1.0), axis=0) + g_entropy
        # 下限处的对数标准差不再回传梯度
        grad_log_std = np.where(self.log_std > math.log(MIN_STD), grad_log_std, 0.0)
        return [*net_grads, grad_log_std]

    def state_dict(self, prefix: str) -> Dict[str, np.ndarray]:
        state = self.net.state_dict(f"{prefix}.net")
        state[f"{prefix}.log_std"] = self.log_std.copy()
        return state

    def load_state_dict(self, state: Dict[str, np.ndarray], prefix: str):
        self.net.load_state_dict(state, f"{prefix}.net")
        self.log_std = np.asarray(state[f"{prefix}.log_std"], dtype=np.float64).copy()


class BernoulliPolicy:
    """N 维独立伯努利策略，输出选择向量 G"""

    MAX_RESAMPLE = 10

    def __init__(self, obs_dim: int, n: int, hidden: Sequence[int],
                 rng: np.random.Generator, require_any: bool = True):
        self.n = n
        self.require_any = require_any
        self.net = Mlp([obs_dim, *hidden, n], rng, out_scale=0.01)

    @property
    def params(self) -> List[np.ndarray]:
        return self.net.params

    def probs(self, obs) -> np.ndarray:
        return expit(self.net(obs))

    def sample(self, obs, rng: np.random.Generator, deterministic: bool = False):
        """
        采样选择向量；require_any 时全零样本重采样，仍为全零则强制置位概率最大的一位

        Returns:
            (bits, log π(bits))
        """
        logits = self.net(obs)
        p = expit(logits)
        if deterministic:
            bits = (p >= 0.5).astype(np.int64)
        else:
            bits = (rng.random(p.shape) < p).astype(np.int64)
        if self.require_any:
            for row in range(bits.shape[0]):
                tries = 0
                while not bits[row].any() and tries < self.MAX_RESAMPLE and not deterministic:
                    bits[row] = (rng.random(self.n) < p[row]).astype(np.int64)
                    tries += 1
                if not bits[row].any():
                    bits[row, int(np.argmax(p[row]))] = 1
        return bits, self._log_prob_from_logits(logits, bits)

    @staticmethod
    def _log_prob_from_logits(logits: np.ndarray, bits: np.ndarray) -> np.ndarray:
        b = np.atleast_2d(bits).astype(np.float64)
        return np.sum(b * log_expit(logits) + (1.0 - b) * log_expit(-logits), axis=1)

    def log_prob(self, obs, bits) -> np.ndarray:
        return self._log_prob_from_logits(self.net(obs), bits)

    def evaluate(self, obs, bits):
        """返回 (log π(bits), 平均熵, 缓存)"""
        logits, cache = self.net.forward(obs)
        p = expit(logits)
        b = np.atleast_2d(bits).astype(np.float64)
        logp = self._log_prob_from_logits(logits, b)
        ent_each = -(p * log_expit(logits) + (1.0 - p) * log_expit(-logits))
        entropy = float(np.mean(np.sum(ent_each, axis=1)))
        return logp, entropy, (cache, logits, p, b)

    def backward(self, state, g_logp: np.ndarray, g_entropy: float) -> List[np.ndarray]:
        cache, logits, p, b = state
        g = np.asarray(g_logp, dtype=np.float64)[:, None]
        grad_logits = g * (b - p)
        # d(平均熵)/d logit = −logit·p(1−p)/batch
        grad_logits += g_entropy * (-logits * p * (1.0 - p)) / logits.shape[0]
        return self.net.backward(cache, grad_logits)

    def state_dict(self, prefix: str) -> Dict[str, np.ndarray]:
        return self.net.state_dict(f"{prefix}.net")

    def load_state_dict(self, state: Dict[str, np.ndarray], prefix: str):
        self.net.load_state_dict(state, f"{prefix}.net")


class ValueNet:
    """状态价值网络 V(s)"""

    def __init__(self, obs_dim: int, hidden: Sequence[int], rng: np.random.Generator):
        self.net = Mlp([obs_dim, *hidden, 1], rng)

    @property
    def params(self) -> List[np.ndarray]:
        return self.net.params

    def __call__(self, obs) -> np.ndarray:
        return self.net(obs)[:, 0]

    def loss_and_grads(self, obs, returns) -> Tuple[float, List[np.ndarray]]:
        """均方误差 ½·mean((V − R)²) 及其参数梯度"""
        out, cache = self.net.forward(obs)
        err = out[:, 0] - np.asarray(returns, dtype=np.float64)
        loss = 0.5 * float(np.mean(err * err))
        grads = self.net.backward(cache, (err / err.shape[0])[:, None])
        return loss, grads

    def state_dict(self, prefix: str) -> Dict[str, np.ndarray]:
        return self.net.state_dict(f"{prefix}.net")

    def load_state_dict(self, state: Dict[str, np.ndarray], prefix: str):
        self.net.load_state_dict(state, f"{prefix}.net")
