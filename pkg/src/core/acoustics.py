# -*- coding: utf-8 -*-
"""水声信道模型：路径损耗、环境噪声、窃听者信噪比、链路速率与 KL 隐蔽性判据

所有函数都是纯函数，可在任意线程中并发调用。
距离统一使用米，频率使用 kHz，功率使用瓦特。
"""

import math
from dataclasses import dataclass, asdict
from typing import Dict, Any, Sequence, Union

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, require

ArrayLike = Union[float, Sequence[float], np.ndarray]


@dataclass(frozen=True)
class AcousticParams:
    """信道参数"""
    f: float = 30.0             # 载波频率 (kHz)
    k: float = 1.5              # 扩展因子
    B: float = 10e6             # 带宽 (Hz)
    s: float = 0.5              # 航运活动因子 0~1
    w: float = 0.0              # 风速 (m/s)
    noise_scale: float = 1.0    # 噪声标定常数，把 dB re μPa²/Hz 折算到与瓦特一致的归一化单位

    def validate(self):
        """检查参数不变量"""
        require(self.f > 0, "载波频率必须为正", "acoustics.f")
        require(1.0 <= self.k <= 2.0, "扩展因子必须在 [1, 2] 内", "acoustics.k")
        require(self.B > 0, "带宽必须为正", "acoustics.B")
        require(0.0 <= self.s <= 1.0, "航运活动因子必须在 [0, 1] 内", "acoustics.s")
        require(self.w >= 0, "风速不能为负", "acoustics.w")
        require(self.noise_scale > 0, "噪声标定常数必须为正", "acoustics.noise_scale")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'AcousticParams':
        return cls(**data)


@dataclass(frozen=True)
class CovertnessParams:
    """隐蔽性参数，预算为 2·ε_c²"""
    epsilon_c: float = 0.05

    def validate(self):
        require(self.epsilon_c > 0, "隐蔽性参数 ε_c 必须为正", "covertness.epsilon_c")

    @property
    def budget(self) -> float:
        """KL 散度上限 2ε_c²"""
        return 2.0 * self.epsilon_c ** 2

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'CovertnessParams':
        return cls(**data)


# ==================== 传播损耗 ====================

def thorp_absorption(f: float) -> float:
    """
    Thorp 吸收系数

    Args:
        f: 频率 (kHz)

    Returns:
        吸收系数 (dB/km)
    """
    if not f > 0:
        raise DomainError(f"频率必须为正: {f}")
    f2 = f * f
    return 0.11 * f2 / (1.0 + f2) + 44.0 * f2 / (4100.0 + f2) + 2.75e-4 * f2 + 0.003


def _as_distance(d: ArrayLike) -> np.ndarray:
    arr = np.asarray(d, dtype=np.float64)
    if np.any(~(arr > 0)):
        raise DomainError(f"距离必须为正: {d}")
    return arr


def _unwrap(arr: np.ndarray, template: ArrayLike):
    return float(arr) if np.ndim(template) == 0 else arr


def path_loss(d: ArrayLike, p: AcousticParams) -> Union[float, np.ndarray]:
    """
    路径损耗 A(f,d) = d^k · 10^{α(f)·d/10}，d 与 α 都按米计

    Args:
        d: 距离 (m)，可为数组
        p: 信道参数

    Returns:
        线性衰减因子
    """
    arr = _as_distance(d)
    alpha_db_per_m = thorp_absorption(p.f) / 1000.0
    loss = arr ** p.k * 10.0 ** (alpha_db_per_m * arr / 10.0)
    return _unwrap(loss, d)


def channel_gain(d: ArrayLike, p: AcousticParams) -> Union[float, np.ndarray]:
    """信道增益 g = 1/A(f,d)，随距离严格递减"""
    arr = _as_distance(d)
    alpha_db_per_m = thorp_absorption(p.f) / 1000.0
    gain = 1.0 / (arr ** p.k * 10.0 ** (alpha_db_per_m * arr / 10.0))
    return _unwrap(gain, d)


# ==================== 环境噪声 ====================

def noise_components_db(p: AcousticParams) -> Dict[str, float]:
    """
    四种噪声源的功率谱密度 (dB)

    Returns:
        {'turbulence', 'shipping', 'wind', 'thermal'} -> dB
    """
    if not p.f > 0:
        raise DomainError(f"频率必须为正: {p.f}")
    lg_f = math.log10(p.f)
    return {
        'turbulence': 17.0 - 30.0 * lg_f,
        'shipping': 30.0 + 20.0 * p.s + 26.0 * lg_f - 60.0 * math.log10(p.f + 0.03),
        'wind': 50.0 + 7.5 * math.sqrt(p.w) + 20.0 * lg_f - 40.0 * math.log10(p.f + 0.4),
        'thermal': -15.0 + 20.0 * lg_f,
    }


def noise_psd(p: AcousticParams) -> float:
    """四种噪声在线性域求和后的功率谱密度（每 Hz，未标定）"""
    return sum(10.0 ** (db / 10.0) for db in noise_components_db(p).values())


def noise_power(p: AcousticParams) -> float:
    """带内噪声功率：平坦谱 × 带宽 × 标定常数"""
    return p.noise_scale * noise_psd(p) * p.B


# ==================== 信噪比与速率 ====================

def eavesdropper_snr(
    selection: ArrayLike,
    powers: ArrayLike,
    eav_distances: ArrayLike,
    p: AcousticParams
) -> float:
    """
    窃听者处的信噪比 γ_e = Σ G_n²·P_n·g(d_{n,e}) / N

    Args:
        selection: 选择向量 G(t)
        powers: 各 AUV 发射功率 (W)
        eav_distances: 各 AUV 到窃听者的距离 (m)
        p: 信道参数
    """
    g_vec = np.asarray(selection, dtype=np.float64)
    p_vec = np.asarray(powers, dtype=np.float64)
    d_vec = np.asarray(eav_distances, dtype=np.float64)
    if not (g_vec.shape == p_vec.shape == d_vec.shape):
        raise DomainError("selection / powers / distances 维度不一致")
    active = g_vec != 0
    if not np.any(active):
        return 0.0
    gains = channel_gain(d_vec[active], p)
    received = np.sum(g_vec[active] ** 2 * p_vec[active] * np.atleast_1d(gains))
    return float(received / noise_power(p))


def link_rate(P_n: float, d_nc: float, active_count: int, p: AcousticParams) -> float:
    """
    AUV 到中心 AUV 的正交子信道速率

    带宽在 active_count 个 AUV 间均分，子带噪声为平坦谱在子带上的积分。

    Returns:
        速率 (bits/s)
    """
    if active_count < 1:
        raise DomainError(f"活跃 AUV 数必须 ≥ 1: {active_count}")
    if P_n < 0:
        raise DomainError(f"发射功率不能为负: {P_n}")
    sub_band = p.B / active_count
    sub_noise = noise_power(p) / active_count
    snr = P_n * channel_gain(d_nc, p) / sub_noise
    return sub_band * math.log2(1.0 + snr)


# ==================== 隐蔽性 ====================

def kl_divergence(gamma_e: float) -> float:
    """
    窃听者两种假设下接收信号分布的 KL 散度

    D = ½(ln(1+γ) − γ/(1+γ))，单位 nats
    """
    if gamma_e < 0:
        raise DomainError(f"信噪比不能为负: {gamma_e}")
    return 0.5 * (math.log1p(gamma_e) - gamma_e / (1.0 + gamma_e))


def covertness_satisfied(D: float, c: CovertnessParams) -> bool:
    """D ≤ 2ε_c² 时满足隐蔽性"""
    return D <= c.budget


def covert_snr_limit(c: CovertnessParams) -> float:
    """求解 kl_divergence(γ*) = 2ε_c² 的唯一正根 γ*"""
    budget = c.budget
    hi = 1.0
    while kl_divergence(hi) < budget:
        hi *= 2.0
    return brentq(lambda g: kl_divergence(g) - budget, 0.0, hi, xtol=1e-14, rtol=1e-14)


def max_covert_power(
    d_e: float,
    active_count: int,
    p: AcousticParams,
    c: CovertnessParams
) -> float:
    """
    等功率、等距离的 active_count 个 AUV 仍满足隐蔽性时的单机最大功率

    Args:
        d_e: 到窃听者的距离 (m)
        active_count: 同时发射的 AUV 数
    """
    if active_count < 1:
        raise DomainError(f"活跃 AUV 数必须 ≥ 1: {active_count}")
    gamma_star = covert_snr_limit(c)
    return gamma_star * noise_power(p) / (active_count * channel_gain(d_e, p))
