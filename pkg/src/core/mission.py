# -*- coding: utf-8 -*-
"""任务模型：子目标规划、覆盖率、各阶段时延、能耗核算与协作效率"""

import math
from dataclasses import dataclass, field, asdict
from typing import Dict, Any, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import DomainError, require


@dataclass(frozen=True)
class TaskCommand:
    """目标探测区域 ([x,y,z], l, w) 与指令数据量"""
    center: Tuple[float, float, float]
    length: float
    width: float
    command_bits: float = 1e5

    def validate(self):
        if not (self.length > 0 and self.width > 0):
            raise DomainError("任务矩形的长宽必须为正")

    @property
    def area(self) -> float:
        """L(t)² 取矩形面积 l·w"""
        return self.length * self.width

    @property
    def bounds(self) -> Tuple[float, float, float, float]:
        """(x_min, x_max, y_min, y_max)"""
        cx, cy, _ = self.center
        return (cx - self.length / 2.0, cx + self.length / 2.0,
                cy - self.width / 2.0, cy + self.width / 2.0)

    def contains(self, point) -> bool:
        """点的水平投影是否在矩形内"""
        x_min, x_max, y_min, y_max = self.bounds
        return x_min <= point[0] <= x_max and y_min <= point[1] <= y_max

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['center'] = list(self.center)
        return data


@dataclass(frozen=True)
class AuvCapability:
    """单个 AUV 的计算能力与探测半径参数"""
    compute: float                  # C_n
    base_radius: float = 5.0        # r_b (m)
    radius_gain: float = 2.0        # δ (m)
    compute_ref: float = 10.0       # C


@dataclass(frozen=True)
class CapabilityParams:
    """机队能力配置，C_n 在 reset 时从 compute_range 均匀抽取"""
    base_radius: float = 5.0
    radius_gain: float = 2.0
    compute_ref: float = 10.0
    compute_range: Tuple[float, float] = (5.0, 20.0)

    def validate(self):
        require(self.base_radius > 0, "基础探测半径必须为正", "capability.base_radius")
        require(self.radius_gain >= 0, "半径增益不能为负", "capability.radius_gain")
        require(self.compute_ref > 0, "参考算力必须为正", "capability.compute_ref")
        lo, hi = self.compute_range
        require(0 < lo <= hi, "算力范围必须满足 0 < lo ≤ hi", "capability.compute_range")

    def make(self, compute: float) -> AuvCapability:
        return AuvCapability(compute, self.base_radius, self.radius_gain, self.compute_ref)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['compute_range'] = list(self.compute_range)
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'CapabilityParams':
        data = data.copy()
        if 'compute_range' in data:
            data['compute_range'] = tuple(float(v) for v in data['compute_range'])
        return cls(**data)


@dataclass(frozen=True)
class EnergyParams:
    """能耗与时延相关的物理常数"""
    G: float = 981.0                    # 有效重力 (N)
    rho_L: float = 1025.0               # 海水密度 (kg/m³)
    A: float = 0.1                      # 截面积 (m²)
    C_d: float = 0.8                    # 阻力系数
    kappa: float = 1.0                  # 探测能量密度 (J/m²)
    Upsilon: float = 0.5                # 功率转换效率 (0, 1]
    phi: float = 1000.0                 # 采集数据密度 (bits/m²)
    varpi: float = math.pi / 5.0        # 声呐扫描角速率 (rad/s)
    v_u: float = 1500.0                 # 声速 (m/s)

    def validate(self):
        for name in ('G', 'rho_L', 'A', 'C_d', 'kappa', 'Upsilon', 'phi', 'varpi', 'v_u'):
            require(getattr(self, name) > 0, "必须为正", f"energy.{name}")
        require(self.Upsilon <= 1.0, "转换效率不能超过 1", "energy.Upsilon")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'EnergyParams':
        return cls(**data)


@dataclass
class SubTargetPlan:
    """子目标规划结果：每个被选 AUV 的圆盘中心与半径"""
    auv_ids: List[int]
    centers: np.ndarray                 # (n, 3)
    radii: np.ndarray                   # (n,)
    fallback: bool = False              # 是否触发了最小重叠兜底
    max_overlap_ratio: float = 0.0      # 两两重叠面积 / 较小圆面积 的最大值

    def center_of(self, auv_id: int) -> np.ndarray:
        return self.centers[self.auv_ids.index(auv_id)]

    def radius_of(self, auv_id: int) -> float:
        return float(self.radii[self.auv_ids.index(auv_id)])


@dataclass(frozen=True)
class PhaseDelays:
    """单个 AUV 在一个时隙内的四阶段时延 (s)"""
    dispatch: float
    move: float
    scan: float
    upload: float
    arrived: bool = True
    uploaded: bool = True

    @property
    def total(self) -> float:
        return self.dispatch + self.move + self.scan + self.upload

    @property
    def completed(self) -> bool:
        return self.arrived and self.uploaded


@dataclass(frozen=True)
class TaskDelay:
    """任务总时延：最慢 AUV 的四阶段之和"""
    total: float
    completed: bool
    per_auv: Tuple[float, ...] = field(default_factory=tuple)


@dataclass(frozen=True)
class MobilityEnergy:
    """移动能耗分解 (J)"""
    horizontal: float
    vertical: float
    drag: float

    @property
    def total(self) -> float:
        return self.horizontal + self.vertical + self.drag


# ==================== 探测半径与子目标规划 ====================

def exploration_radius(cap: AuvCapability) -> float:
    """r_n = r_b + δ·ln(C_n/C + 1)"""
    return cap.base_radius + cap.radius_gain * math.log(cap.compute / cap.compute_ref + 1.0)


def disc_overlap_area(c1, r1: float, c2, r2: float) -> float:
    """两个同深度圆盘的水平重叠面积（透镜面积）"""
    d = math.hypot(c1[0] - c2[0], c1[1] - c2[1])
    if d >= r1 + r2:
        return 0.0
    if d <= abs(r1 - r2):
        return math.pi * min(r1, r2) ** 2
    a1 = (d * d + r1 * r1 - r2 * r2) / (2.0 * d * r1)
    a2 = (d * d + r2 * r2 - r1 * r1) / (2.0 * d * r2)
    a1 = min(1.0, max(-1.0, a1))
    a2 = min(1.0, max(-1.0, a2))
    kite = (-d + r1 + r2) * (d + r1 - r2) * (d - r1 + r2) * (d + r1 + r2)
    return r1 * r1 * math.acos(a1) + r2 * r2 * math.acos(a2) - 0.5 * math.sqrt(max(kite, 0.0))


def plan_subtargets(
    task: TaskCommand,
    radii: Union[Dict[int, float], Sequence[float]],
    seed: Union[int, np.random.Generator, None] = None,
    overlap_tol: float = 0.05,
    max_tries: int = 100
) -> SubTargetPlan:
    """
    贪心子目标规划

    依次为每个 AUV 在矩形内均匀采样候选中心，接受第一个与所有已接受圆盘重叠
    都不超过 overlap_tol·π·min(r_i,r_j)² 的候选；max_tries 次都失败时接受总重叠最小的候选。

    Args:
        task: 任务区域
        radii: {auv_id: r_n} 或按顺序编号的半径列表
        seed: 随机种子或 Generator，同一种子结果相同
    """
    if isinstance(radii, dict):
        auv_ids = list(radii.keys())
        radius_list = [float(radii[i]) for i in auv_ids]
    else:
        radius_list = [float(r) for r in radii]
        auv_ids = list(range(len(radius_list)))
    if not radius_list:
        raise DomainError("子目标规划至少需要一个被选 AUV")

    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    x_min, x_max, y_min, y_max = task.bounds
    z = task.center[2]

    centers: List[np.ndarray] = []
    fallback = False
    for r_i in radius_list:
        best: Optional[np.ndarray] = None
        best_overlap = math.inf
        accepted: Optional[np.ndarray] = None
        for _ in range(max_tries):
            cand = np.array([rng.uniform(x_min, x_max), rng.uniform(y_min, y_max), z])
            overlaps = [disc_overlap_area(cand, r_i, c_j, r_j)
                        for c_j, r_j in zip(centers, radius_list)]
            limits = [overlap_tol * math.pi * min(r_i, r_j) ** 2
                      for r_j in radius_list[:len(centers)]]
            if all(o <= lim for o, lim in zip(overlaps, limits)):
                accepted = cand
                break
            total = sum(overlaps)
            if total < best_overlap:
                best, best_overlap = cand, total
        if accepted is None:
            accepted = best
            fallback = True
        centers.append(accepted)

    max_ratio = 0.0
    for i in range(len(centers)):
        for j in range(i + 1, len(centers)):
            ratio = disc_overlap_area(centers[i], radius_list[i], centers[j], radius_list[j])
            ratio /= math.pi * min(radius_list[i], radius_list[j]) ** 2
            max_ratio = max(max_ratio, ratio)

    return SubTargetPlan(
        auv_ids=auv_ids,
        centers=np.array(centers, dtype=np.float64),
        radii=np.array(radius_list, dtype=np.float64),
        fallback=fallback,
        max_overlap_ratio=max_ratio,
    )


def coverage(selection, radii, task: TaskCommand, clamp: bool = True) -> float:
    """
    任务覆盖率 ς = Σ G_n·π·r_n² / (l·w)

    Args:
        clamp: 是否在 1.0 处截断（对外报告时截断）
    """
    g = np.asarray(selection, dtype=np.float64)
    r = np.asarray(radii, dtype=np.float64)
    if np.any(r[g != 0] <= 0):
        raise DomainError("探测半径必须为正")
    value = float(np.sum(g * math.pi * r ** 2) / task.area)
    return min(value, 1.0) if clamp else value


# ==================== 时延 ====================

def dispatch_delay(d_nc: float, command_bits: float, rate_nc: float, ep: EnergyParams) -> float:
    """指令下发时延 = d/v_u + d(t)/R；速率为零时返回 inf"""
    if d_nc <= 0:
        raise DomainError(f"距离必须为正: {d_nc}")
    if rate_nc <= 0:
        return math.inf
    return d_nc / ep.v_u + command_bits / rate_nc


def scan_delay(ep: EnergyParams) -> float:
    """声呐扫描时延 T_e = 2π/ϖ"""
    return 2.0 * math.pi / ep.varpi


def collected_data(r_n: float, ep: EnergyParams) -> float:
    """采集数据量 D′ = φ·π·r_n² (bits)"""
    if r_n <= 0:
        raise DomainError(f"探测半径必须为正: {r_n}")
    return ep.phi * math.pi * r_n ** 2


def upload_delay(data_bits: float, rate: float, d_nc: float, ep: EnergyParams) -> float:
    """数据上传时延 = D′/R + d/v_u；速率为零时返回 inf"""
    if rate <= 0:
        return math.inf
    return data_bits / rate + d_nc / ep.v_u


def task_delay(phases: Sequence[PhaseDelays]) -> TaskDelay:
    """任务时延取最慢 AUV 的四阶段之和"""
    if not phases:
        raise DomainError("任务时延至少需要一个被选 AUV")
    sums = tuple(ph.total for ph in phases)
    return TaskDelay(
        total=max(sums),
        completed=all(ph.completed for ph in phases),
        per_auv=sums,
    )


# ==================== 能耗 ====================

def mobility_energy_components(v_ground, v_rel, dt: float, ep: EnergyParams) -> MobilityEnergy:
    """
    一个时间片的移动能耗分解

    水平项使用对地水平速度，垂直项只对上浮计费，阻力项使用相对海流速度。
    """
    if dt <= 0:
        raise DomainError(f"时间片长度必须为正: {dt}")
    vx, vy, vz = (float(v) for v in v_ground)
    h2 = vx * vx + vy * vy
    lift = ep.G / (ep.A * ep.rho_L)
    e_h = (ep.G ** 2 * dt / (math.sqrt(2.0) * ep.A * ep.rho_L)) / math.sqrt(h2 + h2 * h2 + lift * lift)
    e_d = ep.G * max(vz, 0.0) * dt
    speed = float(np.linalg.norm(np.asarray(v_rel, dtype=np.float64)))
    e_f = 0.5 * ep.A * ep.C_d * ep.rho_L * dt * speed ** 3
    return MobilityEnergy(horizontal=e_h, vertical=e_d, drag=e_f)


def mobility_energy(v_ground, v_rel, dt: float, ep: EnergyParams) -> float:
    """E_m = E_h + E_d + E_f (J)"""
    return mobility_energy_components(v_ground, v_rel, dt, ep).total


def exploration_energy(r_n: float, ep: EnergyParams) -> float:
    """探测能耗 π·r_n²·κ (J)"""
    if r_n <= 0:
        raise DomainError(f"探测半径必须为正: {r_n}")
    return math.pi * r_n ** 2 * ep.kappa


def upload_energy(P: float, data_bits: float, rate: float, ep: EnergyParams) -> float:
    """上传能耗 (P/Υ)·(D/R)；速率为零时返回 inf"""
    if P == 0 or data_bits == 0:
        return 0.0
    if rate <= 0:
        return math.inf
    return transmit_energy(P, data_bits / rate, ep)


def transmit_energy(P: float, duration: float, ep: EnergyParams) -> float:
    """以功率 P 发射 duration 秒的能耗 (P/Υ)·t (J)"""
    if duration < 0:
        raise DomainError(f"发射时长不能为负: {duration}")
    return P / ep.Upsilon * duration


def remaining_energy(E_prev: float, dE_m: float, dE_d: float, dE_u: float) -> float:
    """剩余能量，可以为负（违反约束时由奖励惩罚，不截断）"""
    return E_prev - dE_m - dE_d - dE_u


def cooperation_efficiency(coverage_rate: float, T_task: float) -> float:
    """协作效率 η = ς / T_task"""
    if T_task <= 0:
        raise DomainError(f"任务时延必须为正: {T_task}")
    if math.isinf(T_task):
        return 0.0
    return coverage_rate / T_task
