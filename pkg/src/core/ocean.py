# -*- coding: utf-8 -*-
"""海流场与 AUV 运动学

海流由若干竖直轴的 Lamb–Oseen 涡叠加恒定背景漂移构成，场对象构造后不可变。
"""

import math
from dataclasses import dataclass
from typing import Dict, Any, Tuple

import numpy as np

from .errors import require

Vec3 = Tuple[float, float, float]


@dataclass(frozen=True)
class VortexField:
    """Lamb–Oseen 涡旋海流场"""
    centers: Tuple[Vec3, ...] = ((60.0, 140.0, -100.0), (140.0, 60.0, -100.0))
    circulations: Tuple[float, ...] = (50.0, -50.0)        # Γ (m²/s)
    core_radii: Tuple[float, ...] = (30.0, 30.0)           # r_c (m)
    background_drift: Vec3 = (0.1, 0.1, 0.0)               # (m/s)

    def validate(self):
        """检查参数不变量"""
        n = len(self.centers)
        require(len(self.circulations) == n and len(self.core_radii) == n,
                "涡心、环量与核半径数量必须一致", "ocean.centers")
        require(all(len(c) == 3 for c in self.centers), "涡心必须为三维坐标", "ocean.centers")
        require(all(r > 0 for r in self.core_radii), "涡核半径必须为正", "ocean.core_radii")
        require(len(self.background_drift) == 3, "背景漂移必须为三维向量", "ocean.background_drift")

    def to_dict(self) -> Dict[str, Any]:
        return {
            'centers': [list(c) for c in self.centers],
            'circulations': list(self.circulations),
            'core_radii': list(self.core_radii),
            'background_drift': list(self.background_drift),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'VortexField':
        data = data.copy()
        if 'centers' in data:
            data['centers'] = tuple(tuple(float(v) for v in c) for c in data['centers'])
        if 'circulations' in data:
            data['circulations'] = tuple(float(v) for v in data['circulations'])
        if 'core_radii' in data:
            data['core_radii'] = tuple(float(v) for v in data['core_radii'])
        if 'background_drift' in data:
            data['background_drift'] = tuple(float(v) for v in data['background_drift'])
        return cls(**data)


def vortex_speed(r: float, circulation: float, core_radius: float) -> float:
    """Lamb–Oseen 切向速度剖面 v_θ(r) = Γ/(2πr)·(1 − exp(−r²/r_c²))"""
    if r == 0.0:
        return 0.0
    return circulation / (2.0 * math.pi * r) * -math.expm1(-(r * r) / (core_radius * core_radius))


def current_at(p, field: VortexField) -> np.ndarray:
    """
    位置 p 处的海流速度

    Args:
        p: 三维位置 (m)
        field: 海流场

    Returns:
        三维速度 (m/s)，涡旋只贡献水平分量
    """
    x, y = float(p[0]), float(p[1])
    vel = np.array(field.background_drift, dtype=np.float64)
    for center, gamma, rc in zip(field.centers, field.circulations, field.core_radii):
        dx = x - center[0]
        dy = y - center[1]
        r2 = dx * dx + dy * dy
        rc2 = rc * rc
        # v_θ/r 在 r→0 时的极限为 Γ/(2π r_c²)
        if r2 < 1e-12 * rc2:
            factor = gamma / (2.0 * math.pi * rc2)
        else:
            r = math.sqrt(r2)
            factor = vortex_speed(r, gamma, rc) / r
        vel[0] += -factor * dy
        vel[1] += factor * dx
    return vel


def relative_velocity(v_thrust, p, field: VortexField) -> np.ndarray:
    """AUV 相对海流的速度 V′ = V − V_T，用于阻力能耗"""
    return np.asarray(v_thrust, dtype=np.float64) - current_at(p, field)


def ground_velocity(v_thrust, p, field: VortexField) -> np.ndarray:
    """对地速度 = 推进速度 + 海流（海流平流带动 AUV）"""
    return np.asarray(v_thrust, dtype=np.float64) + current_at(p, field)


def integrate_motion(p, v_ground, dt: float, extent: float, depth: float) -> np.ndarray:
    """
    一个时间片的位置更新 p' = p + dt·v，并夹紧到世界盒

    Args:
        p: 当前位置 (m)
        v_ground: 对地速度 (m/s)
        dt: 时间片长度 Δτ (s)
        extent: 水平范围 [0, extent]
        depth: 深度范围 [−depth, 0]
    """
    nxt = np.asarray(p, dtype=np.float64) + dt * np.asarray(v_ground, dtype=np.float64)
    nxt[0] = min(max(nxt[0], 0.0), extent)
    nxt[1] = min(max(nxt[1], 0.0), extent)
    nxt[2] = min(max(nxt[2], -depth), 0.0)
    return nxt
