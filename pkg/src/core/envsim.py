# -*- coding: utf-8 -*-
"""双时间尺度任务环境

高层（时隙 t）：中心 AUV 选择参与的 AUV 集合 G(t)。
低层（时间片 τ）：被选 AUV 各自控制发射功率与三维推进速度。

单个环境实例是单线程的可变对象；不同种子的多个实例互不共享状态。
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional, Dict, List, Tuple, Union

import numpy as np
from gymnasium import spaces

from . import acoustics, mission, ocean
from .errors import ContractViolation
from ..data.models import WorldConfig, SliceRecord, SlotInfo, TRACE_HEADER
from ..utils.helpers import write_csv

logger = logging.getLogger(__name__)

# 近场距离下限 (m)，避免 AUV 与中心 AUV / 窃听者重合时增益发散
MIN_LINK_DISTANCE = 1.0


class Phase(Enum):
    """被选 AUV 在一个时隙内所处的阶段"""
    IDLE = "idle"               # 未被选中
    MOVING = "moving"           # 前往子目标
    SCANNING = "scanning"       # 声呐扫描
    UPLOADING = "uploading"     # 上传采集数据
    DONE = "done"               # 完成，静默悬停


RADIATING_PHASES = (Phase.MOVING, Phase.SCANNING, Phase.UPLOADING)


@dataclass(frozen=True)
class LowLevelAction:
    """低层动作：发射功率 (W) 与三维推进速度 (m/s)"""
    power: float
    velocity: Tuple[float, float, float]

    @classmethod
    def from_array(cls, arr) -> 'LowLevelAction':
        arr = np.asarray(arr, dtype=np.float64)
        return cls(float(arr[0]), (float(arr[1]), float(arr[2]), float(arr[3])))


@dataclass
class AuvState:
    """单个 AUV 的运动与能量状态"""
    position: np.ndarray
    velocity: np.ndarray
    energy: float
    capability: mission.AuvCapability
    radius: float
    initial_energy: float
    arrived: bool = False
    selected: bool = False
    phase: Phase = Phase.IDLE
    power: float = 0.0
    sub_target: Optional[np.ndarray] = None
    dispatch: float = 0.0
    arrival_slice: Optional[int] = None
    scan_left: float = 0.0
    bits_left: float = 0.0
    tx_time: float = 0.0
    uploaded: bool = False
    slot_reward: float = 0.0
    consumed: Dict[str, float] = field(
        default_factory=lambda: {'mobility': 0.0, 'exploration': 0.0, 'upload': 0.0})

    def reset_slot(self):
        """清除时隙内的记账"""
        self.arrived = False
        self.selected = False
        self.phase = Phase.IDLE
        self.power = 0.0
        self.sub_target = None
        self.dispatch = 0.0
        self.arrival_slice = None
        self.scan_left = 0.0
        self.bits_left = 0.0
        self.tx_time = 0.0
        self.uploaded = False
        self.slot_reward = 0.0


class CovertMissionEnv:
    """多 AUV 隐蔽协同探测环境"""

    def __init__(self, config: WorldConfig):
        self.config = config.validate()
        self.n = config.n_auvs
        self.obs_dim = 15 if config.target_bearing_obs else 12
        self.state_dim = 4 * self.n

        v = config.v_max
        self.high_observation_space = spaces.Box(-1.0, 1.0, (self.state_dim,), dtype=np.float64)
        self.high_action_space = spaces.MultiBinary(self.n)
        self.low_observation_space = spaces.Box(-1.0, 1.0, (self.obs_dim,), dtype=np.float64)
        self.low_action_space = spaces.Box(
            low=np.array([config.p_min, -v, -v, -v]),
            high=np.array([config.p_max, v, v, v]),
            dtype=np.float64,
        )

        self._rng: Optional[np.random.Generator] = None
        self.auvs: List[AuvState] = []
        self.task: Optional[mission.TaskCommand] = None
        self.plan: Optional[mission.SubTargetPlan] = None
        self.slot = 0
        self.slice = 0
        self._slot_active = False
        self._slot_done = False
        self._selection = np.zeros(self.n, dtype=np.int64)
        self._slot_stats: Dict[str, float] = {}

        self.record_trace = False
        self.trace: List[SliceRecord] = []

    # ==================== 公共属性 ====================

    @property
    def active_ids(self) -> List[int]:
        """当前时隙被选中的 AUV 编号"""
        return [i for i, a in enumerate(self.auvs) if a.selected]

    @property
    def radii(self) -> np.ndarray:
        return np.array([a.radius for a in self.auvs])

    @property
    def episode_done(self) -> bool:
        return self.slot >= self.config.high_horizon

    @property
    def slot_done(self) -> bool:
        return self._slot_done

    # ==================== 回合控制 ====================

    def reset(self, seed: Optional[int] = None) -> np.ndarray:
        """
        开始新回合

        Args:
            seed: 随机种子，缺省使用配置中的种子

        Returns:
            归一化的全局状态 (4N,)
        """
        cfg = self.config
        self._rng = np.random.default_rng(cfg.seed if seed is None else seed)
        rng = self._rng
        lo_c, hi_c = cfg.capability.compute_range
        self.auvs = []
        for _ in range(self.n):
            position = np.array([
                rng.uniform(0.0, cfg.extent),
                rng.uniform(0.0, cfg.extent),
                rng.uniform(-cfg.depth, 0.0),
            ])
            energy = float(rng.uniform(*cfg.energy_range))
            cap = cfg.capability.make(float(rng.uniform(lo_c, hi_c)))
            self.auvs.append(AuvState(
                position=position,
                velocity=np.zeros(3),
                energy=energy,
                capability=cap,
                radius=mission.exploration_radius(cap),
                initial_energy=energy,
            ))
        self.task = self._sample_task()
        self.plan = None
        self.slot = 0
        self.slice = 0
        self._slot_active = False
        self._slot_done = False
        self._selection = np.zeros(self.n, dtype=np.int64)
        self.trace = []
        return self.high_state()

    def _sample_task(self) -> mission.TaskCommand:
        cfg = self.config
        half = cfg.task_side / 2.0
        cx = float(self._rng.uniform(half, cfg.extent - half))
        cy = float(self._rng.uniform(half, cfg.extent - half))
        return mission.TaskCommand((cx, cy, cfg.task_depth), cfg.task_side, cfg.task_side)

    def high_state(self) -> np.ndarray:
        """S_global = {p(t), E(t)}，位置除以世界尺寸，能量除以初始能量上限"""
        cfg = self.config
        e_max = cfg.energy_range[1] if cfg.energy_range[1] > 0 else 1.0
        feats = []
        for a in self.auvs:
            feats.extend([
                a.position[0] / cfg.extent,
                a.position[1] / cfg.extent,
                a.position[2] / cfg.depth,
                min(1.0, max(-1.0, a.energy / e_max)),
            ])
        return np.array(feats, dtype=np.float64)

    # ==================== 时隙 ====================

    def begin_slot(self, selection) -> Dict[int, np.ndarray]:
        """
        按选择向量开启一个时隙：计算探测半径、贪心规划子目标、下发指令

        Returns:
            {auv_id: 初始局部观测}
        """
        if self._rng is None:
            raise ContractViolation("必须先调用 reset()")
        if self._slot_active:
            raise ContractViolation("上一个时隙尚未结束")
        if self.episode_done:
            raise ContractViolation("回合已结束，需要 reset()")
        sel = np.asarray(selection).astype(np.int64).reshape(-1)
        if sel.shape != (self.n,):
            raise ContractViolation(f"选择向量维度应为 {self.n}")
        if not np.any(sel):
            raise ContractViolation("选择向量全为 0，需要调用方重新采样")

        cfg = self.config
        self._selection = (sel != 0).astype(np.int64)
        ids = [i for i in range(self.n) if self._selection[i]]
        self.plan = mission.plan_subtargets(
            self.task,
            {i: self.auvs[i].radius for i in ids},
            self._rng,
            overlap_tol=cfg.overlap_tol,
            max_tries=cfg.max_tries,
        )
        if self.plan.fallback:
            logger.debug("子目标规划触发兜底，最大重叠比 %.3f", self.plan.max_overlap_ratio)

        central = np.array(cfg.central_position)
        for i in ids:
            a = self.auvs[i]
            a.reset_slot()
            a.selected = True
            a.phase = Phase.MOVING
            a.sub_target = self.plan.center_of(i)
            d_nc = self._distance(a.position, central)
            rate = acoustics.link_rate(cfg.p_max, d_nc, len(ids), cfg.acoustics)
            a.dispatch = mission.dispatch_delay(d_nc, self.task.command_bits, rate, cfg.energy)

        self.slice = 0
        self._slot_active = True
        self._slot_done = False
        self._slot_stats = {'covert': 0, 'communicating': 0, 'kl_sum': 0.0}
        return {i: self.observe(i) for i in ids}

    def low_step(self, actions: Dict[int, Union[LowLevelAction, np.ndarray]]):
        """
        推进一个时间片：运动学、能耗、窃听者信噪比与 KL、到达检测

        Args:
            actions: {auv_id: LowLevelAction 或 [P, vx, vy, vz]}，必须覆盖全部被选 AUV

        Returns:
            (next_obs, rewards, done, info)
        """
        if not self._slot_active:
            raise ContractViolation("low_step 必须在 begin_slot 之后调用")
        if self._slot_done:
            raise ContractViolation("当前时隙的低层回合已结束")
        ids = self.active_ids
        if set(actions.keys()) != set(ids):
            raise ContractViolation(f"动作必须恰好对应被选 AUV {ids}，收到 {sorted(actions)}")

        cfg = self.config
        ep = cfg.energy
        central = np.array(cfg.central_position)
        eav = np.array(cfg.eavesdropper_position)
        self.slice += 1

        prev_dist = {i: self._distance(self.auvs[i].position, self.auvs[i].sub_target, floor=0.0)
                     for i in ids}
        arrived_now = {i: False for i in ids}
        powers = np.zeros(self.n)

        for i in ids:
            a = self.auvs[i]
            act = actions[i] if isinstance(actions[i], LowLevelAction) else \
                LowLevelAction.from_array(actions[i])
            power, thrust = self._clamp_action(act)
            start_phase = a.phase
            a.power = power if start_phase in RADIATING_PHASES else 0.0
            powers[i] = a.power

            if start_phase is not Phase.MOVING:
                thrust = self._clamp_velocity(-ocean.current_at(a.position, cfg.ocean))
            v_ground = ocean.ground_velocity(thrust, a.position, cfg.ocean)
            v_rel = ocean.relative_velocity(thrust, a.position, cfg.ocean)
            a.position = ocean.integrate_motion(a.position, v_ground, cfg.dt, cfg.extent, cfg.depth)
            a.velocity = thrust
            self._consume(a, 'mobility', mission.mobility_energy(v_ground, v_rel, cfg.dt, ep))
            if start_phase in (Phase.MOVING, Phase.SCANNING):
                # 非上传阶段的辐射记入通信能耗
                self._consume(a, 'upload', mission.transmit_energy(a.power, cfg.dt, ep))

            if start_phase is Phase.MOVING:
                if self._distance(a.position, a.sub_target, floor=0.0) <= a.radius:
                    a.arrived = True
                    a.arrival_slice = self.slice
                    a.phase = Phase.SCANNING
                    a.scan_left = mission.scan_delay(ep)
                    a.bits_left = mission.collected_data(a.radius, ep)
                    self._consume(a, 'exploration', mission.exploration_energy(a.radius, ep))
                    arrived_now[i] = True
            elif start_phase is Phase.SCANNING:
                a.scan_left -= cfg.dt
                if a.scan_left <= 1e-9:
                    a.phase = Phase.UPLOADING
            elif start_phase is Phase.UPLOADING:
                self._transmit(a, len(ids), central)

        eav_dist = np.array([self._distance(a.position, eav) for a in self.auvs])
        gamma_e = acoustics.eavesdropper_snr(self._selection, powers, eav_dist, cfg.acoustics)
        kl = acoustics.kl_divergence(gamma_e)
        covert = acoustics.covertness_satisfied(kl, cfg.covertness)
        if gamma_e > 0:
            self._slot_stats['communicating'] += 1
            self._slot_stats['covert'] += int(covert)
            self._slot_stats['kl_sum'] += kl

        rewards: Dict[int, float] = {}
        for i in ids:
            a = self.auvs[i]
            d_now = self._distance(a.position, a.sub_target, floor=0.0)
            rewards[i] = self.low_reward(covert, prev_dist[i], d_now, arrived_now[i], a.energy)
            a.slot_reward += rewards[i]

        done = all(self.auvs[i].phase is Phase.DONE for i in ids) or self.slice >= cfg.low_horizon
        self._slot_done = done

        if self.record_trace:
            for i in ids:
                a = self.auvs[i]
                self.trace.append(SliceRecord(
                    slot=self.slot, slice=self.slice, auv=i,
                    position=tuple(float(v) for v in a.position),
                    velocity=tuple(float(v) for v in a.velocity),
                    power=float(powers[i]), energy=a.energy, phase=a.phase.value,
                    gamma_e=gamma_e, kl=kl, covert=covert,
                ))

        info = {
            'slice': self.slice,
            'gamma_e': gamma_e,
            'kl': kl,
            'covert': covert,
            'powers': powers.copy(),
            'positions': np.array([a.position for a in self.auvs]),
            'energies': np.array([a.energy for a in self.auvs]),
            'arrived': {i: self.auvs[i].arrived for i in ids},
            'phases': {i: self.auvs[i].phase.value for i in ids},
            'energy_violation': [a.energy < 0 for a in self.auvs],
        }
        obs = {i: self.observe(i) for i in ids}
        return obs, rewards, done, info

    def low_reward(self, covert: bool, d_prev: float, d_now: float, arrived_now: bool,
                   energy: float) -> float:
        """R_n = w_c·𝕀(D ≤ 2ε²) + w_p·Δd + w_b·𝕀(首次到达) − w_e·ReLU(−E_n)"""
        w = self.config.reward_low
        return (w.w_c * float(covert)
                + w.w_p * (d_prev - d_now)
                + w.w_b * float(arrived_now)
                - w.w_e * max(-energy, 0.0))

    def end_slot(self) -> Tuple[np.ndarray, float, SlotInfo]:
        """
        结束时隙，计算覆盖率、任务时延与高层奖励

        Returns:
            (下一个全局状态, 高层奖励, SlotInfo)
        """
        if not self._slot_active or not self._slot_done:
            raise ContractViolation("end_slot 必须在低层回合结束后调用")
        cfg = self.config
        ids = self.active_ids
        horizon_time = cfg.low_horizon * cfg.dt
        phases = []
        for i in ids:
            a = self.auvs[i]
            if a.uploaded:
                phases.append(mission.PhaseDelays(
                    dispatch=a.dispatch,
                    move=a.arrival_slice * cfg.dt,
                    scan=mission.scan_delay(cfg.energy),
                    upload=a.tx_time + self._distance(a.position, cfg.central_position) / cfg.energy.v_u,
                ))
            else:
                # 未完成的 AUV 时延饱和到低层时域
                phases.append(mission.PhaseDelays(
                    dispatch=a.dispatch, move=horizon_time, scan=0.0, upload=0.0,
                    arrived=a.arrived, uploaded=False,
                ))
        delay = mission.task_delay(phases)
        cov = mission.coverage(self._selection, self.radii, self.task)
        eta = mission.cooperation_efficiency(cov, delay.total)
        avg_low = float(np.mean([self.auvs[i].slot_reward for i in ids]))
        w = cfg.reward_high
        high_reward = w.d1 * cov + w.d2 * delay.total + w.d3 * avg_low

        stats = self._slot_stats
        communicating = int(stats['communicating'])
        info = SlotInfo(
            slot=self.slot,
            selection=tuple(int(g) for g in self._selection),
            coverage=cov,
            task_delay=delay.total,
            efficiency=eta,
            completed=delay.completed,
            completion_ratio=sum(ph.completed for ph in phases) / len(phases),
            covert_slices=int(stats['covert']),
            communicating_slices=communicating,
            mean_kl=stats['kl_sum'] / communicating if communicating else 0.0,
            avg_low_reward=avg_low,
            high_reward=high_reward,
            episode_done=self.slot + 1 >= cfg.high_horizon,
            energy_violations=tuple(self.energy_violations()),
        )

        for i in ids:
            self.auvs[i].reset_slot()
        self._selection = np.zeros(self.n, dtype=np.int64)
        self._slot_active = False
        self._slot_done = False
        self.slot += 1
        self.task = self._sample_task()
        return self.high_state(), high_reward, info

    # ==================== 观测 ====================

    def observe(self, i: int) -> np.ndarray:
        """
        AUV i 的局部观测

        [d_nc, d_sub, p(3), V(3), E, 海流(3)]，可选附加指向子目标的单位向量(3)
        """
        cfg = self.config
        a = self.auvs[i]
        diag = cfg.diagonal
        e_max = cfg.energy_range[1] if cfg.energy_range[1] > 0 else 1.0
        target = a.sub_target if a.sub_target is not None else a.position
        offset = target - a.position
        d_sub = float(np.linalg.norm(offset))
        current = ocean.current_at(a.position, cfg.ocean)
        feats = [
            self._distance(a.position, cfg.central_position, floor=0.0) / diag,
            d_sub / diag,
            a.position[0] / cfg.extent,
            a.position[1] / cfg.extent,
            a.position[2] / cfg.depth,
            *(a.velocity / cfg.v_max),
            min(1.0, max(-1.0, a.energy / e_max)),
            *np.clip(current / cfg.v_max, -1.0, 1.0),
        ]
        if cfg.target_bearing_obs:
            bearing = offset / d_sub if d_sub > 1e-9 else np.zeros(3)
            feats.extend(bearing)
        return np.array(feats, dtype=np.float64)

    def global_observation(self, obs: Dict[int, np.ndarray]) -> np.ndarray:
        """O_global：按 AUV 编号拼接所有被选 AUV 的观测，未选中的位置补零"""
        out = np.zeros(self.n * self.obs_dim)
        for i, o in obs.items():
            out[i * self.obs_dim:(i + 1) * self.obs_dim] = o
        return out

    # ==================== 记账 ====================

    def energy_ledger(self) -> List[Dict[str, float]]:
        """每个 AUV 的初始能量、当前能量与各项累计消耗"""
        return [{
            'initial': a.initial_energy,
            'current': a.energy,
            **a.consumed,
        } for a in self.auvs]

    def energy_violations(self) -> List[int]:
        """剩余能量为负的 AUV 编号"""
        return [i for i, a in enumerate(self.auvs) if a.energy < 0]

    def export_trace(self, path: Path) -> bool:
        """导出逐时间片轨迹 CSV"""
        return write_csv(path, TRACE_HEADER, [rec.to_row() for rec in self.trace])

    # ==================== 内部工具 ====================

    def _consume(self, a: AuvState, kind: str, amount: float):
        a.consumed[kind] += amount
        deltas = {'mobility': 0.0, 'exploration': 0.0, 'upload': 0.0}
        deltas[kind] = amount
        a.energy = mission.remaining_energy(a.energy, deltas['mobility'], deltas['exploration'],
                                            deltas['upload'])

    def _transmit(self, a: AuvState, active_count: int, central: np.ndarray):
        """以当前功率上传一个时间片的数据"""
        cfg = self.config
        d_nc = self._distance(a.position, central)
        rate = acoustics.link_rate(a.power, d_nc, active_count, cfg.acoustics)
        if rate <= 0:
            return
        t_used = min(cfg.dt, a.bits_left / rate)
        sent = rate * t_used
        self._consume(a, 'upload', mission.upload_energy(a.power, sent, rate, cfg.energy))
        a.tx_time += t_used
        a.bits_left -= sent
        if a.bits_left <= 1e-9 * max(1.0, sent):
            a.bits_left = 0.0
            a.uploaded = True
            a.phase = Phase.DONE

    def _clamp_action(self, act: LowLevelAction) -> Tuple[float, np.ndarray]:
        cfg = self.config
        power = min(max(float(act.power), cfg.p_min), cfg.p_max)
        return power, self._clamp_velocity(np.asarray(act.velocity, dtype=np.float64))

    def _clamp_velocity(self, v: np.ndarray) -> np.ndarray:
        speed = float(np.linalg.norm(v))
        if speed > self.config.v_max:
            v = v * (self.config.v_max / speed)
        return v

    @staticmethod
    def _distance(p, q, floor: float = MIN_LINK_DISTANCE) -> float:
        d = float(np.linalg.norm(np.asarray(p, dtype=np.float64) - np.asarray(q, dtype=np.float64)))
        return max(d, floor)
