# -*- coding: utf-8 -*-
"""数据模型定义"""

from dataclasses import dataclass, field, asdict, fields, replace
from typing import Optional, List, Dict, Any, Tuple

from ..core.acoustics import AcousticParams, CovertnessParams
from ..core.errors import require
from ..core.mission import CapabilityParams, EnergyParams
from ..core.ocean import VortexField


@dataclass(frozen=True)
class HighRewardWeights:
    """高层奖励权重 R = Δ₁·ς + Δ₂·T_task + Δ₃·avg(R)"""
    d1: float = 10.0
    d2: float = -0.01       # 每秒
    d3: float = 0.1

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'HighRewardWeights':
        return cls(**data)


@dataclass(frozen=True)
class LowRewardWeights:
    """低层奖励权重 R_n = w_c·𝕀(covert) + w_p·Δd + w_b·𝕀(arrive) − w_e·ReLU(−E)"""
    w_c: float = 0.5
    w_p: float = 0.1        # 每米
    w_b: float = 10.0
    w_e: float = 0.01       # 每焦耳

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'LowRewardWeights':
        return cls(**data)


@dataclass(frozen=True)
class WorldConfig:
    """世界配置：物理、任务、隐蔽性与奖励的全部参数"""
    n_auvs: int = 5
    extent: float = 200.0
    depth: float = 200.0
    central_position: Tuple[float, float, float] = (0.0, 0.0, -20.0)
    eavesdropper_position: Tuple[float, float, float] = (70.0, 70.0, -10.0)
    p_min: float = 0.01
    p_max: float = 2.0
    v_max: float = 5.0
    dt: float = 2.0
    energy_range: Tuple[float, float] = (10000.0, 20000.0)
    high_horizon: int = 10
    low_horizon: int = 100
    task_side: float = 100.0
    task_depth: float = -50.0
    overlap_tol: float = 0.05
    max_tries: int = 100
    target_bearing_obs: bool = False
    # 表中出现但不进入任何公式的条目，仅记录
    table_L: float = 0.5
    table_F_uc: float = 50e9
    table_C_m: float = 5.0
    seed: int = 0
    acoustics: AcousticParams = field(default_factory=AcousticParams)
    covertness: CovertnessParams = field(default_factory=CovertnessParams)
    energy: EnergyParams = field(default_factory=EnergyParams)
    ocean: VortexField = field(default_factory=VortexField)
    capability: CapabilityParams = field(default_factory=CapabilityParams)
    reward_high: HighRewardWeights = field(default_factory=HighRewardWeights)
    reward_low: LowRewardWeights = field(default_factory=LowRewardWeights)

    SECTIONS = ('acoustics', 'covertness', 'energy', 'ocean', 'capability',
                'reward_high', 'reward_low')

    def validate(self) -> 'WorldConfig':
        """检查不变量，失败抛出 ConfigError(invariant)"""
        require(self.n_auvs >= 1, "AUV 数量必须 ≥ 1", "world.n_auvs")
        require(self.extent > 0 and self.depth > 0, "世界尺寸必须为正", "world.extent")
        require(self.p_min < self.p_max, "必须满足 P_min < P_max", "world.p_min")
        require(self.p_min >= 0, "P_min 不能为负", "world.p_min")
        require(self.v_max > 0, "V_max 必须为正", "world.v_max")
        require(self.dt > 0, "Δτ 必须为正", "world.dt")
        lo, hi = self.energy_range
        require(0 <= lo <= hi, "初始能量范围必须满足 0 ≤ lo ≤ hi", "world.energy_range")
        require(self.high_horizon >= 1 and self.low_horizon >= 1, "时域长度必须 ≥ 1",
                "world.high_horizon")
        require(0 < self.task_side <= self.extent, "任务边长必须在 (0, extent] 内", "world.task_side")
        require(-self.depth <= self.task_depth <= 0, "任务深度必须在世界盒内", "world.task_depth")
        require(self.overlap_tol >= 0, "重叠容差不能为负", "world.overlap_tol")
        require(self.max_tries >= 1, "最大尝试次数必须 ≥ 1", "world.max_tries")
        for section in self.SECTIONS:
            validator = getattr(getattr(self, section), 'validate', None)
            if validator:
                validator()
        return self

    @property
    def diagonal(self) -> float:
        """世界盒对角线长度，用于距离归一化"""
        return (2.0 * self.extent ** 2 + self.depth ** 2) ** 0.5

    def to_dict(self) -> Dict[str, Any]:
        """转换为按段嵌套的字典"""
        world = {}
        for f in fields(self):
            if f.name in self.SECTIONS:
                continue
            value = getattr(self, f.name)
            world[f.name] = list(value) if isinstance(value, tuple) else value
        data = {'world': world}
        for section in self.SECTIONS:
            data[section] = getattr(self, section).to_dict()
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'WorldConfig':
        """从按段嵌套的字典创建，缺省项取默认值"""
        kwargs: Dict[str, Any] = {}
        for key, value in data.get('world', {}).items():
            kwargs[key] = tuple(value) if isinstance(value, list) else value
        section_types = {
            'acoustics': AcousticParams, 'covertness': CovertnessParams,
            'energy': EnergyParams, 'ocean': VortexField, 'capability': CapabilityParams,
            'reward_high': HighRewardWeights, 'reward_low': LowRewardWeights,
        }
        for section, section_cls in section_types.items():
            if section in data:
                base = section_cls().to_dict()
                base.update(data[section])
                kwargs[section] = section_cls.from_dict(base)
        return cls(**kwargs)

    def with_epsilon(self, epsilon_c: float) -> 'WorldConfig':
        return replace(self, covertness=CovertnessParams(epsilon_c))


@dataclass(frozen=True)
class TrainConfig:
    """训练超参数"""
    episodes: int = 2000
    high_steps: int = 10
    low_steps: int = 100
    lr_actor: float = 3e-5
    lr_critic: float = 5e-5
    gamma: float = 0.99
    clip_eps: float = 0.2
    gae_lambda: float = 0.95
    batch_auv: int = 512
    batch_central: int = 16
    epochs: int = 4
    minibatch_size: int = 128
    entropy_coef: float = 0.01
    max_grad_norm: float = 0.5
    hidden: Tuple[int, ...] = (64, 64)
    share_actor: bool = True
    checkpoint_every: int = 50
    seed: int = 0

    def validate(self) -> 'TrainConfig':
        require(self.episodes >= 0, "episodes 不能为负", "train.episodes")
        require(self.high_steps >= 1 and self.low_steps >= 1, "步数必须 ≥ 1", "train.high_steps")
        require(self.lr_actor > 0 and self.lr_critic > 0, "学习率必须为正", "train.lr_actor")
        require(0 <= self.gamma <= 1, "折扣因子必须在 [0, 1] 内", "train.gamma")
        require(0 <= self.gae_lambda <= 1, "GAE λ 必须在 [0, 1] 内", "train.gae_lambda")
        require(self.clip_eps > 0, "裁剪系数必须为正", "train.clip_eps")
        require(self.batch_auv >= 1 and self.batch_central >= 1, "批大小必须 ≥ 1", "train.batch_auv")
        require(self.epochs >= 1, "epochs 必须 ≥ 1", "train.epochs")
        require(self.minibatch_size >= 1, "minibatch 必须 ≥ 1", "train.minibatch_size")
        require(self.entropy_coef >= 0, "熵系数不能为负", "train.entropy_coef")
        require(self.max_grad_norm > 0, "梯度裁剪阈值必须为正", "train.max_grad_norm")
        require(len(self.hidden) >= 1 and all(h >= 1 for h in self.hidden), "隐藏层宽度必须 ≥ 1",
                "train.hidden")
        require(self.checkpoint_every >= 0, "检查点间隔不能为负", "train.checkpoint_every")
        return self

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['hidden'] = list(self.hidden)
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'TrainConfig':
        data = data.copy()
        if 'hidden' in data:
            data['hidden'] = tuple(int(h) for h in data['hidden'])
        return cls(**data)


@dataclass
class ExperimentSpec:
    """实验描述：运行名、配置、扫描值、输出目录与种子列表"""
    name: str
    world: WorldConfig
    train: TrainConfig
    output_dir: str
    seeds: List[int] = field(default_factory=lambda: [0])
    epsilons: List[float] = field(default_factory=lambda: [0.01, 0.05, 0.1, 0.2])
    eval_episodes: int = 200
    eval_only: bool = False
    checkpoint: Optional[str] = None
    trace: bool = False

    def validate(self) -> 'ExperimentSpec':
        require(bool(self.name), "运行名不能为空", "experiment.name")
        require(len(self.seeds) >= 1, "种子列表不能为空", "experiment.seeds")
        require(len(self.epsilons) >= 1, "扫描列表不能为空", "experiment.epsilons")
        require(self.eval_episodes >= 0, "评估回合数不能为负", "experiment.eval_episodes")
        self.world.validate()
        self.train.validate()
        return self


# ==================== 运行记录 ====================

TRACE_HEADER = ['slot', 'slice', 'auv', 'x', 'y', 'z', 'vx', 'vy', 'vz', 'power', 'energy',
                'phase', 'gamma_e', 'kl', 'covert']

METRICS_HEADER = ['episode', 'high_reward_avg', 'low_reward_avg', 'coverage', 'task_delay',
                  'efficiency', 'covert_fraction', 'completion_ratio']


@dataclass(frozen=True)
class SliceRecord:
    """单个 AUV 在单个时间片的轨迹记录"""
    slot: int
    slice: int
    auv: int
    position: Tuple[float, float, float]
    velocity: Tuple[float, float, float]
    power: float
    energy: float
    phase: str
    gamma_e: float
    kl: float
    covert: bool

    def to_row(self) -> List[Any]:
        return [self.slot, self.slice, self.auv, *self.position, *self.velocity,
                self.power, self.energy, self.phase, self.gamma_e, self.kl, int(self.covert)]


@dataclass(frozen=True)
class SlotInfo:
    """一个时隙结束时的统计"""
    slot: int
    selection: Tuple[int, ...]
    coverage: float
    task_delay: float
    efficiency: float
    completed: bool
    completion_ratio: float
    covert_slices: int
    communicating_slices: int
    mean_kl: float
    avg_low_reward: float
    high_reward: float
    episode_done: bool
    energy_violations: Tuple[int, ...] = ()     # 时隙结束时剩余能量为负的 AUV

    @property
    def covert_fraction(self) -> float:
        if self.communicating_slices == 0:
            return 1.0
        return self.covert_slices / self.communicating_slices


@dataclass(frozen=True)
class EpisodeMetrics:
    """训练或评估中一个回合的汇总指标"""
    episode: int
    high_reward_avg: float
    low_reward_avg: float
    coverage: float
    task_delay: float
    efficiency: float
    covert_fraction: float
    completion_ratio: float
    mean_kl: float = 0.0

    def to_row(self) -> List[Any]:
        return [self.episode, self.high_reward_avg, self.low_reward_avg, self.coverage,
                self.task_delay, self.efficiency, self.covert_fraction, self.completion_ratio]

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)
