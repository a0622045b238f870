# -*- coding: utf-8 -*-
"""配置加载与运行目录管理

配置文件是一个 JSON 对象，键既可以是嵌套的段，也可以是点分键，两种写法可混用：

    {"acoustics": {"f": 30}, "train.lr_actor": 3e-4, "world.n_auvs": 5}

合并顺序：数据类默认值 → 配置档案 → 配置文件 → 命令行 --set / 显式参数。
"""

import json
import logging
import shutil
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Tuple

from ..core.errors import ConfigError
from ..utils.constants import (
    APP_VERSION, CHECKPOINT_DIR, CHECKPOINT_FORMAT_VERSION, CONFIG_DIR, EVAL_EPISODES_FILE,
    EVAL_SUMMARY_FILE, LATEST_CHECKPOINT, METRICS_FILE, PROFILES, RUN_CONFIG_FILE,
)
from ..utils.helpers import (
    append_csv, flatten_dict, load_json, parse_scalar, save_json, unflatten_dict, write_csv,
)
from .models import METRICS_HEADER, EpisodeMetrics, TrainConfig, WorldConfig

logger = logging.getLogger(__name__)

# 实验级别的键，不进入 WorldConfig / TrainConfig
EXPERIMENT_DEFAULTS = {
    'experiment.seeds': [0],
    'experiment.epsilons': [0.01, 0.05, 0.1, 0.2],
    'experiment.eval_episodes': 200,
}


# ==================== 配置 ====================

def default_document() -> Dict[str, Any]:
    """全部已知键及其默认值（点分形式）"""
    flat = flatten_dict(WorldConfig().to_dict())
    flat.update(flatten_dict({'train': TrainConfig().to_dict()}))
    flat.update(EXPERIMENT_DEFAULTS)
    return flat


def read_config_file(path: Path) -> Dict[str, Any]:
    """读取配置文件并展开为点分键"""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"配置文件不存在: {path}", code="missing_file")
    text = path.read_text(encoding='utf-8')
    if not text.strip():
        return {}
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: 第 {e.lineno} 行第 {e.colno} 列 {e.msg}", code="parse_error")
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: 顶层必须是 JSON 对象", code="parse_error")
    return flatten_dict(data)


def load_profile(name: str) -> Dict[str, Any]:
    """读取 resources/config/<name>.json"""
    if name not in PROFILES:
        raise ConfigError(f"未知配置档案: {name}，可选 {', '.join(PROFILES)}",
                          code="unknown_key", key="profile")
    return read_config_file(CONFIG_DIR / f"{name}.json")


def parse_override(text: str) -> Tuple[str, Any]:
    """解析 key=value，值按 JSON 解析，失败时作为字符串"""
    if '=' not in text:
        raise ConfigError(f"覆盖项必须是 key=value 形式: {text}", code="parse_error")
    key, raw = text.split('=', 1)
    return key.strip(), parse_scalar(raw.strip())


def merge_flat(base: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    """把覆盖项合并进 base，未知键报 unknown_key"""
    result = dict(base)
    for key, value in overrides.items():
        if key not in base:
            raise ConfigError("未知配置键", code="unknown_key", key=key)
        result[key] = value
    return result


def resolve_document(
    path: Optional[Path] = None,
    profile: Optional[str] = None,
    overrides: Optional[Dict[str, Any]] = None
) -> Dict[str, Any]:
    """按合并顺序得到最终的点分键配置"""
    flat = default_document()
    if profile:
        flat = merge_flat(flat, load_profile(profile))
    if path:
        flat = merge_flat(flat, read_config_file(path))
    if overrides:
        flat = merge_flat(flat, overrides)
    return flat


def build_configs(flat: Dict[str, Any]) -> Tuple[WorldConfig, TrainConfig, Dict[str, Any]]:
    """由点分键配置构造并校验 WorldConfig、TrainConfig 与实验参数"""
    nested = unflatten_dict(flat)
    train_data = nested.pop('train', {})
    experiment = nested.pop('experiment', {})
    try:
        world = WorldConfig.from_dict(nested)
        train = TrainConfig.from_dict(train_data)
    except (TypeError, ValueError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"配置值类型错误: {e}", code="invariant")
    try:
        world.validate()
        train.validate()
    except TypeError as e:
        raise ConfigError(f"配置值类型错误: {e}", code="invariant")
    return world, train, experiment


def load_config(
    path: Optional[Path] = None,
    profile: Optional[str] = None,
    overrides: Optional[Dict[str, Any]] = None
) -> Tuple[WorldConfig, TrainConfig]:
    """
    加载配置

    Args:
        path: 配置文件；None 表示只用默认值与档案
        profile: 'desk' 或 'paper'；None 表示纯数据类默认值
        overrides: 点分键覆盖项（命令行）

    Raises:
        ConfigError: parse_error / unknown_key / invariant / missing_file
    """
    world, train, _ = build_configs(resolve_document(path, profile, overrides))
    return world, train


# ==================== 运行目录 ====================

class RunStorage:
    """单个 (运行名, 种子) 的输出目录"""

    def __init__(self, root: Path, name: str, seed: int):
        self.root = Path(root)
        self.name = name
        self.seed = seed
        self.run_dir = self.root / name / f"seed_{seed}"

    @property
    def config_file(self) -> Path:
        return self.run_dir / RUN_CONFIG_FILE

    @property
    def metrics_file(self) -> Path:
        return self.run_dir / METRICS_FILE

    @property
    def checkpoint_dir(self) -> Path:
        return self.run_dir / CHECKPOINT_DIR

    @property
    def latest_checkpoint(self) -> Path:
        return self.checkpoint_dir / LATEST_CHECKPOINT

    def checkpoint_path(self, episode: int) -> Path:
        return self.checkpoint_dir / f"ckpt_{episode:05d}.npz"

    def trace_file(self, tag: str) -> Path:
        return self.run_dir / f"trace_{tag}.csv"

    def prepare(self, fresh: bool = True):
        """创建目录；fresh 时清除旧的指标与检查点"""
        self.run_dir.mkdir(parents=True, exist_ok=True)
        if fresh:
            if self.metrics_file.exists():
                self.metrics_file.unlink()
            if self.checkpoint_dir.exists():
                shutil.rmtree(self.checkpoint_dir)

    # ==================== 快照 ====================

    def save_snapshot(self, world: WorldConfig, train: TrainConfig,
                      seeds: Iterable[int], extra: Optional[Dict[str, Any]] = None) -> bool:
        """保存足以复现本次运行的配置快照"""
        data = {
            'name': self.name,
            'seed': self.seed,
            'seeds': list(seeds),
            'code_version': APP_VERSION,
            'checkpoint_format': CHECKPOINT_FORMAT_VERSION,
            **world.to_dict(),
            'train': train.to_dict(),
        }
        if extra:
            data['extra'] = extra
        return save_json(self.config_file, data)

    def load_snapshot(self) -> Tuple[WorldConfig, TrainConfig]:
        if not self.config_file.exists():
            raise ConfigError(f"运行目录中没有配置快照: {self.config_file}", code="missing_file")
        data = load_json(self.config_file)
        sections = {k: v for k, v in data.items() if k == 'world' or k in WorldConfig.SECTIONS}
        return WorldConfig.from_dict(sections), TrainConfig.from_dict(data.get('train', {}))

    # ==================== 指标 ====================

    def append_metrics(self, metrics: EpisodeMetrics) -> bool:
        return append_csv(self.metrics_file, METRICS_HEADER, metrics.to_row())

    def truncate_metrics(self, next_episode: int):
        """续训时丢弃检查点之后写入的行，保证回合编号连续"""
        if not self.metrics_file.exists():
            return
        lines = self.metrics_file.read_text(encoding='utf-8').splitlines(keepends=True)
        kept = lines[:1] + [ln for ln in lines[1:] if int(ln.split(',', 1)[0]) < next_episode]
        self.metrics_file.write_text(''.join(kept), encoding='utf-8')

    # ==================== 评估输出 ====================

    def write_eval(self, summary: Dict[str, Any], header: List[str], rows: List[List[Any]],
                   tag: str = "") -> bool:
        suffix = f"_{tag}" if tag else ""
        summary_path = self.run_dir / EVAL_SUMMARY_FILE.replace('.json', f'{suffix}.json')
        rows_path = self.run_dir / EVAL_EPISODES_FILE.replace('.csv', f'{suffix}.csv')
        ok = save_json(summary_path, summary)
        return write_csv(rows_path, header, rows) and ok
