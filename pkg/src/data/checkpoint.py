# -*- coding: utf-8 -*-
"""检查点读写

检查点是一个 numpy .npz 归档：所有权重、对数标准差、Adam 矩与步数、缓冲区内容，
外加两个保留条目：格式版本字符串与 JSON 编码的元数据（计数器、RNG 状态）。
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Tuple

import numpy as np
from packaging import version

from ..core.errors import ConfigError
from ..utils.constants import APP_VERSION, CHECKPOINT_FORMAT_VERSION

logger = logging.getLogger(__name__)

FORMAT_KEY = "__format_version__"
META_KEY = "__meta__"


def is_compatible(found: str, current: str = CHECKPOINT_FORMAT_VERSION) -> bool:
    """主版本一致且不晚于当前版本"""
    try:
        v_found = version.parse(found)
        v_current = version.parse(current)
    except version.InvalidVersion:
        return False
    return v_found.major == v_current.major and v_found <= v_current


def save_checkpoint(path: Path, arrays: Dict[str, np.ndarray], meta: Dict[str, Any]) -> Path:
    """
    保存检查点

    Args:
        path: 目标文件，后缀会被规范为 .npz
        arrays: 名称 -> 数组
        meta: 可 JSON 序列化的元数据

    Returns:
        实际写入的路径
    """
    path = Path(path).with_suffix(".npz")
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = {**meta, 'code_version': APP_VERSION}
    payload = {
        FORMAT_KEY: np.array(CHECKPOINT_FORMAT_VERSION),
        META_KEY: np.array(json.dumps(meta, sort_keys=True)),
    }
    payload.update(arrays)
    tmp = path.with_name(path.stem + ".tmp.npz")
    np.savez(tmp, **payload)
    tmp.replace(path)
    logger.debug("检查点已保存 %s（%d 个数组）", path, len(arrays))
    return path


def load_checkpoint(path: Path) -> Tuple[Dict[str, np.ndarray], Dict[str, Any]]:
    """
    加载检查点

    Returns:
        (数组字典, 元数据)

    Raises:
        ConfigError: 文件不存在 (missing_checkpoint) 或格式版本不兼容 (invariant)
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"检查点不存在: {path}", code="missing_checkpoint")
    with np.load(path, allow_pickle=False) as data:
        if FORMAT_KEY not in data.files or META_KEY not in data.files:
            raise ConfigError(f"不是有效的检查点文件: {path}", code="parse_error")
        found = str(data[FORMAT_KEY])
        if not is_compatible(found):
            raise ConfigError(
                f"检查点格式 {found} 与当前格式 {CHECKPOINT_FORMAT_VERSION} 不兼容",
                code="invariant",
            )
        meta = json.loads(str(data[META_KEY]))
        arrays = {k: data[k] for k in data.files if k not in (FORMAT_KEY, META_KEY)}
    return arrays, meta


def rng_state(rng: np.random.Generator) -> str:
    """RNG 位发生器状态的 JSON 字符串"""
    return json.dumps(rng.bit_generator.state)


def restore_rng(state: str) -> np.random.Generator:
    data = json.loads(state)
    rng = np.random.Generator(getattr(np.random, data['bit_generator'])())
    rng.bit_generator.state = data
    return rng
