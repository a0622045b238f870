# -*- coding: utf-8 -*-
"""通用工具函数"""

import csv
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def setup_logging(level: str = "INFO"):
    """配置根日志器"""
    logging.basicConfig(level=getattr(logging, level.upper(), logging.INFO), format=LOG_FORMAT)


def load_json(file_path: Path, default: Any = None) -> Any:
    """安全加载 JSON 文件，失败时返回默认值"""
    try:
        if file_path.exists():
            with open(file_path, 'r', encoding='utf-8') as f:
                return json.load(f)
    except (json.JSONDecodeError, IOError) as e:
        logger.warning("加载 JSON 文件失败 %s: %s", file_path, e)
    return default if default is not None else {}


def save_json(file_path: Path, data: Any, indent: int = 2) -> bool:
    """安全保存 JSON 文件"""
    try:
        file_path.parent.mkdir(parents=True, exist_ok=True)
        with open(file_path, 'w', encoding='utf-8') as f:
            json.dump(data, f, ensure_ascii=False, indent=indent, default=_json_default)
        return True
    except IOError as e:
        logger.error("保存 JSON 文件失败 %s: %s", file_path, e)
        return False


def _json_default(obj: Any) -> Any:
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return str(obj)


def format_cell(value: Any) -> str:
    """CSV 单元格格式化：浮点数用 repr 保证可逐字节复现"""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(file_path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> bool:
    """写入带表头的 CSV（覆盖）"""
    try:
        file_path.parent.mkdir(parents=True, exist_ok=True)
        with open(file_path, 'w', encoding='utf-8', newline='') as f:
            writer = csv.writer(f)
            writer.writerow(header)
            for row in rows:
                writer.writerow([format_cell(v) for v in row])
        return True
    except IOError as e:
        logger.error("写入 CSV 失败 %s: %s", file_path, e)
        return False


def append_csv(file_path: Path, header: Sequence[str], row: Sequence[Any]) -> bool:
    """追加一行，文件不存在时先写表头"""
    try:
        file_path.parent.mkdir(parents=True, exist_ok=True)
        new_file = not file_path.exists()
        with open(file_path, 'a', encoding='utf-8', newline='') as f:
            writer = csv.writer(f)
            if new_file:
                writer.writerow(header)
            writer.writerow([format_cell(v) for v in row])
        return True
    except IOError as e:
        logger.error("追加 CSV 失败 %s: %s", file_path, e)
        return False


def read_csv(file_path: Path) -> List[Dict[str, str]]:
    """读取 CSV 为字典列表"""
    with open(file_path, 'r', encoding='utf-8', newline='') as f:
        return list(csv.DictReader(f))


def flatten_dict(data: Dict[str, Any], prefix: str = "") -> Dict[str, Any]:
    """嵌套字典展开为点分键 {'a': {'b': 1}} -> {'a.b': 1}"""
    flat: Dict[str, Any] = {}
    for key, value in data.items():
        full = f"{prefix}.{key}" if prefix else key
        if isinstance(value, dict):
            flat.update(flatten_dict(value, full))
        else:
            flat[full] = value
    return flat


def unflatten_dict(flat: Dict[str, Any]) -> Dict[str, Any]:
    """点分键还原为嵌套字典"""
    result: Dict[str, Any] = {}
    for key, value in flat.items():
        parts = key.split('.')
        node = result
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value
    return result


def parse_scalar(text: str) -> Any:
    """把命令行中的值解析为 JSON 标量或列表，失败时原样返回字符串"""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def mean_std(values: Sequence[float]) -> Optional[Dict[str, float]]:
    """均值与总体标准差，空序列返回 None"""
    if len(values) == 0:
        return None
    arr = np.asarray(values, dtype=np.float64)
    return {'mean': float(arr.mean()), 'std': float(arr.std())}
