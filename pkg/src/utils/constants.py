# -*- coding: utf-8 -*-
"""常量定义"""

import json
import os
from pathlib import Path

# 路径配置
PROJECT_ROOT = Path(__file__).parent.parent.parent
RESOURCES_ROOT = PROJECT_ROOT / "resources"
CONFIG_DIR = RESOURCES_ROOT / "config"
VERSION_FILE = PROJECT_ROOT / "version.json"


def _read_version() -> str:
    try:
        with open(VERSION_FILE, 'r', encoding='utf-8') as f:
            return json.load(f).get('version', '0.0.0')
    except (OSError, json.JSONDecodeError):
        return "0.0.0"


# 应用信息
APP_NAME = "covert-auv"
APP_VERSION = _read_version()

# 检查点格式版本：主版本不同则拒绝加载
CHECKPOINT_FORMAT_VERSION = "1.0"

# 运行输出根目录，可由环境变量覆盖
OUTPUT_ENV_VAR = "COVERT_AUV_OUTPUT"
DEFAULT_OUTPUT_DIR = Path(os.environ.get(OUTPUT_ENV_VAR, "./runs"))

# 配置档案
PROFILES = ("desk", "paper")
DEFAULT_PROFILE = "desk"

# 运行目录内的文件名
RUN_CONFIG_FILE = "config.json"
METRICS_FILE = "metrics.csv"
CHECKPOINT_DIR = "checkpoints"
LATEST_CHECKPOINT = "latest.npz"
EVAL_SUMMARY_FILE = "eval_summary.json"
EVAL_EPISODES_FILE = "eval_episodes.csv"
TRACE_FILE = "trace.csv"

# CLI 退出码
EXIT_OK = 0
EXIT_SIMULATOR_ERROR = 2
