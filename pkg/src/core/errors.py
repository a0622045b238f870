# -*- coding: utf-8 -*-
"""异常定义"""

from typing import Optional


class SimulatorError(Exception):
    """仿真器异常基类"""


class DomainError(SimulatorError, ValueError):
    """物理/数学函数的参数超出定义域"""


class ContractViolation(SimulatorError, RuntimeError):
    """环境或训练器的调用协议被违反"""


class ConfigError(SimulatorError, ValueError):
    """配置错误

    code 取值: parse_error, unknown_key, invariant, missing_file, missing_checkpoint
    """

    def __init__(self, message: str, code: str = "invariant", key: Optional[str] = None):
        super().__init__(message)
        self.code = code
        self.key = key

    def __str__(self) -> str:
        prefix = f"[{self.code}]"
        if self.key:
            prefix += f" {self.key}:"
        return f"{prefix} {super().__str__()}"


def require(condition: bool, message: str, key: Optional[str] = None):
    """配置不变量检查，不满足时抛出 ConfigError(invariant)"""
    if not condition:
        raise ConfigError(message, code="invariant", key=key)
