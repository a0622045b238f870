# -*- coding: utf-8 -*-
"""经验回放缓冲区

按轨迹保存转移，便于在更新时逐条轨迹计算 GAE。
"""

from dataclasses import dataclass
from typing import Dict, Hashable, List

import numpy as np

from ..errors import ContractViolation


@dataclass
class Transition:
    """一次交互

    obs 为执行者输入，critic_obs / next_critic_obs 为评价者输入；
    action 对高斯头是压缩前的 u，对伯努利头是选择向量。
    """
    obs: np.ndarray
    critic_obs: np.ndarray
    action: np.ndarray
    log_prob: float
    reward: float
    done: bool
    next_critic_obs: np.ndarray
    agent: int = -1


FIELDS = ('obs', 'critic_obs', 'action', 'log_prob', 'reward', 'done', 'next_critic_obs', 'agent')


class RolloutBuffer:
    """轨迹缓冲区：add 写入打开的轨迹，close 把它归档"""

    def __init__(self):
        self._closed: List[List[Transition]] = []
        self._open: Dict[Hashable, List[Transition]] = {}

    def add(self, key: Hashable, transition: Transition):
        self._open.setdefault(key, []).append(transition)

    def close(self, key: Hashable):
        segment = self._open.pop(key, None)
        if segment:
            self._closed.append(segment)

    def close_all(self):
        for key in sorted(self._open, key=str):
            self.close(key)

    def segments(self) -> List[List[Transition]]:
        """全部轨迹段：已归档的在前，仍打开的按键排序在后"""
        return self._closed + [self._open[k] for k in sorted(self._open, key=str) if self._open[k]]

    def clear(self):
        self._closed = []
        self._open = {}

    def __len__(self) -> int:
        return sum(len(s) for s in self._closed) + sum(len(s) for s in self._open.values())

    @property
    def has_open(self) -> bool:
        return any(self._open.values())

    # ==================== 序列化 ====================

    def state_dict(self, prefix: str) -> Dict[str, np.ndarray]:
        """只允许在所有轨迹都已归档时保存（回合边界）"""
        if self.has_open:
            raise ContractViolation("缓冲区仍有未结束的轨迹，不能保存")
        flat = [t for seg in self._closed for t in seg]
        state = {f"{prefix}.lengths": np.array([len(s) for s in self._closed], dtype=np.int64)}
        for name in FIELDS:
            values = [getattr(t, name) for t in flat]
            state[f"{prefix}.{name}"] = np.array(values) if values else np.zeros(0)
        return state

    def load_state_dict(self, state: Dict[str, np.ndarray], prefix: str):
        self.clear()
        lengths = np.asarray(state[f"{prefix}.lengths"], dtype=np.int64)
        if lengths.size == 0:
            return
        arrays = {name: np.asarray(state[f"{prefix}.{name}"]) for name in FIELDS}
        pos = 0
        for length in lengths:
            segment = []
            for j in range(pos, pos + int(length)):
                segment.append(Transition(
                    obs=arrays['obs'][j].astype(np.float64),
                    critic_obs=arrays['critic_obs'][j].astype(np.float64),
                    action=arrays['action'][j].copy(),
                    log_prob=float(arrays['log_prob'][j]),
                    reward=float(arrays['reward'][j]),
                    done=bool(arrays['done'][j]),
                    next_critic_obs=arrays['next_critic_obs'][j].astype(np.float64),
                    agent=int(arrays['agent'][j]),
                ))
            self._closed.append(segment)
            pos += int(length)
