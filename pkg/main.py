#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
covert-auv - 多 AUV 隐蔽协同探测仿真与 H-MAPPO 训练
主入口文件
"""

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

# 确保项目路径在 sys.path 中
project_root = os.path.dirname(os.path.abspath(__file__))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from src.core.errors import SimulatorError  # noqa: E402
from src.core.experiments import (  # noqa: E402
    build_spec, cmd_compare, cmd_eval, cmd_smoke, cmd_sweep_epsilon, cmd_train,
)
from src.core.learning.policies import POLICY_KINDS  # noqa: E402
from src.data.storage import build_configs, parse_override, resolve_document  # noqa: E402
from src.utils.constants import (  # noqa: E402
    APP_NAME, APP_VERSION, DEFAULT_OUTPUT_DIR, DEFAULT_PROFILE, EXIT_OK, EXIT_SIMULATOR_ERROR,
    PROFILES,
)
from src.utils.helpers import setup_logging  # noqa: E402

logger = logging.getLogger(APP_NAME)

COMMANDS = ('train', 'eval', 'sweep-epsilon', 'compare', 'smoke')


def build_parser() -> argparse.ArgumentParser:
    """命令行参数"""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', type=Path, help='JSON 配置文件（嵌套段或点分键）')
    common.add_argument('--profile', choices=PROFILES, default=DEFAULT_PROFILE,
                        help=f'配置档案，默认 {DEFAULT_PROFILE}')
    common.add_argument('--seed', type=int, action='append',
                        help='随机种子，可重复给出多个')
    common.add_argument('--out', type=Path, default=DEFAULT_OUTPUT_DIR, help='输出根目录')
    common.add_argument('--episodes', type=int, help='训练回合数')
    common.add_argument('--eval-episodes', type=int, help='评估回合数')
    common.add_argument('--name', help='运行名，默认取子命令名')
    common.add_argument('--set', dest='overrides', action='append', default=[],
                        metavar='KEY=VALUE', help='覆盖任意配置键，例如 covertness.epsilon_c=0.01')
    common.add_argument('--checkpoint', type=Path, help='检查点路径')
    common.add_argument('--trace', action='store_true', help='导出逐时间片轨迹 CSV')
    common.add_argument('--log-level', default='INFO',
                        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'])

    parser = argparse.ArgumentParser(prog=APP_NAME, description=__doc__)
    parser.add_argument('--version', action='version', version=f'{APP_NAME} {APP_VERSION}')
    sub = parser.add_subparsers(dest='command', required=True)

    train = sub.add_parser('train', parents=[common], help='训练 H-MAPPO')
    train.add_argument('--resume', action='store_true', help='从检查点续训')

    ev = sub.add_parser('eval', parents=[common], help='评估检查点')
    ev.add_argument('--policy', choices=POLICY_KINDS, default=POLICY_KINDS[0])

    sweep = sub.add_parser('sweep-epsilon', parents=[common], help='扫描隐蔽参数 ε_c')
    sweep.add_argument('--epsilons', type=float, nargs='+', help='ε_c 列表')
    sweep.add_argument('--eval-only', action='store_true', help='只加载已有检查点评估')

    sub.add_parser('compare', parents=[common], help='与基线策略对比')
    sub.add_parser('smoke', parents=[common], help='秒级端到端冒烟测试')
    return parser


def collect_overrides(args: argparse.Namespace) -> dict:
    """--set 覆盖项，再叠加显式参数"""
    overrides = dict(parse_override(item) for item in args.overrides)
    if args.episodes is not None:
        overrides['train.episodes'] = args.episodes
    if args.eval_episodes is not None:
        overrides['experiment.eval_episodes'] = args.eval_episodes
    if args.seed:
        overrides['experiment.seeds'] = args.seed
    if getattr(args, 'epsilons', None):
        overrides['experiment.epsilons'] = args.epsilons
    return overrides


def run(argv: Optional[List[str]] = None) -> int:
    """解析参数并执行子命令，返回退出码"""
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    try:
        document = resolve_document(args.config, args.profile, collect_overrides(args))
        world, train, experiment = build_configs(document)
        spec = build_spec(
            args.name or args.command, world, train, experiment, args.out,
            eval_only=getattr(args, 'eval_only', False),
            checkpoint=str(args.checkpoint) if args.checkpoint else None,
            trace=args.trace,
        )
        if args.command == 'train':
            for run_dir in cmd_train(spec, resume=args.resume):
                print(run_dir)
        elif args.command == 'eval':
            for summary in cmd_eval(spec, args.policy):
                print(summary.to_dict())
        elif args.command == 'sweep-epsilon':
            for row in cmd_sweep_epsilon(spec):
                print(row)
        elif args.command == 'compare':
            for row in cmd_compare(spec):
                print(','.join(str(v) for v in row))
        elif args.command == 'smoke':
            print(cmd_smoke(spec))
    except SimulatorError as e:
        logger.error("%s", e)
        return EXIT_SIMULATOR_ERROR
    return EXIT_OK


def main():
    """应用主入口"""
    sys.exit(run())


if __name__ == "__main__":
    main()
