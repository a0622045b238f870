# -*- coding: utf-8 -*-
"""实验命令：训练、评估、隐蔽参数扫描、基线对比与冒烟测试

每个命令只在自己的运行目录下写文件，运行目录为 <output_dir>/<name>/seed_<seed>。
"""

import logging
from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, List, Optional

from .errors import ConfigError
from .learning.evaluator import EVAL_HEADER, EvalSummary, episode_rows, evaluate
from .learning.policies import (
    AllSelectedPolicy, HMappoPolicy, RandomDelegationPolicy, build_policy, load_hmappo_policy,
)
from .learning.trainer import HMappoTrainer
from ..data.models import ExperimentSpec, TrainConfig, WorldConfig
from ..data.storage import RunStorage
from ..utils.constants import TRACE_FILE
from ..utils.helpers import save_json, write_csv

logger = logging.getLogger(__name__)

SWEEP_HEADER = ['epsilon', 'efficiency_mean', 'efficiency_std', 'kl_mean', 'kl_std',
                'covert_fraction', 'completion_ratio']
COMPARE_HEADER = ['policy', 'axis', 'value', 'score']
# 雷达图四个坐标轴
COMPARE_AXES = ('cooperation_efficiency', 'completion_ratio', 'covertness', 'task_efficiency')
COMPARE_POLICIES = (HMappoPolicy.name, AllSelectedPolicy.name, RandomDelegationPolicy.name)


def _configs_for_seed(spec: ExperimentSpec, seed: int):
    return replace(spec.world, seed=seed), replace(spec.train, seed=seed)


def _eval_world(spec: ExperimentSpec, world: WorldConfig) -> WorldConfig:
    """评估使用与训练相同的时域"""
    return replace(world, high_horizon=spec.train.high_steps, low_horizon=spec.train.low_steps)


def _checkpoint_for(spec: ExperimentSpec, storage: RunStorage) -> Path:
    path = Path(spec.checkpoint) if spec.checkpoint else storage.latest_checkpoint
    if not path.exists():
        raise ConfigError(f"找不到检查点: {path}", code="missing_checkpoint")
    return path


# ==================== train ====================

def _check_resume_world(storage: RunStorage, world: WorldConfig):
    """续训前核对运行目录快照中的世界配置；训练参数（如回合数）允许改变"""
    if not storage.config_file.exists():
        return
    saved_world, _ = storage.load_snapshot()
    if saved_world != world:
        raise ConfigError(f"世界配置与运行目录中的快照不一致: {storage.config_file}",
                          code="invariant", key="world")


def cmd_train(spec: ExperimentSpec, resume: bool = False) -> List[Path]:
    """
    按种子列表逐个训练，写配置快照、指标 CSV 与检查点

    Args:
        resume: 从 spec.checkpoint（缺省为运行目录的 latest.npz）续训

    Returns:
        各种子的运行目录
    """
    spec.validate()
    run_dirs = []
    for seed in spec.seeds:
        world, train = _configs_for_seed(spec, seed)
        storage = RunStorage(Path(spec.output_dir), spec.name, seed)
        trainer = HMappoTrainer(world, train, storage)
        if resume:
            checkpoint = _checkpoint_for(spec, storage)
            _check_resume_world(storage, world)
            storage.prepare(fresh=False)
            trainer.load(checkpoint)
            storage.truncate_metrics(trainer.episode)
        else:
            storage.prepare(fresh=True)
        storage.save_snapshot(world, train, spec.seeds)
        logger.info("开始训练 %s seed=%d，共 %d 回合", spec.name, seed, train.episodes)
        trainer.train()
        if spec.trace:
            policy = HMappoPolicy.from_model(trainer.model)
            evaluate(policy, _eval_world(spec, world), 1, seed,
                     trace_path=storage.run_dir / TRACE_FILE)
        run_dirs.append(storage.run_dir)
    return run_dirs


# ==================== eval ====================

def evaluate_run(spec: ExperimentSpec, seed: int, kind: str = HMappoPolicy.name,
                 checkpoint: Optional[Path] = None) -> EvalSummary:
    """加载某个种子的检查点，按名称构造策略并评估，结果写入运行目录"""
    world, train = _configs_for_seed(spec, seed)
    storage = RunStorage(Path(spec.output_dir), spec.name, seed)
    path = checkpoint or _checkpoint_for(spec, storage)
    base = load_hmappo_policy(path, world, train)
    policy = build_policy(kind, base, world)
    trace = storage.trace_file(kind) if spec.trace else None
    summary, rows = evaluate(policy, _eval_world(spec, world), spec.eval_episodes, seed, trace)
    storage.run_dir.mkdir(parents=True, exist_ok=True)
    storage.write_eval(summary.to_dict(), EVAL_HEADER, episode_rows(rows), tag=kind)
    return summary


def cmd_eval(spec: ExperimentSpec, kind: str = HMappoPolicy.name) -> List[EvalSummary]:
    """评估每个种子的检查点"""
    spec.validate()
    return [evaluate_run(spec, seed, kind) for seed in spec.seeds]


# ==================== sweep-epsilon ====================

def cmd_sweep_epsilon(spec: ExperimentSpec) -> List[Dict[str, Any]]:
    """
    对每个 ε_c 训练（或在 eval_only 时加载）并评估，写出汇总表

    Returns:
        每个 ε_c 一行：效率与 KL 的均值/标准差、隐蔽比例、完成率
    """
    spec.validate()
    if len(spec.epsilons) < 2:
        raise ConfigError("扫描至少需要两个 ε_c", code="invariant", key="experiment.epsilons")
    seed = spec.seeds[0]
    table = []
    for eps in spec.epsilons:
        sub = replace(spec, name=f"{spec.name}/eps_{eps:g}", world=spec.world.with_epsilon(eps),
                      seeds=[seed], checkpoint=None)
        storage = RunStorage(Path(sub.output_dir), sub.name, seed)
        if sub.eval_only:
            if not storage.latest_checkpoint.exists():
                raise ConfigError(f"ε_c={eps:g} 缺少检查点: {storage.latest_checkpoint}",
                                  code="missing_checkpoint")
        else:
            cmd_train(sub)
        summary = evaluate_run(sub, seed)
        table.append({
            'epsilon': eps,
            'efficiency_mean': summary.mean('efficiency') if not summary.empty else 0.0,
            'efficiency_std': summary.std('efficiency') if not summary.empty else 0.0,
            'kl_mean': summary.mean('mean_kl') if not summary.empty else 0.0,
            'kl_std': summary.std('mean_kl') if not summary.empty else 0.0,
            'covert_fraction': summary.mean('covert_fraction') if not summary.empty else 1.0,
            'completion_ratio': summary.mean('completion_ratio') if not summary.empty else 0.0,
        })
    out = Path(spec.output_dir) / spec.name / "sweep_epsilon.csv"
    write_csv(out, SWEEP_HEADER, [[row[k] for k in SWEEP_HEADER] for row in table])
    logger.info("ε_c 扫描完成，结果写入 %s", out)
    return table


# ==================== compare ====================

def compare_axes(summary: EvalSummary) -> Dict[str, float]:
    """
    四个坐标轴的原始值

    协作效率取每时隙 η 的均值；任务效率取平均覆盖率与平均时延之比。
    """
    if summary.empty:
        return {axis: 0.0 for axis in COMPARE_AXES}
    delay = summary.mean('task_delay')
    return {
        'cooperation_efficiency': summary.mean('efficiency'),
        'completion_ratio': summary.mean('completion_ratio'),
        'covertness': summary.mean('covert_fraction'),
        'task_efficiency': summary.mean('coverage') / delay if delay > 0 else 0.0,
    }


def normalize_scores(raw: Dict[str, Dict[str, float]]) -> Dict[str, Dict[str, float]]:
    """每个坐标轴在各策略之间做 min-max 归一化；全部相等时都记为 1"""
    scores: Dict[str, Dict[str, float]] = {p: {} for p in raw}
    for axis in COMPARE_AXES:
        values = [raw[p][axis] for p in raw]
        lo, hi = min(values), max(values)
        for p in raw:
            scores[p][axis] = 1.0 if hi == lo else (raw[p][axis] - lo) / (hi - lo)
    return scores


def cmd_compare(spec: ExperimentSpec) -> List[List[Any]]:
    """
    H-MAPPO、扁平 MAPPO（全选）与随机委派在相同种子下评估并对比

    Returns:
        3 个策略 × 4 个坐标轴的行：policy, axis, value, score
    """
    spec.validate()
    seed = spec.seeds[0]
    world, train = _configs_for_seed(spec, seed)
    storage = RunStorage(Path(spec.output_dir), spec.name, seed)
    base = load_hmappo_policy(_checkpoint_for(spec, storage), world, train)
    eval_world = _eval_world(spec, world)

    raw: Dict[str, Dict[str, float]] = {}
    summaries = {}
    for kind in COMPARE_POLICIES:
        summary, _ = evaluate(build_policy(kind, base, world), eval_world, spec.eval_episodes, seed)
        summaries[kind] = summary.to_dict()
        raw[kind] = compare_axes(summary)
    scores = normalize_scores(raw)
    rows = [[kind, axis, raw[kind][axis], scores[kind][axis]]
            for kind in COMPARE_POLICIES for axis in COMPARE_AXES]
    out_dir = Path(spec.output_dir) / spec.name
    write_csv(out_dir / "compare.csv", COMPARE_HEADER, rows)
    save_json(out_dir / "compare_summary.json", summaries)
    logger.info("对比完成，结果写入 %s", out_dir / "compare.csv")
    return rows


# ==================== smoke ====================

SMOKE_WORLD = {'n_auvs': 2, 'high_horizon': 2, 'low_horizon': 5}
SMOKE_TRAIN = {'episodes': 2, 'high_steps': 2, 'low_steps': 5, 'batch_auv': 8,
               'batch_central': 2, 'minibatch_size': 8, 'hidden': (16, 16), 'checkpoint_every': 1}


def smoke_spec(spec: ExperimentSpec) -> ExperimentSpec:
    """把任意实验描述缩小成秒级的端到端运行"""
    return replace(
        spec,
        name=f"{spec.name}-smoke" if not spec.name.endswith("smoke") else spec.name,
        world=replace(spec.world, **SMOKE_WORLD),
        train=replace(spec.train, **SMOKE_TRAIN),
        seeds=spec.seeds[:1],
        eval_episodes=1,
        trace=True,
    )


def cmd_smoke(spec: ExperimentSpec) -> Path:
    """训练两个小回合、评估一个回合并导出轨迹"""
    small = smoke_spec(spec)
    run_dir = cmd_train(small)[0]
    evaluate_run(small, small.seeds[0])
    logger.info("冒烟测试完成: %s", run_dir)
    return run_dir


def build_spec(name: str, world: WorldConfig, train: TrainConfig, experiment: Dict[str, Any],
               output_dir: Path, **kwargs) -> ExperimentSpec:
    """由配置文档中的 experiment.* 段与命令行参数构造实验描述"""
    return ExperimentSpec(
        name=name,
        world=world,
        train=train,
        output_dir=str(output_dir),
        seeds=[int(s) for s in experiment.get('seeds', [0])],
        epsilons=[float(e) for e in experiment.get('epsilons', [0.01, 0.05, 0.1, 0.2])],
        eval_episodes=int(experiment.get('eval_episodes', 200)),
        **kwargs,
    ).validate()
