"""
多 seed 的比較實驗，對應三組方向性結果：

- walk：Perfect Speaker、Oracle Listener、Intrinsic、Simple 只訓練 WALK，比較 held-out 成功率
- topsim：Intrinsic、Simple、只用 intrinsic reward 三種設定的最終 topsim
- zeroshot：Intrinsic 與 Simple 在 visual / numeral 切分上的 zero-shot 成功率

每一次訓練都是一個 (preset, split, seed)，結果攤平成 long format 的 DataFrame，
再依 DataFrame 做方向性檢查。
"""
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from trainer.config import RunConfig, load_config

PRESETS = {
    'intrinsic': {},
    'simple': {'use_coverage': False, 'use_influence': False},
    'perfect': {'speaker': 'perfect'},
    'oracle': {'speaker': 'none', 'oracle_listener': True},
    'intrinsic_only': {'env_reward': False},
}

# zero-shot 比較只看這些 test task class
ZERO_SHOT_TASKS = {
    'visual': ('walk_light', 'walk_heavy'),
    'numeral': ('pull_heavy',),
}

WALK_TARGET = 0.9
WALK_GAP = 0.10
TOPSIM_INTRINSIC_MEAN = 0.6
TOPSIM_INTRINSIC_ONLY = 0.5
SEED_QUORUM = 0.6
SUMMARY_COLUMNS = ['experiment', 'preset', 'split', 'seed', 'metric', 'value', 'episodes']


@dataclass(frozen=True)
class Experiment:
    name: str
    presets: tuple
    overrides: dict = field(default_factory=dict)
    splits: tuple = ('none',)


EXPERIMENTS = {
    'walk': Experiment('walk', ('perfect', 'oracle', 'intrinsic', 'simple'), {'task': 'walk'}),
    'topsim': Experiment('topsim', ('intrinsic', 'simple', 'intrinsic_only')),
    'zeroshot': Experiment('zeroshot', ('intrinsic', 'simple'), splits=('visual', 'numeral')),
}


@dataclass(frozen=True)
class PlannedRun:
    experiment: str
    preset: str
    split: str
    seed: int
    config: RunConfig


@dataclass(frozen=True)
class Check:
    description: str
    ok: bool
    detail: str


def seed_quorum(seeds: int) -> int:
    return max(1, math.ceil(SEED_QUORUM * seeds))


def plan_runs(name: str, seeds, output_root, overrides: dict | None = None) -> list:
    """依 preset × split × seed 展開 RunConfig；overrides 套在所有 run 上，最後才套 preset 本身"""
    experiment = EXPERIMENTS[name]
    planned = []
    for preset in experiment.presets:
        for split in experiment.splits:
            for seed in seeds:
                output_dir = Path(output_root) / name / preset / split / f'seed{seed}'
                values = {
                    **experiment.overrides,
                    **(overrides or {}),
                    **PRESETS[preset],
                    'split': split,
                    'seed': seed,
                    'output_dir': str(output_dir),
                }
                planned.append(PlannedRun(name, preset, split, seed, load_config(overrides=values)))
    return planned


def run_rows(run: PlannedRun, heldout: dict, topsim: float | None, zero_shot=()) -> list:
    """一次 run 的結果轉成 summary 的多筆資料；zero_shot 為 TaskAccuracy 列表"""
    base = {'experiment': run.experiment, 'preset': run.preset, 'split': run.split, 'seed': run.seed}
    rows = [
        {**base, 'metric': f'heldout_{task}', 'value': value, 'episodes': run.config.heldout_episodes}
        for task, value in heldout.items()
    ]
    if heldout:
        rows.append({**base, 'metric': 'heldout_mean', 'value': float(np.mean(list(heldout.values()))),
                     'episodes': run.config.heldout_episodes})
    if topsim is not None:
        rows.append({**base, 'metric': 'topsim', 'value': topsim, 'episodes': 0})
    rows.extend(
        {**base, 'metric': f'zeroshot_{result.task_class}', 'value': result.accuracy, 'episodes': result.episodes}
        for result in zero_shot
    )
    return rows


def summary_frame(rows) -> pd.DataFrame:
    return pd.DataFrame(rows, columns=SUMMARY_COLUMNS)


def _per_seed(frame: pd.DataFrame, preset: str, metric: str) -> pd.Series:
    selected = frame[(frame['preset'] == preset) & (frame['metric'] == metric)]
    return selected.groupby('seed')['value'].mean()


def _pooled(frame: pd.DataFrame, preset: str, split: str, metrics) -> float:
    """多個 seed 的成功次數合併後的成功率"""
    selected = frame[(frame['preset'] == preset) & (frame['split'] == split) & frame['metric'].isin(metrics)]
    episodes = selected['episodes'].sum()
    return float((selected['value'] * selected['episodes']).sum() / episodes) if episodes else float('nan')


def walk_checks(frame: pd.DataFrame) -> list:
    checks = []
    for preset in ('perfect', 'oracle'):
        values = _per_seed(frame, preset, 'heldout_mean')
        checks.append(Check(
            f'{preset} WALK held-out ≥ {WALK_TARGET:.0%}',
            bool(len(values)) and bool((values >= WALK_TARGET).all()),
            ' '.join(f'{value:.3f}' for value in values),
        ))
    perfect = _per_seed(frame, 'perfect', 'heldout_mean')
    intrinsic = _per_seed(frame, 'intrinsic', 'heldout_mean')
    common = perfect.index.intersection(intrinsic.index)
    close = int(((perfect[common] - intrinsic[common]) <= WALK_GAP).sum())
    needed = seed_quorum(len(common))
    checks.append(Check(
        f'intrinsic 與 perfect 差距 ≤ {WALK_GAP:.0%}',
        len(common) > 0 and close >= needed,
        f'{close}/{len(common)} 個 seed（需要 {needed}）',
    ))
    return checks


def topsim_checks(frame: pd.DataFrame) -> list:
    intrinsic = _per_seed(frame, 'intrinsic', 'topsim')
    simple = _per_seed(frame, 'simple', 'topsim')
    intrinsic_only = _per_seed(frame, 'intrinsic_only', 'topsim')
    needed = seed_quorum(len(intrinsic_only))
    reached = int((intrinsic_only >= TOPSIM_INTRINSIC_ONLY).sum())
    return [
        Check('topsim：intrinsic > simple', bool(intrinsic.mean() > simple.mean()),
              f'{intrinsic.mean():.3f} vs {simple.mean():.3f}'),
        Check(f'topsim：intrinsic 平均 ≥ {TOPSIM_INTRINSIC_MEAN}',
              bool(intrinsic.mean() >= TOPSIM_INTRINSIC_MEAN), f'{intrinsic.mean():.3f}'),
        Check(f'topsim：只用 intrinsic reward ≥ {TOPSIM_INTRINSIC_ONLY}',
              len(intrinsic_only) > 0 and reached >= needed,
              f'{reached}/{len(intrinsic_only)} 個 seed（需要 {needed}）'),
    ]


def zero_shot_checks(frame: pd.DataFrame) -> list:
    checks = []
    for split, tasks in ZERO_SHOT_TASKS.items():
        metrics = [f'zeroshot_{task}' for task in tasks]
        intrinsic = _pooled(frame, 'intrinsic', split, metrics)
        simple = _pooled(frame, 'simple', split, metrics)
        checks.append(Check(
            f'zero-shot {split} {"/".join(tasks)}：intrinsic > simple',
            bool(intrinsic > simple),
            f'{intrinsic:.4f} vs {simple:.4f}',
        ))
    return checks


CHECKS = {
    'walk': walk_checks,
    'topsim': topsim_checks,
    'zeroshot': zero_shot_checks,
}
