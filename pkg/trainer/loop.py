"""
訓練主迴圈：curriculum 抽 task → 產生 episode → intrinsic reward → 每滿一個 batch 做 REINFORCE 更新。

每 eval_every 回合（含第 0 回合）做一次 held-out 評估、curriculum 更新與 topsim 快照；
整個流程只由 (config, seed) 決定，評估使用推導出來的 rng，不會動到訓練用的 rng。
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
from django.conf import settings

from concepts.splits import SplitMode, make_split
from diffcore.checkpoint import save_checkpoint
from gridworld.generator import EmptyTaskClass, generate_episode
from intrinsic.buffer import PairBuffer
from intrinsic.discriminator import train_discriminator
from trainer.agents import AgentSet, agent_language_table, build_agents
from trainer.config import RunConfig, format_config
from trainer.curriculum import CurriculumState, sample_task, update_curriculum
from trainer.episode import Trajectory, run_episode
from trainer.evaluation import evaluate_heldout, task_classes_for
from trainer.reinforce import ReturnBaselines, reinforce_update
from trainer.topsim import topsim

logger = logging.getLogger(__name__)

EFFECTIVE_CONFIG_NAME = 'effective.cfg'
METRICS_NAME = 'metrics.csv'
CHECKPOINT_NAME = 'checkpoint.bin'
CSV_FLOAT_FORMAT = '%.6f'


@dataclass
class Snapshot:
    episode: int
    heldout: dict
    topsim: float
    lp: dict


@dataclass
class TrainingResult:
    output_dir: Path
    metrics_path: Path
    checkpoint_path: Path
    episodes: int
    final: Snapshot
    snapshots: list = field(default_factory=list)


def resolve_output_dir(config: RunConfig) -> Path:
    output_dir = Path(config.output_dir)
    if not output_dir.is_absolute():
        output_dir = Path(settings.LAB_OUTPUT_DIR) / output_dir
    return output_dir


def metrics_columns(task_classes) -> list:
    return (
        ['episode', 'task_class', 'r_env', 'r_cov', 'r_inf_sum', 'success']
        + [f'heldout_success_{task}' for task in task_classes]
        + ['topsim']
        + [f'lp_{task}' for task in task_classes]
    )


def evaluation_seed(seed: int, episode: int) -> int:
    return int(np.random.SeedSequence([seed, episode]).generate_state(1)[0])


def _heldout(agents: AgentSet, config: RunConfig, split, task_classes, seed: int) -> list:
    if settings.HELDOUT_USE_CELERY:
        from celery_app.tasks.evaluation import dispatch_heldout
        return dispatch_heldout(
            agents, format_config(config), config.split, task_classes,
            config.heldout_episodes, seed, SplitMode.TRAIN, config.t_max,
        )
    return evaluate_heldout(agents, split, task_classes, config.heldout_episodes, seed, t_max=config.t_max)


def _metrics_row(episode: int, trajectory: Trajectory, snapshot: Snapshot, task_classes) -> dict:
    row = {
        'episode': episode,
        'task_class': trajectory.task_class,
        'r_env': float(np.sum(trajectory.env_rewards)),
        'r_cov': float(trajectory.coverage_reward),
        'r_inf_sum': float(np.sum(trajectory.influence_rewards)),
        'success': int(trajectory.success),
    }
    row.update({f'heldout_success_{task}': snapshot.heldout[task] for task in task_classes})
    row['topsim'] = snapshot.topsim
    row.update({f'lp_{task}': snapshot.lp[task] for task in task_classes})
    return row


def write_metrics(path: Path, rows: list, task_classes) -> Path:
    frame = pd.DataFrame(rows, columns=metrics_columns(task_classes))
    frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, na_rep='')
    return path


def train(config: RunConfig, progress=None) -> TrainingResult:
    """
    執行一次完整訓練，輸出 effective.cfg、metrics.csv 與 checkpoint.bin。
    progress(snapshot) 會在每次 held-out 評估後呼叫。
    """
    output_dir = resolve_output_dir(config)
    output_dir.mkdir(parents=True, exist_ok=True)
    config_text = format_config(config)
    (output_dir / EFFECTIVE_CONFIG_NAME).write_text(config_text, encoding='utf-8')

    rng = np.random.default_rng(config.seed)
    split = make_split(config.split)
    task_classes = task_classes_for(split, SplitMode.TRAIN, config.task_verb)
    if not task_classes:
        raise EmptyTaskClass(f"split={config.split} task={config.task} 沒有可訓練的 task class")

    agents = build_agents(config, rng)
    curriculum = CurriculumState.initial(task_classes, config.curriculum_beta, config.curriculum_eps_mix)
    baselines = ReturnBaselines(beta=config.baseline_beta)
    buffer = PairBuffer(config.buffer_capacity)
    learning_rates = {'speaker': config.lr_speaker, 'listener': config.lr_listener}
    checkpoint_path = output_dir / CHECKPOINT_NAME

    logger.info(f"開始訓練：{config.episodes} 回合，task classes={task_classes}，輸出至 {output_dir}")

    snapshots = []

    def take_snapshot(episode: int) -> Snapshot:
        nonlocal curriculum
        results = _heldout(agents, config, split, task_classes, evaluation_seed(config.seed, episode))
        heldout = {result.task_class: result.accuracy for result in results}
        curriculum, _ = update_curriculum(curriculum, heldout)
        table = agent_language_table(agents)
        topsim_value = topsim(table).value if table is not None else float('nan')
        snapshot = Snapshot(
            episode=episode,
            heldout=heldout,
            topsim=topsim_value,
            lp=dict(zip(task_classes, curriculum.lp.tolist())),
        )
        snapshots.append(snapshot)
        logger.info(f"第 {episode} 回合 held-out={heldout} topsim={topsim_value:.4f}")
        if progress is not None:
            progress(snapshot)
        return snapshot

    rows = []
    batch = []
    snapshot = None
    for episode in range(config.episodes):
        if episode % config.eval_every == 0:
            snapshot = take_snapshot(episode)

        task_class = sample_task(curriculum, rng)
        state = generate_episode(rng, split, SplitMode.TRAIN, task_filter=task_class, t_max=config.t_max)
        trajectory = run_episode(state, agents, rng, mode='train', config=config)
        rows.append(_metrics_row(episode, trajectory, snapshot, task_classes))

        if agents.discriminator is not None:
            buffer.add(trajectory.concept, trajectory.message)

        batch.append(trajectory)
        if len(batch) == config.batch_size:
            reinforce_update(batch, agents, baselines, config.gamma, learning_rates)
            batch = []

        if (agents.discriminator is not None and config.use_coverage
                and (episode + 1) % config.disc_every == 0 and len(buffer) >= config.disc_batch_size):
            train_discriminator(agents.discriminator, buffer, config.disc_batches, config.disc_batch_size,
                                rng, lr=config.lr_discriminator)

        if (episode + 1) % config.checkpoint_every == 0:
            save_checkpoint(checkpoint_path, config_text, agents.stores())

    if batch:
        reinforce_update(batch, agents, baselines, config.gamma, learning_rates)

    final = take_snapshot(config.episodes)
    metrics_path = write_metrics(output_dir / METRICS_NAME, rows, task_classes)
    save_checkpoint(checkpoint_path, config_text, agents.stores())
    logger.info(f"訓練完成：{metrics_path}、{checkpoint_path}")

    return TrainingResult(
        output_dir=output_dir,
        metrics_path=metrics_path,
        checkpoint_path=checkpoint_path,
        episodes=config.episodes,
        final=final,
        snapshots=snapshots,
    )
