"""
Held-out 與 zero-shot 評估。

每個 task class 的評估 rng 由 (seed, task class 在 TASK_CLASSES 中的位置) 推導，
不論在本機依序執行或分散到 Celery worker，結果都相同，並依固定順序合併。
"""
import logging
from dataclasses import dataclass

import numpy as np

from concepts.models import TASK_CLASSES, parse_task_class
from concepts.splits import SplitMode, SplitSpec
from gridworld.dynamics import step
from gridworld.generator import generate_episode
from gridworld.models import ACTIONS, T_MAX
from trainer.agents import AgentSet
from trainer.episode import run_episode

logger = logging.getLogger(__name__)


class EmptyTestSet(ValueError):
    pass


@dataclass(frozen=True)
class TaskAccuracy:
    task_class: str
    successes: int
    episodes: int

    @property
    def accuracy(self) -> float:
        return self.successes / self.episodes if self.episodes else 0.0


def task_classes_for(split: SplitSpec, mode=SplitMode.TRAIN, verb=None) -> list:
    """split 在該模式下實際出現的 task class，依 TASK_CLASSES 順序；verb 可限定動詞"""
    present = {concept.task_class for concept in split.concepts_for(mode)}
    return [
        task for task in TASK_CLASSES
        if task in present and (verb is None or parse_task_class(task)[0] == verb)
    ]


def derived_rng(seed: int, task_class: str) -> np.random.Generator:
    return np.random.default_rng([seed, TASK_CLASSES.index(task_class)])


def evaluate_task_class(agents: AgentSet, split: SplitSpec, task_class: str, episodes: int, seed: int,
                        mode=SplitMode.TRAIN, t_max: int = T_MAX) -> TaskAccuracy:
    """argmax 模式跑 episodes 回合，成功 = 拿到環境 reward 1"""
    rng = derived_rng(seed, task_class)
    successes = 0
    for _ in range(episodes):
        state = generate_episode(rng, split, mode=mode, task_filter=task_class, t_max=t_max)
        successes += int(run_episode(state, agents, rng, mode='eval').success)
    return TaskAccuracy(task_class=task_class, successes=successes, episodes=episodes)


def evaluate_heldout(agents: AgentSet, split: SplitSpec, task_classes, episodes: int, seed: int,
                     mode=SplitMode.TRAIN, t_max: int = T_MAX) -> list:
    return [
        evaluate_task_class(agents, split, task_class, episodes, seed, mode=mode, t_max=t_max)
        for task_class in task_classes
    ]


def evaluate_zero_shot(agents: AgentSet, split: SplitSpec, episodes: int, seed: int, verb=None,
                       t_max: int = T_MAX) -> list:
    """只在 split 的 test concept 上評估"""
    task_classes = task_classes_for(split, SplitMode.TEST, verb)
    if not task_classes:
        raise EmptyTestSet(f"split={split.kind} 沒有 test concept")
    results = evaluate_heldout(agents, split, task_classes, episodes, seed, mode=SplitMode.TEST, t_max=t_max)
    for result in results:
        logger.info(f"zero-shot {result.task_class}: {result.accuracy:.4f} ({result.successes}/{result.episodes})")
    return results


def random_policy_baseline(split: SplitSpec, task_classes, episodes: int, seed: int,
                           mode=SplitMode.TRAIN, t_max: int = T_MAX) -> list:
    """每一步從 7 個 primitive action 均勻抽樣的腳本策略，作為成功率下限"""
    results = []
    for task_class in task_classes:
        rng = derived_rng(seed, task_class)
        successes = 0
        for _ in range(episodes):
            state = generate_episode(rng, split, mode=mode, task_filter=task_class, t_max=t_max)
            done = False
            while not done:
                state, reward, done = step(state, ACTIONS[int(rng.integers(len(ACTIONS)))])
                if reward > 0:
                    successes += 1
        results.append(TaskAccuracy(task_class=task_class, successes=successes, episodes=episodes))
    return results


def format_report(results) -> str:
    return ''.join(f'{result.task_class} {result.accuracy:.6f} {result.episodes}\n' for result in results)


def parse_report(text: str) -> dict:
    """`task_class accuracy n` 每行一筆；回傳 {task_class: (accuracy, n)}"""
    parsed = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        task_class, accuracy, episodes = line.split()
        parsed[task_class] = (float(accuracy), int(episodes))
    return parsed
