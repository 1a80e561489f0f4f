"""
Learning-progress curriculum：LP_i = |r_i − μ_i|，μ_i 為 held-out reward 的指數移動平均。
抽樣機率 p = (1 − ε_mix) · LP / ΣLP + ε_mix · uniform；LP 全為 0 時退回均勻分布。
"""
from dataclasses import dataclass, replace

import numpy as np

from diffcore.functional import sample_categorical


@dataclass(frozen=True)
class CurriculumState:
    task_classes: tuple
    mu: np.ndarray
    last: np.ndarray
    lp: np.ndarray
    beta: float = 0.9
    eps_mix: float = 0.2

    @classmethod
    def initial(cls, task_classes, beta: float = 0.9, eps_mix: float = 0.2) -> 'CurriculumState':
        zeros = np.zeros(len(task_classes))
        return cls(tuple(task_classes), zeros, zeros.copy(), zeros.copy(), beta, eps_mix)

    @property
    def probabilities(self) -> np.ndarray:
        return sampling_distribution(self.lp, self.eps_mix)


def sampling_distribution(lp, eps_mix: float = 0.2) -> np.ndarray:
    lp = np.asarray(lp, dtype=np.float64)
    uniform = np.full(lp.shape, 1.0 / lp.size)
    total = lp.sum()
    if total <= 0:
        return uniform
    return (1.0 - eps_mix) * lp / total + eps_mix * uniform


def update_curriculum(state: CurriculumState, heldout_rewards: dict) -> tuple:
    """heldout_rewards 需為每個訓練 task class 各一個值；回傳 (新狀態, 抽樣分布)"""
    missing = [task for task in state.task_classes if task not in heldout_rewards]
    if missing:
        raise ValueError(f"缺少 task class 的 held-out reward：{missing}")
    rewards = np.array([float(heldout_rewards[task]) for task in state.task_classes])
    mu = state.beta * state.mu + (1.0 - state.beta) * rewards
    updated = replace(state, mu=mu, last=rewards, lp=np.abs(rewards - mu))
    return updated, updated.probabilities


def sample_task(state: CurriculumState, rng: np.random.Generator) -> str:
    return state.task_classes[int(sample_categorical(state.probabilities, rng))]
