"""
REINFORCE：loss = -(1/E) Σ_e [ A_e,0 · (Σ log π_speaker + log π_master) + Σ_t A_e,t · log π_arm(a_t) ]

A_e,t = return_t − baseline(task class)；baseline 為各 task class 的 G_0 指數移動平均。
speaker 訊息經 straight-through 節點進入 listener，listener 的梯度也會回到 speaker。
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from concepts.encoding import encode_concepts
from diffcore.store import optimize_step
from diffcore.tensor import Tensor, as_tensor
from listener.policy import master_log_probs, action_log_probs
from speaker.models import SpeakerKind
from speaker.network import speaker_message_tensor
from trainer.agents import AgentSet

logger = logging.getLogger(__name__)


@dataclass
class ReturnBaselines:
    beta: float = 0.9
    values: dict = field(default_factory=dict)

    def value(self, task_class: str) -> float:
        return self.values.get(task_class, 0.0)

    def update(self, task_class: str, episode_return: float):
        previous = self.values.get(task_class)
        if previous is None:
            self.values[task_class] = float(episode_return)
        else:
            self.values[task_class] = self.beta * previous + (1.0 - self.beta) * float(episode_return)


def policy_gradient_loss(log_probs, advantages, normalizer: int | None = None) -> Tensor:
    """-(Σ log π · A) / normalizer（預設為筆數）；advantages 視為常數"""
    log_probs = as_tensor(log_probs)
    advantages = np.asarray(advantages, dtype=np.float64)
    normalizer = normalizer or max(advantages.shape[0], 1)
    return -(log_probs * advantages).sum() * (1.0 / normalizer)


def reinforce_update(batch: list, agents: AgentSet, baselines: ReturnBaselines, gamma: float,
                     learning_rates: dict) -> dict:
    """
    對一個 batch 的 trajectory 重建計算圖並做一次 Adam 更新。
    learning_rates 以 store 名稱為鍵（speaker / listener）；回傳診斷數值。
    """
    if not batch:
        raise ValueError("batch 不可為空")
    n_episodes = len(batch)

    returns = [trajectory.returns(gamma) for trajectory in batch]
    episode_advantages = np.array([
        episode_returns[0] - baselines.value(trajectory.task_class)
        for trajectory, episode_returns in zip(batch, returns)
    ])
    step_advantages = np.concatenate([
        episode_returns - baselines.value(trajectory.task_class)
        for trajectory, episode_returns in zip(batch, returns)
    ])

    for store in agents.stores().values():
        store.zero_grad()

    if agents.speaker_kind == SpeakerKind.LEARNED:
        symbols = np.array([trajectory.message.symbols for trajectory in batch])
        bits, speaker_log_probs = speaker_message_tensor(
            agents.speaker, encode_concepts([trajectory.concept for trajectory in batch]), symbols, agents.channel,
        )
        episode_log_probs = speaker_log_probs.sum(axis=-1)
    else:
        bits = Tensor(np.stack([trajectory.listener_bits for trajectory in batch]))
        episode_log_probs = None

    arms = np.array([trajectory.arm_index for trajectory in batch])
    master = master_log_probs(agents.listener, np.stack([t.start_grid for t in batch]), bits, arms)
    episode_log_probs = master if episode_log_probs is None else episode_log_probs + master

    episode_of_step = np.concatenate([np.full(t.length, index) for index, t in enumerate(batch)])
    actions = action_log_probs(
        agents.listener,
        np.stack([grid for trajectory in batch for grid in trajectory.grids]),
        bits[episode_of_step],
        arms[episode_of_step],
        np.concatenate([trajectory.local_actions for trajectory in batch]),
    )

    loss = (policy_gradient_loss(episode_log_probs, episode_advantages, n_episodes)
            + policy_gradient_loss(actions, step_advantages, n_episodes))
    loss.backward()

    for name, store in agents.stores().items():
        if name in learning_rates:
            optimize_step(store, learning_rates[name])

    for trajectory, episode_returns in zip(batch, returns):
        baselines.update(trajectory.task_class, episode_returns[0])

    diagnostics = {
        'loss': float(loss.data),
        'mean_return': float(np.mean([episode_returns[0] for episode_returns in returns])),
        'mean_advantage': float(np.mean(episode_advantages)),
        'steps': int(episode_of_step.shape[0]),
    }
    logger.debug(f"REINFORCE 更新：{diagnostics}")
    return diagnostics
