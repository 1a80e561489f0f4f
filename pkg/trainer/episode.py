from dataclasses import dataclass, field

import numpy as np

from concepts.models import Concept
from gridworld.dynamics import step
from gridworld.encoding import encode_grid
from gridworld.models import GridState
from intrinsic.rewards import coverage_reward, influence_reward
from listener.policy import act
from speaker.models import Message
from trainer.agents import AgentSet
from trainer.config import RunConfig


def discounted_returns(rewards, gamma: float) -> np.ndarray:
    """return_t = Σ_{t' ≥ t} γ^{t'-t} r_{t'}"""
    rewards = np.asarray(rewards, dtype=np.float64)
    returns = np.zeros_like(rewards)
    running = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        running = rewards[t] + gamma * running
        returns[t] = running
    return returns


@dataclass
class Trajectory:
    concept: Concept
    message: Message | None
    speaker_log_probs: np.ndarray | None
    listener_bits: np.ndarray
    start_grid: np.ndarray
    arm_index: int
    master_log_prob: float
    grids: list = field(default_factory=list)
    actions: list = field(default_factory=list)
    local_actions: list = field(default_factory=list)
    arm_indices: list = field(default_factory=list)
    action_log_probs: list = field(default_factory=list)
    env_rewards: list = field(default_factory=list)
    influence_rewards: list = field(default_factory=list)
    coverage_reward: float = 0.0
    env_reward_scale: float = 1.0
    states: list | None = None

    @property
    def task_class(self) -> str:
        return self.concept.task_class

    @property
    def length(self) -> int:
        return len(self.actions)

    @property
    def success(self) -> bool:
        return any(reward > 0 for reward in self.env_rewards)

    @property
    def rewards(self) -> np.ndarray:
        """每一步的總 reward：環境 reward、influence，coverage 只加在最後一步"""
        rewards = self.env_reward_scale * np.asarray(self.env_rewards, dtype=np.float64)
        rewards = rewards + np.asarray(self.influence_rewards, dtype=np.float64)
        if len(rewards):
            rewards[-1] += self.coverage_reward
        return rewards

    def returns(self, gamma: float) -> np.ndarray:
        return discounted_returns(self.rewards, gamma)


def run_episode(state: GridState, agents: AgentSet, rng: np.random.Generator, mode: str = 'train',
                config: RunConfig | None = None, record_states: bool = False) -> Trajectory:
    """
    一回合信號遊戲：speaker 看到 concept 產生訊息，listener 只靠訊息與 grid 行動到 episode 結束。

    config 有給且為 train 模式時才計算 intrinsic reward。
    """
    intrinsic = config is not None and mode == 'train' and config.intrinsic_enabled
    agent_mode = 'train' if mode == 'train' else 'eval'
    concept = state.task

    message, speaker_log_probs, bits = agents.message_for(concept, rng, agent_mode)
    start_grid = encode_grid(state, oracle=agents.oracle)
    policy, action = act(start_grid, bits, agents.listener, rng, agent_mode, master_obs=start_grid)

    trajectory = Trajectory(
        concept=concept,
        message=message,
        speaker_log_probs=speaker_log_probs,
        listener_bits=bits,
        start_grid=start_grid,
        arm_index=policy.arm_index,
        master_log_prob=policy.master_log_prob,
        env_reward_scale=1.0 if config is None or config.env_reward else 0.0,
        states=[state] if record_states else None,
    )

    grid = start_grid
    while True:
        influence = 0.0
        if intrinsic and config.use_influence:
            influence = influence_reward(
                grid, message, concept, agents.speaker, agents.listener, agents.channel,
                config.k, config.lambda3, rng, master_obs=start_grid,
            )
        state, reward, done = step(state, action)

        trajectory.grids.append(grid)
        trajectory.actions.append(action)
        trajectory.local_actions.append(policy.local_action)
        trajectory.arm_indices.append(policy.arm_index)
        trajectory.action_log_probs.append(policy.action_log_prob)
        trajectory.env_rewards.append(reward)
        trajectory.influence_rewards.append(influence)
        if record_states:
            trajectory.states.append(state)
        if done:
            break

        grid = encode_grid(state, oracle=agents.oracle)
        policy, action = act(grid, bits, agents.listener, rng, agent_mode, arm=policy.arm, master_obs=start_grid)

    if intrinsic and config.use_coverage:
        trajectory.coverage_reward = coverage_reward(concept, message, agents.discriminator, config.lambda1)
    return trajectory
