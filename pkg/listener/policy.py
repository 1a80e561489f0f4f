import numpy as np

from diffcore.functional import pick_log_prob, softmax_numpy, sample_categorical
from diffcore.store import ParamStore
from diffcore.tensor import Tensor, no_grad
from gridworld.models import ACTIONS
from listener.models import ARMS, ARM_TO_PRIMITIVE, Arm, PolicyOutput
from listener.network import (
    message_summary, encode_grid_features, attention, master_logits, arm_logits,
)


def _log_softmax_numpy(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def _choose(probs: np.ndarray, rng, mode: str) -> int:
    if mode == 'eval':
        return int(np.argmax(probs))
    if mode == 'train':
        return int(sample_categorical(probs, rng))
    raise ValueError(f"未知的 mode：{mode}")


def policy_logits(grids, bits, store: ParamStore, master_grids=None) -> tuple:
    """
    回傳 (master logits (..., 3), arm logits (..., 3, 5), attention 權重 (..., 16))。
    master 由 master_grids（episode 的 t=0 觀察）決定；未給時視為目前即 t=0。
    """
    z = message_summary(bits, store)
    weights, attended = attention(z, encode_grid_features(grids, store))
    if master_grids is None:
        attended_start = attended
    else:
        _, attended_start = attention(z, encode_grid_features(master_grids, store))
    return master_logits(z, attended_start, store), arm_logits(z, attended, store), weights


def act(obs, bits, store: ParamStore, rng, mode: str = 'train', arm=None, master_obs=None) -> tuple:
    """
    依觀察與訊息選擇 primitive action，回傳 (PolicyOutput, Action)。

    arm 為 None 時（episode 第一步）由 master 選擇；之後傳入同一個 arm，master 決策整個 episode 固定。
    """
    with no_grad():
        master, arms, weights = policy_logits(obs, bits, store, master_obs)
    master_log = _log_softmax_numpy(master.data)
    arm_log = _log_softmax_numpy(arms.data)

    if arm is None:
        arm_index = _choose(np.exp(master_log), rng, mode)
    else:
        arm_index = ARMS.index(Arm(arm))
    local_action = _choose(np.exp(arm_log[arm_index]), rng, mode)

    output = PolicyOutput(
        master=np.exp(master_log),
        arm=ARMS[arm_index],
        arm_index=arm_index,
        master_log_prob=float(master_log[arm_index]),
        action=np.exp(arm_log[arm_index]),
        local_action=local_action,
        action_log_prob=float(arm_log[arm_index, local_action]),
        attention=weights.data,
    )
    return output, output.primitive


def action_distribution(obs, bits, store: ParamStore, master_obs=None) -> np.ndarray:
    """
    primitive action 的邊際分布 p(a) = Σ_arm master(arm)·p(a|arm)，順序同 `gridworld.models.ACTIONS`。
    obs 與 bits 可帶相同的 batch 維度。
    """
    with no_grad():
        master, arms, _ = policy_logits(obs, bits, store, master_obs)
    master_probs = softmax_numpy(master.data)
    arm_probs = softmax_numpy(arms.data)
    marginal = np.zeros(master_probs.shape[:-1] + (len(ACTIONS),))
    for arm_index in range(len(ARMS)):
        marginal[..., ARM_TO_PRIMITIVE[arm_index]] += master_probs[..., arm_index, None] * arm_probs[..., arm_index, :]
    return marginal


def master_log_probs(store: ParamStore, start_grids, bits, arms) -> Tensor:
    """每個 episode 一筆：log π_master(arm | z, attended_0)"""
    master, _, _ = policy_logits(start_grids, bits, store)
    return pick_log_prob(master, np.asarray(arms))


def action_log_probs(store: ParamStore, grids, bits, arms, local_actions) -> Tensor:
    """每個 step 一筆：log π_arm(a_t | attended_t, z)，arms 為各 step 所屬 episode 的 arm"""
    z = message_summary(bits, store)
    _, attended = attention(z, encode_grid_features(grids, store))
    logits = arm_logits(z, attended, store)
    arms = np.asarray(arms, dtype=np.int64)
    chosen = logits[np.arange(arms.shape[0]), arms]
    return pick_log_prob(chosen, np.asarray(local_actions))
