"""
兩種 intrinsic reward：

- coverage：λ1 · Σ_slot [log q_φ(c_slot | m) + log K_slot]，只加在 episode 最後一步；
  discriminator 在 chance level 時為 0，完美預測時為 λ1 · Σ log K_slot。
- influence：λ3 · KL(π(a | m, G) ‖ (1/k) Σ_j π(a | m̃_j, G))，每一步都加；
  m̃_j 是同一 concept 重新抽樣的 pseudo message。
"""
import numpy as np

from concepts.encoding import slot_indices
from concepts.models import Concept, SLOT_CARDINALITIES
from diffcore.functional import kl_divergence
from diffcore.store import ParamStore
from intrinsic.discriminator import slot_log_probs
from listener.policy import action_distribution
from speaker.models import ChannelConfig, Message
from speaker.network import sample_messages

LOG_PROB_FLOOR = -20.0
MARGINAL_EPSILON = 1e-8
MAX_COVERAGE = float(np.sum(np.log(SLOT_CARDINALITIES)))


class NonFiniteLogProb(FloatingPointError):
    pass


class DegenerateMarginal(ValueError):
    pass


def coverage_from_log_probs(log_probs, indices, lambda1: float) -> float:
    """log_probs 為每個欄位的 log q 向量，indices 為真實 concept 的欄位 index"""
    total = 0.0
    for slot_log_prob, index, cardinality in zip(log_probs, indices, SLOT_CARDINALITIES):
        value = float(slot_log_prob[index])
        if np.isnan(value):
            raise NonFiniteLogProb(f"discriminator 輸出 NaN（欄位 index {index}）")
        total += max(value, LOG_PROB_FLOOR) + np.log(cardinality)
    return lambda1 * total


def coverage_reward(concept: Concept, message: Message, discriminator: ParamStore, lambda1: float) -> float:
    return coverage_from_log_probs(slot_log_probs(discriminator, message.bits()), slot_indices(concept), lambda1)


def _smooth(distribution: np.ndarray, epsilon: float) -> np.ndarray:
    smoothed = distribution + epsilon
    return smoothed / smoothed.sum()


def influence_from_distributions(conditional, pseudo_conditionals, lambda3: float,
                                 epsilon: float = MARGINAL_EPSILON) -> float:
    """
    conditional 為真實訊息下的動作分布，pseudo_conditionals 為 (k, A) 的 pseudo message 動作分布。
    相同的列先合併再加權平均，條件分布與邊際分布做相同的 ε 平滑後取 KL。
    """
    conditional = np.asarray(conditional, dtype=np.float64)
    pseudo_conditionals = np.atleast_2d(np.asarray(pseudo_conditionals, dtype=np.float64))
    if pseudo_conditionals.shape[0] < 1:
        raise ValueError("至少需要一個 pseudo message")

    rows, counts = np.unique(pseudo_conditionals, axis=0, return_counts=True)
    if rows.shape[0] == 1:
        marginal = rows[0]
    else:
        marginal = (counts[:, None] * rows).sum(axis=0) / counts.sum()

    conditional = _smooth(conditional, epsilon)
    marginal = _smooth(marginal, epsilon)
    if not np.all(np.isfinite(marginal)) or np.any(marginal[conditional > 0] <= 0):
        raise DegenerateMarginal(f"邊際分布退化：{marginal}")
    return lambda3 * kl_divergence(conditional, marginal)


def influence_reward(obs, message: Message, concept: Concept, speaker: ParamStore, listener: ParamStore,
                     channel: ChannelConfig, k: int, lambda3: float, rng: np.random.Generator,
                     master_obs=None) -> float:
    """
    抽 k 個 pseudo message，比較真實訊息下與 pseudo 邊際下的動作分布。
    每個不同的訊息只做一次前向計算，結果只當純量 reward 使用。
    """
    if k < 1:
        raise ValueError(f"k 必須 ≥ 1，收到 {k}")
    pseudo_messages = sample_messages(concept, speaker, rng, channel, k)

    cache = {}

    def distribution(candidate: Message) -> np.ndarray:
        if candidate not in cache:
            cache[candidate] = action_distribution(obs, candidate.bits(), listener, master_obs)
        return cache[candidate]

    conditional = distribution(message)
    pseudo = np.stack([distribution(candidate) for candidate in pseudo_messages])
    return influence_from_distributions(conditional, pseudo, lambda3)
