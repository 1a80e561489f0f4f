"""
學習型 speaker：concept bits → dense(d_h, tanh) → dense(n_m·d_m)，reshape 成 n_m 列 logits。
每一列以 straight-through 類別抽樣產生一個 symbol。
"""
import numpy as np

from concepts.encoding import CONCEPT_WIDTH, encode_concept, encode_concepts
from concepts.models import Concept
from diffcore.functional import (
    forward_dense, categorical_straight_through, pick_log_prob, softmax_numpy, sample_categorical,
)
from diffcore.store import ParamStore
from diffcore.tensor import Tensor, no_grad
from speaker.models import ChannelConfig, Message

DEFAULT_D_H = 64
STORE_NAME = 'speaker'


def init_speaker(rng: np.random.Generator, channel: ChannelConfig, d_h: int = DEFAULT_D_H) -> ParamStore:
    store = ParamStore(STORE_NAME)
    store.add_dense('encoder', CONCEPT_WIDTH, d_h, rng)
    store.add_dense('head', d_h, channel.width, rng)
    return store


def speaker_logits(store: ParamStore, concept_bits, channel: ChannelConfig) -> Tensor:
    """concept_bits 為 (15,) 或 (B, 15)，回傳 (..., n_m, d_m)"""
    hidden = forward_dense(concept_bits, store.dense('encoder'), 'tanh')
    logits = forward_dense(hidden, store.dense('head'), 'linear')
    return logits.reshape(*logits.shape[:-1], channel.n_m, channel.d_m)


def speak(concept: Concept, store: ParamStore, rng: np.random.Generator, channel: ChannelConfig,
          mode: str = 'train') -> tuple:
    """
    回傳 (Message, 每個 symbol 的 log-probability)。
    train 模式抽樣、eval 模式取 argmax；只做前向計算。
    """
    if mode not in ('train', 'eval'):
        raise ValueError(f"未知的 mode：{mode}")
    with no_grad():
        logits = speaker_logits(store, encode_concept(concept), channel)
        one_hot = categorical_straight_through(
            logits, rng, 'sample' if mode == 'train' else 'argmax',
        )
        symbols = np.argmax(one_hot.data, axis=-1)
        log_probs = pick_log_prob(logits, symbols).data.copy()
    return Message(tuple(symbols), d_m=channel.d_m), log_probs


def sample_messages(concept: Concept, store: ParamStore, rng: np.random.Generator,
                    channel: ChannelConfig, count: int) -> list:
    """對同一 concept 重新抽樣 count 個訊息（speaker 通道的隨機性）"""
    with no_grad():
        logits = speaker_logits(store, encode_concept(concept), channel).data
    probs = np.broadcast_to(softmax_numpy(logits), (count, channel.n_m, channel.d_m))
    symbols = sample_categorical(probs, rng)
    return [Message(tuple(row), d_m=channel.d_m) for row in symbols]


def speaker_message_tensor(store: ParamStore, concept_bits: np.ndarray, symbols: np.ndarray,
                           channel: ChannelConfig) -> tuple:
    """
    以記錄下來的 symbols 重建可微分的訊息：回傳 (bits (B, n_m·d_m), log_probs (B, n_m))。
    bits 經 straight-through 節點，listener 的梯度可以回傳到 speaker。
    """
    logits = speaker_logits(store, concept_bits, channel)
    one_hot = categorical_straight_through(logits, index=symbols)
    bits = one_hot.reshape(one_hot.shape[0], channel.width)
    return bits, pick_log_prob(logits, symbols)


def message_distribution(concept: Concept, store: ParamStore, channel: ChannelConfig) -> np.ndarray:
    with no_grad():
        return softmax_numpy(speaker_logits(store, encode_concept(concept), channel).data)


def batched_argmax_messages(store: ParamStore, concepts, channel: ChannelConfig) -> list:
    with no_grad():
        logits = speaker_logits(store, encode_concepts(concepts), channel).data
    return [Message(tuple(row), d_m=channel.d_m) for row in np.argmax(logits, axis=-1)]
