"""
q_φ(c | m)：輸入串接的訊息 bits，經一層 tanh 隱藏層後，每個概念欄位各有一個分類 head。

訊息 bits 以常數餵入，discriminator 的梯度不會回傳到 speaker。
"""
import logging

import numpy as np

from concepts.encoding import slot_indices
from concepts.models import SLOT_CARDINALITIES, SLOT_NAMES
from diffcore.functional import forward_dense, cross_entropy, log_softmax
from diffcore.store import ParamStore, optimize_step
from diffcore.tensor import no_grad
from intrinsic.buffer import PairBuffer

logger = logging.getLogger(__name__)

DEFAULT_D_H = 64
STORE_NAME = 'discriminator'


def init_discriminator(rng: np.random.Generator, message_width: int, d_h: int = DEFAULT_D_H) -> ParamStore:
    store = ParamStore(STORE_NAME)
    store.add_dense('hidden', message_width, d_h, rng)
    for slot, cardinality in zip(SLOT_NAMES, SLOT_CARDINALITIES):
        store.add_dense(f'head.{slot}', d_h, cardinality, rng)
    return store


def discriminator_logits(store: ParamStore, bits) -> list:
    """每個欄位一個 logits Tensor，形狀 (..., K_slot)"""
    hidden = forward_dense(np.asarray(bits, dtype=np.float64), store.dense('hidden'), 'tanh')
    return [forward_dense(hidden, store.dense(f'head.{slot}'), 'linear') for slot in SLOT_NAMES]


def slot_log_probs(store: ParamStore, bits) -> list:
    with no_grad():
        return [log_softmax(head).data for head in discriminator_logits(store, bits)]


def _batch_arrays(pairs) -> tuple:
    bits = np.stack([message.bits() for _, message in pairs])
    labels = np.array([slot_indices(concept) for concept, _ in pairs], dtype=np.int64)
    return bits, labels


def train_discriminator(store: ParamStore, buffer: PairBuffer, batches: int, batch_size: int,
                        rng: np.random.Generator, lr: float = 1e-3) -> tuple:
    """
    從 buffer 均勻抽 batch，對五個欄位的 cross-entropy 總和做 `batches` 次 Adam 更新。
    回傳 (store, 平均 loss)。
    """
    losses = []
    for _ in range(batches):
        bits, labels = _batch_arrays(buffer.sample(rng, batch_size))
        store.zero_grad()
        loss = None
        for position, head in enumerate(discriminator_logits(store, bits)):
            term = cross_entropy(head, labels[:, position])
            loss = term if loss is None else loss + term
        loss.backward()
        optimize_step(store, lr)
        losses.append(float(loss.data))
    mean_loss = float(np.mean(losses)) if losses else 0.0
    logger.debug(f"discriminator 訓練 {batches} 個 batch，平均 loss {mean_loss:.4f}")
    return store, mean_loss


def slot_accuracy(store: ParamStore, pairs) -> np.ndarray:
    """各欄位以 argmax 預測的正確率，順序同 SLOT_NAMES"""
    pairs = list(pairs)
    if not pairs:
        return np.zeros(len(SLOT_NAMES))
    bits, labels = _batch_arrays(pairs)
    predictions = [np.argmax(row, axis=-1) for row in slot_log_probs(store, bits)]
    return np.array([np.mean(prediction == labels[:, position])
                     for position, prediction in enumerate(predictions)])
