from collections import deque

import numpy as np

DEFAULT_CAPACITY = 10_000


class BufferTooSmall(ValueError):
    pass


class PairBuffer:
    """固定容量的 ⟨concept, message⟩ FIFO；滿了之後最舊的一筆先被擠掉"""

    def __init__(self, capacity: int = DEFAULT_CAPACITY):
        if capacity < 1:
            raise ValueError(f"capacity 必須 ≥ 1，收到 {capacity}")
        self.capacity = capacity
        self._pairs = deque(maxlen=capacity)

    def __len__(self):
        return len(self._pairs)

    def __iter__(self):
        return iter(self._pairs)

    def add(self, concept, message):
        self._pairs.append((concept, message))

    def sample(self, rng: np.random.Generator, batch_size: int) -> list:
        if len(self._pairs) < batch_size:
            raise BufferTooSmall(f"buffer 只有 {len(self._pairs)} 筆，不足一個 batch（{batch_size}）")
        indices = rng.integers(len(self._pairs), size=batch_size)
        return [self._pairs[index] for index in indices]
