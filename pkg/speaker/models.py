from dataclasses import dataclass

import numpy as np
from django.db import models

N_M = 5
DEFAULT_D_M = 4


class SpeakerKind(models.TextChoices):
    LEARNED = 'learned', '學習型 Speaker'
    PERFECT = 'perfect', 'Perfect Speaker'
    NONE = 'none', '無 Speaker'


class ChannelTooNarrow(ValueError):
    pass


@dataclass(frozen=True)
class ChannelConfig:
    n_m: int = N_M
    d_m: int = DEFAULT_D_M

    def __post_init__(self):
        if self.n_m < 1:
            raise ValueError(f"n_m 必須 ≥ 1，收到 {self.n_m}")
        if self.d_m < 2:
            raise ValueError(f"d_m 必須 ≥ 2，收到 {self.d_m}")

    @property
    def capacity(self) -> int:
        return self.d_m ** self.n_m

    @property
    def width(self) -> int:
        return self.n_m * self.d_m


@dataclass(frozen=True)
class Message:
    """n_m 個 symbol，每個以 index 保存；one-hot 形式由 `one_hot()` 取得"""
    symbols: tuple
    d_m: int = DEFAULT_D_M

    def __post_init__(self):
        symbols = tuple(int(symbol) for symbol in self.symbols)
        if not symbols:
            raise ValueError("message 至少要有一個 symbol")
        for symbol in symbols:
            if not 0 <= symbol < self.d_m:
                raise ValueError(f"symbol {symbol} 超出字母表 0..{self.d_m - 1}")
        object.__setattr__(self, 'symbols', symbols)

    def __str__(self):
        return ' '.join(str(symbol) for symbol in self.symbols)

    @property
    def n_m(self) -> int:
        return len(self.symbols)

    def one_hot(self) -> np.ndarray:
        grid = np.zeros((self.n_m, self.d_m), dtype=np.float64)
        grid[np.arange(self.n_m), self.symbols] = 1.0
        return grid

    def bits(self) -> np.ndarray:
        return self.one_hot().reshape(-1)

    @classmethod
    def from_one_hot(cls, one_hot) -> 'Message':
        one_hot = np.asarray(one_hot)
        if one_hot.ndim != 2 or not np.array_equal(one_hot.sum(axis=1), np.ones(one_hot.shape[0])):
            raise ValueError(f"不是逐列 one-hot 的陣列：shape {one_hot.shape}")
        return cls(tuple(np.argmax(one_hot, axis=1)), d_m=one_hot.shape[1])

    @classmethod
    def from_string(cls, text: str, d_m: int = DEFAULT_D_M) -> 'Message':
        return cls(tuple(int(token) for token in text.split()), d_m=d_m)


def silent_bits(channel: ChannelConfig) -> np.ndarray:
    """沒有 speaker 時 listener 收到的全零訊息輸入"""
    return np.zeros(channel.width, dtype=np.float64)
