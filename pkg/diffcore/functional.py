from typing import NamedTuple

import numpy as np

from diffcore.tensor import Tensor, ShapeMismatch, as_tensor

ACTIVATIONS = ('tanh', 'relu', 'linear')


class NonFiniteLogits(ValueError):
    pass


class NonNormalizedDistribution(ValueError):
    pass


class DenseLayer(NamedTuple):
    weight: Tensor
    bias: Tensor


def forward_dense(x, layer: DenseLayer, activation: str = 'tanh') -> Tensor:
    """
    仿射轉換加上非線性，x 的最後一維必須等於 weight 的輸入維度。
    一維輸入會暫時補成 (1, n) 再還原。
    """
    if activation not in ACTIVATIONS:
        raise ValueError(f"未知的 activation：{activation}")
    x = as_tensor(x)
    n_in, n_out = layer.weight.shape
    if x.ndim == 0 or x.shape[-1] != n_in:
        raise ShapeMismatch(f"dense 輸入 {x.shape} 與權重 {layer.weight.shape} 不相容")
    if layer.bias.shape != (n_out,):
        raise ShapeMismatch(f"bias shape {layer.bias.shape} 應為 {(n_out,)}")

    flat = x.ndim == 1
    if flat:
        x = x.reshape(1, n_in)
    out = x @ layer.weight + layer.bias
    if flat:
        out = out.reshape(n_out)

    if activation == 'tanh':
        return out.tanh()
    if activation == 'relu':
        return out.relu()
    return out


def softmax(logits, axis: int = -1) -> Tensor:
    logits = as_tensor(logits)
    shifted = logits - logits.data.max(axis=axis, keepdims=True)
    exps = shifted.exp()
    return exps / exps.sum(axis=axis, keepdims=True)


def log_softmax(logits, axis: int = -1) -> Tensor:
    logits = as_tensor(logits)
    shifted = logits - logits.data.max(axis=axis, keepdims=True)
    return shifted - shifted.exp().sum(axis=axis, keepdims=True).log()


def softmax_numpy(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    logits = np.asarray(logits, dtype=np.float64)
    exps = np.exp(logits - logits.max(axis=axis, keepdims=True))
    return exps / exps.sum(axis=axis, keepdims=True)


def pick_log_prob(logits, indices) -> Tensor:
    """取出 log_softmax(logits) 在 indices 位置的值，logits 為 (..., K)、indices 為 (...)"""
    logits = as_tensor(logits)
    indices = np.asarray(indices, dtype=np.int64)
    if indices.shape != logits.shape[:-1]:
        raise ShapeMismatch(f"indices shape {indices.shape} 與 logits {logits.shape} 不符")
    n_classes = logits.shape[-1]
    if np.any(indices < 0) or np.any(indices >= n_classes):
        raise ShapeMismatch(f"index 超出範圍 0..{n_classes - 1}")
    flat = log_softmax(logits).reshape(-1, n_classes)
    picked = flat[np.arange(flat.shape[0]), indices.reshape(-1)]
    return picked.reshape(*indices.shape)


def cross_entropy(logits, labels) -> Tensor:
    """平均負對數似然；單一 logits 向量配單一 label 時就是該筆的 loss"""
    return -pick_log_prob(logits, labels).mean()


def kl_divergence(p, q, atol: float = 1e-6) -> float:
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ShapeMismatch(f"KL 兩分布 shape 不同：{p.shape} vs {q.shape}")
    for name, dist in (('p', p), ('q', q)):
        if np.any(dist < 0) or abs(dist.sum() - 1.0) > atol:
            raise NonNormalizedDistribution(f"{name} 不是機率分布（總和 {dist.sum():.8f}）")

    support = p > 0
    if np.any(q[support] == 0):
        return float('inf')
    value = float(np.sum(p[support] * np.log(p[support] / q[support])))
    return max(value, 0.0)


def sample_categorical(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """逆 CDF 抽樣；每一列各抽一個 index"""
    probs = np.asarray(probs, dtype=np.float64)
    cdf = np.cumsum(probs, axis=-1)
    u = np.asarray(rng.random(size=probs.shape[:-1]))
    index = (cdf <= u[..., None] * cdf[..., -1:]).sum(axis=-1)
    return np.minimum(index, probs.shape[-1] - 1)


def categorical_straight_through(logits, rng=None, mode: str = 'sample', index=None) -> Tensor:
    """
    前向輸出精確的 one-hot，反向則走 softmax(logits) 的 Jacobian。

    mode='argmax' 平手時取最小 index；給定 index 時直接使用（重建計算圖用）。
    """
    logits = as_tensor(logits)
    if not np.all(np.isfinite(logits.data)):
        raise NonFiniteLogits(f"logits 含有 NaN/Inf：{logits.data}")

    probs = softmax_numpy(logits.data)
    if index is None:
        if mode == 'argmax':
            index = np.argmax(logits.data, axis=-1)
        elif mode == 'sample':
            if rng is None:
                raise ValueError("sample 模式需要 rng")
            index = sample_categorical(probs, rng)
        else:
            raise ValueError(f"未知的 mode：{mode}")
    index = np.asarray(index, dtype=np.int64)
    if index.shape != logits.shape[:-1]:
        raise ShapeMismatch(f"index shape {index.shape} 與 logits {logits.shape} 不符")

    one_hot = np.zeros_like(logits.data)
    np.put_along_axis(one_hot, index[..., None], 1.0, axis=-1)

    def backward(g):
        return (probs * (g - np.sum(g * probs, axis=-1, keepdims=True)),)

    return Tensor._make(one_hot, (logits,), backward)
