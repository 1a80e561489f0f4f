import hashlib
import logging

import numpy as np

from diffcore.functional import DenseLayer
from diffcore.tensor import Tensor, ShapeMismatch

logger = logging.getLogger(__name__)

ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8


class ParamStore:
    """
    具名參數與 Adam 狀態（一階/二階動差、步數）。

    參數依加入順序保存，checkpoint 也依此順序寫出。
    """

    def __init__(self, name: str):
        self.name = name
        self.params: dict[str, Tensor] = {}
        self.first_moment: dict[str, np.ndarray] = {}
        self.second_moment: dict[str, np.ndarray] = {}
        self.step = 0

    def __repr__(self):
        return f"ParamStore({self.name!r}, params={len(self.params)}, step={self.step})"

    def __contains__(self, key):
        return key in self.params

    def __getitem__(self, key) -> Tensor:
        return self.params[key]

    def keys(self):
        return list(self.params)

    def add(self, key: str, value) -> Tensor:
        if key in self.params:
            raise KeyError(f"{self.name} 已有參數 {key}")
        tensor = Tensor(np.array(value, dtype=np.float64), requires_grad=True)
        self.params[key] = tensor
        self.first_moment[key] = np.zeros_like(tensor.data)
        self.second_moment[key] = np.zeros_like(tensor.data)
        return tensor

    def add_dense(self, prefix: str, n_in: int, n_out: int, rng: np.random.Generator) -> DenseLayer:
        # Glorot uniform
        limit = np.sqrt(6.0 / (n_in + n_out))
        weight = self.add(f'{prefix}.weight', rng.uniform(-limit, limit, size=(n_in, n_out)))
        bias = self.add(f'{prefix}.bias', np.zeros(n_out))
        return DenseLayer(weight, bias)

    def dense(self, prefix: str) -> DenseLayer:
        return DenseLayer(self.params[f'{prefix}.weight'], self.params[f'{prefix}.bias'])

    def zero_grad(self):
        for tensor in self.params.values():
            tensor.grad = None

    def snapshot(self) -> dict:
        return {key: tensor.data.copy() for key, tensor in self.params.items()}

    def fingerprint(self) -> str:
        digest = hashlib.sha256()
        for key, tensor in self.params.items():
            digest.update(key.encode('utf-8'))
            digest.update(np.ascontiguousarray(tensor.data, dtype='<f8').tobytes())
        return digest.hexdigest()


def optimize_step(store: ParamStore, lr: float = 1e-3, grads: dict | None = None,
                  betas: tuple = ADAM_BETAS, eps: float = ADAM_EPS) -> ParamStore:
    """
    Adam 更新一步。grads 未給時使用各參數累積的 `.grad`；
    沒有梯度的參數（本步未參與計算圖）不更新，也不推進其動差。
    """
    beta1, beta2 = betas
    store.step += 1
    correction1 = 1.0 - beta1 ** store.step
    correction2 = 1.0 - beta2 ** store.step

    for key, tensor in store.params.items():
        grad = grads.get(key) if grads is not None else tensor.grad
        if grad is None:
            continue
        grad = np.asarray(grad, dtype=np.float64)
        if grad.shape != tensor.shape:
            raise ShapeMismatch(f"{store.name}.{key} 梯度 {grad.shape} != 參數 {tensor.shape}")
        m = store.first_moment[key] = beta1 * store.first_moment[key] + (1.0 - beta1) * grad
        v = store.second_moment[key] = beta2 * store.second_moment[key] + (1.0 - beta2) * grad * grad
        tensor.data = tensor.data - lr * (m / correction1) / (np.sqrt(v / correction2) + eps)

    if logger.isEnabledFor(logging.DEBUG):
        logger.debug(f"{store.name} Adam step {store.step}")
    return store
