"""
以中央差分檢查反向傳播結果，供 tests 與 `verify` 指令使用。
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from diffcore.functional import (
    DenseLayer, forward_dense, softmax, log_softmax, cross_entropy, categorical_straight_through,
)
from diffcore.tensor import Tensor, no_grad, concat

logger = logging.getLogger(__name__)

EPSILON = 1e-4
TOLERANCE = 1e-4


@dataclass
class GradCheckReport:
    name: str
    max_relative_error: float
    ok: bool


@dataclass
class GradSuiteReport:
    graphs: int = 0
    max_relative_error: float = 0.0
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def numerical_gradient(fn, param: Tensor, eps: float = EPSILON) -> np.ndarray:
    grad = np.zeros_like(param.data)
    with no_grad():
        for index in np.ndindex(param.shape):
            original = param.data[index]
            param.data[index] = original + eps
            upper = float(fn().data)
            param.data[index] = original - eps
            lower = float(fn().data)
            param.data[index] = original
            grad[index] = (upper - lower) / (2.0 * eps)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = max(np.linalg.norm(analytic) + np.linalg.norm(numeric), 1e-8)
    return float(np.linalg.norm(analytic - numeric) / scale)


def check_gradients(fn, params: list, name: str = 'graph', eps: float = EPSILON,
                    tolerance: float = TOLERANCE) -> GradCheckReport:
    """fn 不帶參數、回傳 scalar Tensor；params 為需要檢查的 leaf"""
    for param in params:
        param.grad = None
    fn().backward()
    worst = 0.0
    for param in params:
        analytic = param.grad if param.grad is not None else np.zeros_like(param.data)
        worst = max(worst, relative_error(analytic, numerical_gradient(fn, param, eps)))
    return GradCheckReport(name=name, max_relative_error=worst, ok=worst < tolerance)


def _leaf(rng, *shape, scale: float = 1.0) -> Tensor:
    return Tensor(rng.normal(scale=scale, size=shape), requires_grad=True)


def _dense_chain(rng):
    x = _leaf(rng, 3, 4)
    first = DenseLayer(_leaf(rng, 4, 5), _leaf(rng, 5))
    second = DenseLayer(_leaf(rng, 5, 3), _leaf(rng, 3))
    labels = rng.integers(3, size=3)

    def fn():
        hidden = forward_dense(x, first, 'tanh')
        return cross_entropy(forward_dense(hidden, second, 'linear'), labels)

    return 'dense_chain', fn, [x, *first, *second]


def _softmax_log(rng):
    logits = _leaf(rng, 2, 6)
    weights = rng.normal(size=(2, 6))

    def fn():
        return (softmax(logits).log() * weights).sum() + (log_softmax(logits) * weights).mean()

    return 'softmax_log', fn, [logits]


def _concat_ratio(rng):
    a, b = _leaf(rng, 2, 3), _leaf(rng, 2, 2)

    def fn():
        joined = concat([a, b], axis=-1)
        return (joined.exp() / (1.0 + joined.exp())).mean() - (joined * joined).sum(axis=0).mean()

    return 'concat_ratio', fn, [a, b]


def _batched_matmul_index(rng):
    a, b = _leaf(rng, 2, 3, 4), _leaf(rng, 4, 2)
    rows = rng.integers(3, size=4)

    def fn():
        product = a @ b
        return (product[:, rows, :] * product[:, rows, :]).sum() - (a - 0.5).sum(axis=(1, 2)).mean()

    return 'batched_matmul_index', fn, [a, b]


def _attention(rng):
    cells = _leaf(rng, 16, 4)
    z = _leaf(rng, 4)

    def fn():
        scores = (cells @ z.reshape(4, 1)).reshape(16) * (1.0 / np.sqrt(4))
        weights = softmax(scores)
        attended = (weights.reshape(16, 1) * cells).sum(axis=0)
        return attended.tanh().sum()

    return 'attention', fn, [cells, z]


_GRAPH_BUILDERS = (_dense_chain, _softmax_log, _concat_ratio, _batched_matmul_index, _attention)


def random_graph_suite(graphs: int = 100, seed: int = 0) -> GradSuiteReport:
    rng = np.random.default_rng(seed)
    report = GradSuiteReport()
    for number in range(graphs):
        builder = _GRAPH_BUILDERS[int(rng.integers(len(_GRAPH_BUILDERS)))]
        name, fn, params = builder(rng)
        result = check_gradients(fn, params, name=f'{name}#{number}')
        report.graphs += 1
        report.max_relative_error = max(report.max_relative_error, result.max_relative_error)
        if not result.ok:
            logger.warning(f"梯度檢查失敗：{result.name} 相對誤差 {result.max_relative_error:.3e}")
            report.failures.append(result)
    return report


def straight_through_dual_check(trials: int = 100, seed: int = 0, width: int = 4) -> float:
    """
    比較 straight-through 圖與只走 softmax 的對照圖對 logits 的梯度，回傳最大絕對差。
    loss 對輸出為線性，兩條路徑的梯度應相同。
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        weights = rng.normal(size=width)
        hard_logits = _leaf(rng, width)
        soft_logits = Tensor(hard_logits.data.copy(), requires_grad=True)

        one_hot = categorical_straight_through(hard_logits, rng, 'sample')
        if not (np.isin(one_hot.data, (0.0, 1.0)).all() and one_hot.data.sum() == 1.0):
            raise AssertionError(f"straight-through 前向不是 one-hot：{one_hot.data}")
        (one_hot * weights).sum().backward()
        (softmax(soft_logits) * weights).sum().backward()
        worst = max(worst, float(np.max(np.abs(hard_logits.grad - soft_logits.grad))))
    return worst
