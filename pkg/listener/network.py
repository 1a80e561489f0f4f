"""
Listener 的網路結構：

- grid encoder：每格 [cell bits ∥ 相對 agent 的正規化 (Δrow, Δcol)] → dense(d_G, tanh)
- message encoder：z = tanh(dense(訊息 bits))
- attention：α = softmax_i((z · cell_i) / √d_G)，attended = Σ α_i · cell_i
- master：[z ∥ attended_0] → dense(d_h, tanh) → 3 個 arm 的 logits
- 每個 arm：[attended ∥ z] → dense(d_h, tanh) → 5 個區域動作 logits
"""
import numpy as np

from diffcore.functional import forward_dense, softmax
from diffcore.store import ParamStore
from diffcore.tensor import Tensor, ShapeMismatch, as_tensor, concat, no_grad
from gridworld.encoding import AGENT_PLANE, grid_depth
from listener.models import ARMS, ARM_ACTION_COUNT, AttentionOutput

DEFAULT_D_G = 32
DEFAULT_D_H = 64
COORDINATE_CHANNELS = 2
STORE_NAME = 'listener'


def init_listener(rng: np.random.Generator, message_width: int, oracle: bool = False,
                  d_g: int = DEFAULT_D_G, d_h: int = DEFAULT_D_H) -> ParamStore:
    store = ParamStore(STORE_NAME)
    store.add_dense('message', message_width, d_g, rng)
    store.add_dense('cell', grid_depth(oracle) + COORDINATE_CHANNELS, d_g, rng)
    store.add_dense('master.hidden', 2 * d_g, d_h, rng)
    store.add_dense('master.out', d_h, len(ARMS), rng)
    for arm in ARMS:
        store.add_dense(f'arm.{arm}.hidden', 2 * d_g, d_h, rng)
        store.add_dense(f'arm.{arm}.out', d_h, ARM_ACTION_COUNT, rng)
    return store


def cell_inputs(grids) -> np.ndarray:
    """
    (..., D, S, S) → (..., S·S, D + 2)，每格附上相對於 agent 的正規化座標 ((row - agent_row), (col - agent_col)) / (S - 1)。
    agent 平面全為 0 時以 (0, 0) 為原點。
    """
    grids = np.asarray(grids, dtype=np.float64)
    if grids.ndim < 3 or grids.shape[-1] != grids.shape[-2]:
        raise ShapeMismatch(f"grid 編碼應為 (..., D, S, S)，收到 {grids.shape}")
    if grids.shape[-3] <= AGENT_PLANE:
        raise ShapeMismatch(f"grid 編碼缺少 agent 平面，深度 {grids.shape[-3]}")
    size = grids.shape[-1]
    cells = np.moveaxis(grids.reshape(*grids.shape[:-2], size * size), -2, -1)
    agent_index = grids[..., AGENT_PLANE, :, :].reshape(*grids.shape[:-3], size * size).argmax(axis=-1)
    agent_row, agent_col = np.divmod(agent_index, size)
    rows, cols = np.divmod(np.arange(size * size), size)
    scale = max(size - 1, 1)
    coordinates = np.stack([
        rows - np.expand_dims(agent_row, -1),
        cols - np.expand_dims(agent_col, -1),
    ], axis=-1) / scale
    coordinates = np.broadcast_to(coordinates, cells.shape[:-1] + (COORDINATE_CHANNELS,))
    return np.concatenate([cells, coordinates], axis=-1)


def encode_grid_features(grids, store: ParamStore) -> Tensor:
    return forward_dense(cell_inputs(grids), store.dense('cell'), 'tanh')


def message_summary(bits, store: ParamStore) -> Tensor:
    return forward_dense(bits, store.dense('message'), 'tanh')


def attention(z, cells) -> tuple:
    """回傳 (α, attended) 兩個 Tensor；z 為 (..., d_G)，cells 為 (..., n, d_G)"""
    z, cells = as_tensor(z), as_tensor(cells)
    d_g = cells.shape[-1]
    if z.shape[-1] != d_g or z.shape[:-1] != cells.shape[:-2]:
        raise ShapeMismatch(f"z {z.shape} 與 cells {cells.shape} 不相容")
    scores = (cells @ z.reshape(*z.shape[:-1], d_g, 1)).reshape(*cells.shape[:-1])
    weights = softmax(scores * (1.0 / np.sqrt(d_g)))
    attended = (weights.reshape(*weights.shape, 1) * cells).sum(axis=-2)
    return weights, attended


def attend(z, cells) -> AttentionOutput:
    with no_grad():
        weights, attended = attention(z, cells)
    return AttentionOutput(weights=weights.data, attended=attended.data)


def master_logits(z: Tensor, attended_start: Tensor, store: ParamStore) -> Tensor:
    hidden = forward_dense(concat([z, attended_start], axis=-1), store.dense('master.hidden'), 'tanh')
    return forward_dense(hidden, store.dense('master.out'), 'linear')


def arm_logits(z: Tensor, attended: Tensor, store: ParamStore) -> Tensor:
    """三個 arm 的區域動作 logits，形狀 (..., 3, 5)"""
    features = concat([attended, z], axis=-1)
    rows = []
    for arm in ARMS:
        hidden = forward_dense(features, store.dense(f'arm.{arm}.hidden'), 'tanh')
        logits = forward_dense(hidden, store.dense(f'arm.{arm}.out'), 'linear')
        rows.append(logits.reshape(*logits.shape[:-1], 1, ARM_ACTION_COUNT))
    return concat(rows, axis=-2)
