"""
每個格子的 d_grid = 14 位元編碼（Oracle 版本再加一個 target 平面）：

    0        object present
    1 - 4    shape (square, circle, cylinder, diamond)
    5 - 8    color (red, blue, yellow, green)
    9 - 10   size (small, big)
    11 - 12  weight (light, heavy)
    13       agent present
    14       target (oracle only)
"""
import numpy as np
from concepts.models import Color, Size, Weight, Shape
from gridworld.models import GridState

PRESENT_PLANE = 0
SHAPE_OFFSET = 1
COLOR_OFFSET = 5
SIZE_OFFSET = 9
WEIGHT_OFFSET = 11
AGENT_PLANE = 13
TARGET_PLANE = 14

D_GRID = 14

_SHAPES = {value: index for index, value in enumerate(Shape)}
_COLORS = {value: index for index, value in enumerate(Color)}
_SIZES = {value: index for index, value in enumerate(Size)}
_WEIGHTS = {value: index for index, value in enumerate(Weight)}


def grid_depth(oracle: bool) -> int:
    return D_GRID + 1 if oracle else D_GRID


def encode_grid(state: GridState, oracle: bool = False) -> np.ndarray:
    grid = np.zeros((grid_depth(oracle), state.size, state.size), dtype=np.float64)
    for obj in state.objects:
        row, col = obj.position
        grid[PRESENT_PLANE, row, col] = 1.0
        grid[SHAPE_OFFSET + _SHAPES[obj.shape], row, col] = 1.0
        grid[COLOR_OFFSET + _COLORS[obj.color], row, col] = 1.0
        grid[SIZE_OFFSET + _SIZES[obj.size], row, col] = 1.0
        grid[WEIGHT_OFFSET + _WEIGHTS[obj.weight], row, col] = 1.0
        if oracle and obj.is_target:
            grid[TARGET_PLANE, row, col] = 1.0
    grid[AGENT_PLANE, state.agent[0], state.agent[1]] = 1.0
    return grid
