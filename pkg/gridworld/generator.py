import itertools
import logging
import numpy as np
from concepts.models import Color, Size, Weight, Shape
from concepts.splits import SplitSpec
from gridworld.models import GridState, ObjectInstance, GRID_SIZE, T_MAX, target_object_for

logger = logging.getLogger(__name__)

N_DISTRACTORS = 2

_ATTRIBUTE_SPACE = tuple(itertools.product(Color, Size, Weight, Shape))


class EmptyTaskClass(ValueError):
    pass


def distractor_candidates(target: ObjectInstance) -> list:
    """與 target 同色或同形（或兩者），且至少一個屬性不同"""
    return [
        (color, size, weight, shape)
        for color, size, weight, shape in _ATTRIBUTE_SPACE
        if (color == target.color or shape == target.shape)
        and (color, size, weight, shape) != target.attributes
    ]


def generate_episode(
    rng: np.random.Generator,
    split: SplitSpec,
    mode='train',
    task_filter=None,
    size: int = GRID_SIZE,
    t_max: int = T_MAX,
) -> GridState:
    pool = split.concepts_for(mode)
    if task_filter is not None:
        pool = [concept for concept in pool if concept.task_class == task_filter]
    if not pool:
        raise EmptyTaskClass(f"split={split.kind} mode={mode} task={task_filter} 沒有可用的概念")

    concept = pool[int(rng.integers(len(pool)))]

    cells = rng.choice(size * size, size=N_DISTRACTORS + 2, replace=False)
    positions = [(int(cell) // size, int(cell) % size) for cell in cells]
    agent = positions[0]

    target = target_object_for(concept, positions[1])
    candidates = distractor_candidates(target)
    objects = [target]
    for position in positions[2:]:
        color, obj_size, weight, shape = candidates[int(rng.integers(len(candidates)))]
        objects.append(ObjectInstance(
            color=color, size=obj_size, weight=weight, shape=shape, position=position,
        ))

    return GridState(objects=tuple(objects), agent=agent, task=concept, size=size, t_max=t_max)


def validate_state(state: GridState, n_objects: int = N_DISTRACTORS + 1) -> list:
    """回傳所有違反的不變量描述，空串列代表狀態合法"""
    problems = []
    if len(state.objects) != n_objects:
        problems.append(f"物件數量 {len(state.objects)} != {n_objects}")
    cells = [obj.position for obj in state.objects] + [state.agent]
    if len(set(cells)) != len(cells):
        problems.append("實體位置重疊")
    for cell in cells:
        if not state.inside(cell):
            problems.append(f"位置 {cell} 超出邊界")
    targets = [obj for obj in state.objects if obj.is_target]
    if len(targets) != 1:
        problems.append(f"target 數量 {len(targets)} != 1")
        return problems
    target = targets[0]
    if target.attributes != (state.task.color, state.task.size, state.task.weight, state.task.shape):
        problems.append("target 屬性與任務概念不一致")
    for obj in state.objects:
        if obj.is_target:
            continue
        if obj.color != target.color and obj.shape != target.shape:
            problems.append(f"distractor {obj.attributes} 與 target 無共同顏色或形狀")
        if obj.attributes == target.attributes:
            problems.append(f"distractor {obj.attributes} 與 target 完全相同")
    if state.step > state.t_max:
        problems.append("step 超過 T_max")
    return problems
