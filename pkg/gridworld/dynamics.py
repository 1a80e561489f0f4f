import logging
from dataclasses import replace
from concepts.models import Verb, Weight
from gridworld.models import GridState, Action, Force, MOVES, ADJACENCY_PRIORITY

logger = logging.getLogger(__name__)


class SteppedAfterDone(RuntimeError):
    pass


def _adjacent_object(state: GridState, agent: tuple):
    """依方向優先順序找出唯一的互動物件，回傳 (index, direction)"""
    by_cell = {obj.position: index for index, obj in enumerate(state.objects)}
    for direction in ADJACENCY_PRIORITY:
        cell = (agent[0] + direction[0], agent[1] + direction[1])
        if cell in by_cell:
            return by_cell[cell], direction
    return None


def _displace(state: GridState, action: Action, index: int, direction: tuple):
    """回傳 (new_agent, new_object_position)；無法移動時回傳 None"""
    agent = state.agent
    obj_cell = state.objects[index].position
    blocked = state.occupied - {obj_cell}
    if action == Action.PUSH:
        destination = (obj_cell[0] + direction[0], obj_cell[1] + direction[1])
        if not state.inside(destination) or destination in blocked:
            return None
        return obj_cell, destination
    retreat = (agent[0] - direction[0], agent[1] - direction[1])
    if not state.inside(retreat) or retreat in blocked:
        return None
    return retreat, agent


def is_adjacent(a: tuple, b: tuple) -> bool:
    return abs(a[0] - b[0]) + abs(a[1] - b[1]) == 1


def step(state: GridState, action) -> tuple:
    if state.done:
        raise SteppedAfterDone("episode 已結束，不再接受動作")
    action = Action(action)

    agent = state.agent
    objects = [replace(obj, force_loaded=Force.NONE) for obj in state.objects]
    displaced = None

    if action in MOVES:
        delta = MOVES[action]
        destination = (agent[0] + delta[0], agent[1] + delta[1])
        if state.inside(destination) and destination not in state.occupied:
            agent = destination
    elif action in (Action.PUSH, Action.PULL):
        found = _adjacent_object(state, agent)
        if found is not None:
            index, direction = found
            current = state.objects[index]
            # 重物需要連續兩次相同的施力
            if current.weight == Weight.HEAVY and current.force_loaded != Force(action):
                objects[index] = replace(current, force_loaded=Force(action))
            else:
                result = _displace(state, action, index, direction)
                if result is not None:
                    agent, new_position = result
                    objects[index] = replace(objects[index], position=new_position)
                    displaced = index

    count = state.step + 1
    task = state.task
    target_index = next(i for i, obj in enumerate(objects) if obj.is_target)
    if task.verb == Verb.WALK:
        reward = int(is_adjacent(agent, objects[target_index].position))
    else:
        reward = int(displaced == target_index and str(action) == str(task.verb))
    done = reward == 1 or count >= state.t_max

    successor = replace(
        state, objects=tuple(objects), agent=agent, step=count, done=done, reward_last=reward,
    )
    if reward:
        logger.debug("任務完成 %s 於第 %d 步", task, count)
    return successor, reward, done
