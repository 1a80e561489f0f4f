"""
獨立的樸素動態實作，只作為測試 oracle 使用。
刻意不引用 gridworld.dynamics 的任何函式。
"""
from gridworld.models import GridState, ObjectInstance


class ReferenceSteppedAfterDone(RuntimeError):
    pass


def _in_bounds(row, col, size):
    return row >= 0 and col >= 0 and row < size and col < size


def reference_step(state: GridState, action) -> tuple:
    if state.done:
        raise ReferenceSteppedAfterDone("done")
    action = str(action)
    size = state.size

    records = []
    for obj in state.objects:
        records.append({
            'color': obj.color, 'size': obj.size, 'weight': obj.weight, 'shape': obj.shape,
            'row': obj.position[0], 'col': obj.position[1],
            'is_target': obj.is_target, 'previous_force': str(obj.force_loaded), 'force': 'none',
        })
    row, col = state.agent

    def object_at(r, c):
        for position, record in enumerate(records):
            if record['row'] == r and record['col'] == c:
                return position
        return -1

    moved_target = False

    if action == 'forward' or action == 'backward' or action == 'left' or action == 'right':
        if action == 'forward':
            new_row, new_col = row - 1, col
        elif action == 'backward':
            new_row, new_col = row + 1, col
        elif action == 'left':
            new_row, new_col = row, col - 1
        else:
            new_row, new_col = row, col + 1
        if _in_bounds(new_row, new_col, size) and object_at(new_row, new_col) == -1:
            row, col = new_row, new_col

    elif action == 'push' or action == 'pull':
        chosen, d_row, d_col = -1, 0, 0
        if object_at(row - 1, col) != -1:
            chosen, d_row, d_col = object_at(row - 1, col), -1, 0
        elif object_at(row + 1, col) != -1:
            chosen, d_row, d_col = object_at(row + 1, col), 1, 0
        elif object_at(row, col - 1) != -1:
            chosen, d_row, d_col = object_at(row, col - 1), 0, -1
        elif object_at(row, col + 1) != -1:
            chosen, d_row, d_col = object_at(row, col + 1), 0, 1

        if chosen != -1:
            record = records[chosen]
            heavy = str(record['weight']) == 'heavy'
            ready = (not heavy) or record['previous_force'] == action
            if not ready:
                record['force'] = action
            elif action == 'push':
                dest_row, dest_col = record['row'] + d_row, record['col'] + d_col
                if _in_bounds(dest_row, dest_col, size) and object_at(dest_row, dest_col) == -1:
                    row, col = record['row'], record['col']
                    record['row'], record['col'] = dest_row, dest_col
                    moved_target = record['is_target']
            else:
                back_row, back_col = row - d_row, col - d_col
                if _in_bounds(back_row, back_col, size) and object_at(back_row, back_col) == -1:
                    record['row'], record['col'] = row, col
                    row, col = back_row, back_col
                    moved_target = record['is_target']

    reward = 0
    verb = str(state.task.verb)
    if verb == 'walk':
        for record in records:
            if record['is_target']:
                distance = abs(record['row'] - row) + abs(record['col'] - col)
                if distance == 1:
                    reward = 1
    elif moved_target and action == verb:
        reward = 1

    count = state.step + 1
    done = reward == 1 or count >= state.t_max

    objects = tuple(
        ObjectInstance(
            color=record['color'], size=record['size'], weight=record['weight'], shape=record['shape'],
            position=(record['row'], record['col']), is_target=record['is_target'],
            force_loaded=record['force'],
        )
        for record in records
    )
    successor = GridState(
        objects=objects, agent=(row, col), task=state.task, step=count, done=done,
        reward_last=reward, size=state.size, t_max=state.t_max,
    )
    return successor, reward, done
