"""
軌跡文字格式（每行一個 transition）：

    # task=pull/red/big/heavy/square size=4 t_max=30
    step;agent;action;reward;done;objects

agent 為 `row,col`；objects 以 `|` 分隔，每個物件為
`shape,color,size,weight,row,col,is_target,force_loaded`。
第 0 行記錄初始狀態，action 欄位為 `start`。
"""
from dataclasses import dataclass
from concepts.models import Concept
from gridworld.dynamics import step as env_step
from gridworld.models import GridState, ObjectInstance

START = 'start'


def _format_object(obj: ObjectInstance) -> str:
    return ','.join([
        str(obj.shape), str(obj.color), str(obj.size), str(obj.weight),
        str(obj.position[0]), str(obj.position[1]), str(int(obj.is_target)), str(obj.force_loaded),
    ])


def _parse_object(text: str) -> ObjectInstance:
    shape, color, size, weight, row, col, is_target, force = text.split(',')
    return ObjectInstance(
        color=color, size=size, weight=weight, shape=shape,
        position=(int(row), int(col)), is_target=is_target == '1', force_loaded=force,
    )


def format_transition(state: GridState, action, reward: int) -> str:
    objects = '|'.join(_format_object(obj) for obj in state.objects)
    return f"{state.step};{state.agent[0]},{state.agent[1]};{action};{reward};{int(state.done)};{objects}"


def format_header(state: GridState) -> str:
    return f"# task={state.task} size={state.size} t_max={state.t_max}"


def dump_trajectory(states: list, actions: list, rewards: list) -> str:
    """states 含初始狀態，長度比 actions 多 1"""
    lines = [format_header(states[0]), format_transition(states[0], START, 0)]
    for state, action, reward in zip(states[1:], actions, rewards):
        lines.append(format_transition(state, action, reward))
    return '\n'.join(lines) + '\n'


@dataclass
class DumpRow:
    step: int
    agent: tuple
    action: str
    reward: int
    done: bool
    objects: tuple


@dataclass
class ReplayResult:
    ok: bool
    steps: int
    divergent_step: int = -1
    expected: str = ''
    actual: str = ''


def parse_dump(text: str) -> tuple:
    """回傳 (task, size, t_max, rows)"""
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines or not lines[0].startswith('#'):
        raise ValueError("軌跡檔缺少 header")
    fields = dict(item.split('=', 1) for item in lines[0].lstrip('#').split())
    task = Concept.from_string(fields['task'])
    rows = []
    for line in lines[1:]:
        step_text, agent_text, action, reward, done, objects = line.split(';')
        row, col = agent_text.split(',')
        rows.append(DumpRow(
            step=int(step_text), agent=(int(row), int(col)), action=action,
            reward=int(reward), done=done == '1',
            objects=tuple(_parse_object(item) for item in objects.split('|') if item),
        ))
    return task, int(fields['size']), int(fields['t_max']), rows


def replay_dump(text: str) -> ReplayResult:
    """從初始狀態重新模擬，比對每一行，回報第一個不一致的步驟"""
    task, size, t_max, rows = parse_dump(text)
    first = rows[0]
    state = GridState(objects=first.objects, agent=first.agent, task=task, size=size, t_max=t_max)
    for row in rows[1:]:
        expected = format_transition(GridState(
            objects=row.objects, agent=row.agent, task=task, step=row.step,
            done=row.done, size=size, t_max=t_max,
        ), row.action, row.reward)
        state, reward, _ = env_step(state, row.action)
        actual = format_transition(state, row.action, reward)
        if actual != expected:
            return ReplayResult(ok=False, steps=row.step, divergent_step=row.step, expected=expected, actual=actual)
    return ReplayResult(ok=True, steps=len(rows) - 1)
