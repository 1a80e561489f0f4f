import itertools
import logging
from dataclasses import dataclass, field
import numpy as np
from concepts.models import Concept, Verb, Weight, Color, Size, Shape
from concepts.splits import make_split
from gridworld.dynamics import step, SteppedAfterDone
from gridworld.generator import generate_episode
from gridworld.models import GridState, ACTIONS, target_object_for
from gridworld.reference import reference_step, ReferenceSteppedAfterDone

logger = logging.getLogger(__name__)


@dataclass
class DifferentialReport:
    transitions: int = 0
    mismatches: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.mismatches


def task_predicate_holds(before: GridState, action, after: GridState) -> bool:
    """獨立的成功判定：只看 transition 前後的狀態"""
    target_before = before.target
    target_after = after.target
    if before.task.verb == Verb.WALK:
        distance = abs(after.agent[0] - target_after.position[0]) + abs(after.agent[1] - target_after.position[1])
        return distance == 1
    return str(action) == str(before.task.verb) and target_before.position != target_after.position


def _compare(state: GridState, action, report: DifferentialReport):
    """回傳兩個實作共同的後繼狀態；不一致或已結束時回傳 None"""
    report.transitions += 1
    try:
        fast = step(state, action)
    except SteppedAfterDone:
        fast = 'done'
    try:
        slow = reference_step(state, action)
    except ReferenceSteppedAfterDone:
        slow = 'done'
    if fast != slow:
        report.mismatches.append((state, str(action), fast, slow))
        return None
    if fast == 'done':
        return None
    return fast[0]


def small_start_states(size: int = 3) -> list:
    """3x3 單一物件的所有擺放 × 重量 × 動詞"""
    states = []
    cells = [(row, col) for row in range(size) for col in range(size)]
    for agent, position in itertools.permutations(cells, 2):
        for weight in Weight:
            for verb in Verb:
                concept = Concept(verb, Color.RED, Size.SMALL, weight, Shape.SQUARE)
                states.append(GridState(
                    objects=(target_object_for(concept, position),), agent=agent, task=concept, size=size,
                ))
    return states


def exhaustive_small_suite(size: int = 3, depth: int = 4) -> DifferentialReport:
    report = DifferentialReport()

    def expand(state: GridState, remaining: int):
        if remaining == 0:
            return
        for action in ACTIONS:
            successor = _compare(state, action, report)
            if successor is not None:
                expand(successor, remaining - 1)

    for start in small_start_states(size):
        expand(start, depth)
    logger.info("small-instance 差分檢查：%d transitions，%d 個不一致", report.transitions, len(report.mismatches))
    return report


def randomized_suite(transitions: int = 100_000, seed: int = 0) -> DifferentialReport:
    rng = np.random.default_rng(seed)
    split = make_split('none')
    report = DifferentialReport()
    state = generate_episode(rng, split, 'train')
    while report.transitions < transitions:
        action = ACTIONS[int(rng.integers(len(ACTIONS)))]
        successor = _compare(state, action, report)
        if successor is None or successor.done:
            state = generate_episode(rng, split, 'train')
        else:
            state = successor
    logger.info("隨機差分檢查：%d transitions，%d 個不一致", report.transitions, len(report.mismatches))
    return report
