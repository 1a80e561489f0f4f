from dataclasses import dataclass
from django.db import models
from concepts.models import Concept, Color, Size, Weight, Shape

GRID_SIZE = 4
T_MAX = 30


class Action(models.TextChoices):
    LEFT = 'left', 'Left'
    RIGHT = 'right', 'Right'
    FORWARD = 'forward', 'Forward'
    BACKWARD = 'backward', 'Backward'
    PUSH = 'push', 'Push'
    PULL = 'pull', 'Pull'
    NOOP = 'noop', 'Noop'


class Force(models.TextChoices):
    NONE = 'none', 'None'
    PUSH = 'push', 'Push'
    PULL = 'pull', 'Pull'


# 絕對方向：forward 為北（row - 1），backward 為南
MOVES = {
    Action.FORWARD: (-1, 0),
    Action.BACKWARD: (1, 0),
    Action.LEFT: (0, -1),
    Action.RIGHT: (0, 1),
}

# 多個相鄰物件時的優先順序：上、下、左、右
ADJACENCY_PRIORITY = ((-1, 0), (1, 0), (0, -1), (0, 1))

ACTIONS = tuple(Action)


@dataclass(frozen=True)
class ObjectInstance:
    color: Color
    size: Size
    weight: Weight
    shape: Shape
    position: tuple
    is_target: bool = False
    force_loaded: Force = Force.NONE

    def __post_init__(self):
        object.__setattr__(self, 'color', Color(self.color))
        object.__setattr__(self, 'size', Size(self.size))
        object.__setattr__(self, 'weight', Weight(self.weight))
        object.__setattr__(self, 'shape', Shape(self.shape))
        object.__setattr__(self, 'position', (int(self.position[0]), int(self.position[1])))
        object.__setattr__(self, 'is_target', bool(self.is_target))
        object.__setattr__(self, 'force_loaded', Force(self.force_loaded))

    @property
    def attributes(self) -> tuple:
        return (self.color, self.size, self.weight, self.shape)


@dataclass(frozen=True)
class GridState:
    objects: tuple
    agent: tuple
    task: Concept
    step: int = 0
    done: bool = False
    reward_last: int = 0
    size: int = GRID_SIZE
    t_max: int = T_MAX

    def __post_init__(self):
        object.__setattr__(self, 'objects', tuple(self.objects))
        object.__setattr__(self, 'agent', (int(self.agent[0]), int(self.agent[1])))

    @property
    def target(self) -> ObjectInstance:
        return next(obj for obj in self.objects if obj.is_target)

    @property
    def occupied(self) -> frozenset:
        return frozenset(obj.position for obj in self.objects)

    def inside(self, cell) -> bool:
        return 0 <= cell[0] < self.size and 0 <= cell[1] < self.size


def target_object_for(concept: Concept, position: tuple) -> ObjectInstance:
    return ObjectInstance(
        color=concept.color, size=concept.size, weight=concept.weight,
        shape=concept.shape, position=position, is_target=True,
    )
