import itertools
from dataclasses import dataclass
from django.db import models


class Verb(models.TextChoices):
    WALK = 'walk', 'Walk'
    PUSH = 'push', 'Push'
    PULL = 'pull', 'Pull'


class Color(models.TextChoices):
    RED = 'red', 'Red'
    BLUE = 'blue', 'Blue'
    YELLOW = 'yellow', 'Yellow'
    GREEN = 'green', 'Green'


class Size(models.TextChoices):
    SMALL = 'small', 'Small'
    BIG = 'big', 'Big'


class Weight(models.TextChoices):
    LIGHT = 'light', 'Light'
    HEAVY = 'heavy', 'Heavy'


class Shape(models.TextChoices):
    SQUARE = 'square', 'Square'
    CIRCLE = 'circle', 'Circle'
    CYLINDER = 'cylinder', 'Cylinder'
    DIAMOND = 'diamond', 'Diamond'


# 概念欄位的固定順序：verb, color, size, weight, shape
SLOT_NAMES = ('verb', 'color', 'size', 'weight', 'shape')
SLOT_CHOICES = (Verb, Color, Size, Weight, Shape)
SLOT_CARDINALITIES = tuple(len(choices) for choices in SLOT_CHOICES)


@dataclass(frozen=True)
class Concept:
    verb: Verb
    color: Color
    size: Size
    weight: Weight
    shape: Shape

    def __post_init__(self):
        # 允許以字串建立，統一轉成 TextChoices
        for name, choices in zip(SLOT_NAMES, SLOT_CHOICES):
            object.__setattr__(self, name, choices(getattr(self, name)))

    def __str__(self):
        return '/'.join(str(value) for value in self.slots)

    @property
    def slots(self) -> tuple:
        return (self.verb, self.color, self.size, self.weight, self.shape)

    @property
    def task_class(self) -> str:
        return task_class_name(self.verb, self.weight)

    @classmethod
    def from_string(cls, text: str) -> 'Concept':
        """由 log 格式 `pull/red/big/heavy/square` 還原"""
        parts = text.strip().split('/')
        if len(parts) != len(SLOT_NAMES):
            raise ValueError(f"概念格式錯誤: {text}")
        return cls(*parts)


def task_class_name(verb, weight) -> str:
    return f"{Verb(verb)}_{Weight(weight)}"


# 任務類別為 (verb, weight)，共 6 類
TASK_CLASSES = tuple(task_class_name(verb, weight) for verb in Verb for weight in Weight)


def parse_task_class(name: str) -> tuple:
    verb, weight = name.split('_')
    return Verb(verb), Weight(weight)


def all_concepts() -> list:
    """依固定順序列舉整個概念空間（192 個）"""
    return [Concept(*values) for values in itertools.product(*SLOT_CHOICES)]
