from dataclasses import dataclass
from django.db import models
from concepts.models import Concept, Color, Shape, Verb, Weight, all_concepts


class SplitKind(models.TextChoices):
    NONE = 'none', 'None'
    VISUAL = 'visual', 'Visual'
    NUMERAL = 'numeral', 'Numeral'


class SplitMode(models.TextChoices):
    TRAIN = 'train', 'Train'
    TEST = 'test', 'Test'


@dataclass(frozen=True)
class SplitSpec:
    kind: SplitKind
    train_concepts: frozenset
    test_concepts: frozenset

    def concepts_for(self, mode) -> list:
        """依固定順序回傳該模式的概念，確保抽樣可重現"""
        pool = self.train_concepts if SplitMode(mode) == SplitMode.TRAIN else self.test_concepts
        return [concept for concept in all_concepts() if concept in pool]


def _held_out(kind: SplitKind, concept: Concept) -> bool:
    if kind == SplitKind.VISUAL:
        return concept.color == Color.RED and concept.shape == Shape.SQUARE
    if kind == SplitKind.NUMERAL:
        return concept.verb == Verb.PULL and concept.weight == Weight.HEAVY
    return False


def make_split(kind) -> SplitSpec:
    kind = SplitKind(kind)
    concepts = all_concepts()
    test = frozenset(concept for concept in concepts if _held_out(kind, concept))
    train = frozenset(concept for concept in concepts if concept not in test)
    return SplitSpec(kind=kind, train_concepts=train, test_concepts=test)
