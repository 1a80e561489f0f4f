import numpy as np
from concepts.models import Concept, SLOT_CHOICES, SLOT_CARDINALITIES

CONCEPT_WIDTH = sum(SLOT_CARDINALITIES)

_SLOT_MEMBERS = tuple(tuple(choices) for choices in SLOT_CHOICES)
_SLOT_INDEX = tuple({member: index for index, member in enumerate(members)} for members in _SLOT_MEMBERS)


def slot_indices(concept: Concept) -> tuple:
    return tuple(lookup[value] for lookup, value in zip(_SLOT_INDEX, concept.slots))


def concept_from_indices(indices) -> Concept:
    return Concept(*(members[int(index)] for members, index in zip(_SLOT_MEMBERS, indices)))


def encode_concept(concept: Concept) -> np.ndarray:
    """各欄位 one-hot 區塊依 (verb, color, size, weight, shape) 串接，恰有 5 個位元為 1"""
    bits = np.zeros(CONCEPT_WIDTH, dtype=np.float64)
    offset = 0
    for index, cardinality in zip(slot_indices(concept), SLOT_CARDINALITIES):
        bits[offset + index] = 1.0
        offset += cardinality
    return bits


def encode_concepts(concepts) -> np.ndarray:
    return np.stack([encode_concept(concept) for concept in concepts])
