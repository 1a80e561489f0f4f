import numpy as np
from django.test import SimpleTestCase

from concepts.encoding import encode_concept, slot_indices, concept_from_indices, CONCEPT_WIDTH
from concepts.grammar import (
    parse_instruction, render_instruction, UnknownToken, MissingSlot, ConflictingWeight, GrammarError,
)
from concepts.models import Concept, all_concepts, TASK_CLASSES, Verb, Weight
from concepts.splits import make_split, SplitKind


class GrammarTests(SimpleTestCase):

    def test_parse_examples(self):
        self.assertEqual(
            parse_instruction("pull the big red square twice"),
            Concept('pull', 'red', 'big', 'heavy', 'square'),
        )
        self.assertEqual(
            parse_instruction("walk to the small red square"),
            Concept('walk', 'red', 'small', 'light', 'square'),
        )
        self.assertEqual(
            parse_instruction("push the big heavy green cylinder"),
            Concept('push', 'green', 'big', 'heavy', 'cylinder'),
        )

    def test_render_examples(self):
        self.assertEqual(
            render_instruction(Concept('push', 'red', 'small', 'light', 'circle')),
            "push the small red circle",
        )
        self.assertEqual(
            render_instruction(Concept('pull', 'blue', 'big', 'heavy', 'diamond')),
            "pull the big blue diamond twice",
        )
        self.assertEqual(
            render_instruction(Concept('walk', 'green', 'small', 'heavy', 'square')),
            "walk to the small heavy green square",
        )

    def test_round_trip_over_all_concepts(self):
        for concept in all_concepts():
            self.assertEqual(parse_instruction(render_instruction(concept)), concept)

    def test_article_and_explicit_light(self):
        self.assertEqual(
            parse_instruction("push a small light blue circle"),
            Concept('push', 'blue', 'small', 'light', 'circle'),
        )

    def test_errors(self):
        with self.assertRaises(UnknownToken):
            parse_instruction("jump to the small red square")
        with self.assertRaises(MissingSlot):
            parse_instruction("push the red square")
        with self.assertRaises(MissingSlot):
            parse_instruction("walk the small red square")
        with self.assertRaises(MissingSlot):
            parse_instruction("pull the small red")
        with self.assertRaises(ConflictingWeight):
            parse_instruction("pull the big light red square twice")
        with self.assertRaises(GrammarError):
            parse_instruction("pull the big red square square")

    def test_concept_log_format(self):
        concept = Concept('pull', 'red', 'big', 'heavy', 'square')
        self.assertEqual(str(concept), "pull/red/big/heavy/square")
        self.assertEqual(Concept.from_string(str(concept)), concept)
        self.assertEqual(concept.task_class, 'pull_heavy')


class EncodingTests(SimpleTestCase):

    def test_concept_space_size(self):
        self.assertEqual(len(all_concepts()), 192)
        self.assertEqual(len(set(all_concepts())), 192)
        self.assertEqual(len(TASK_CLASSES), 6)

    def test_first_and_last_values(self):
        first = encode_concept(Concept('walk', 'red', 'small', 'light', 'square'))
        expected = np.array([1, 0, 0, 1, 0, 0, 0, 1, 0, 1, 0, 1, 0, 0, 0], dtype=float)
        np.testing.assert_array_equal(first, expected)

        last = encode_concept(Concept('pull', 'green', 'big', 'heavy', 'diamond'))
        expected = np.array([0, 0, 1, 0, 0, 0, 1, 0, 1, 0, 1, 0, 0, 0, 1], dtype=float)
        np.testing.assert_array_equal(last, expected)

    def test_encoding_is_injective_with_five_bits(self):
        seen = set()
        for concept in all_concepts():
            bits = encode_concept(concept)
            self.assertEqual(bits.shape, (CONCEPT_WIDTH,))
            self.assertEqual(int(bits.sum()), 5)
            seen.add(bits.tobytes())
        self.assertEqual(len(seen), 192)

    def test_slot_indices_round_trip(self):
        for concept in all_concepts():
            self.assertEqual(concept_from_indices(slot_indices(concept)), concept)


class SplitTests(SimpleTestCase):

    def test_split_sizes(self):
        visual = make_split('visual')
        self.assertEqual(len(visual.test_concepts), 12)
        numeral = make_split('numeral')
        self.assertEqual(len(numeral.test_concepts), 32)
        none = make_split(SplitKind.NONE)
        self.assertEqual(len(none.train_concepts), 192)
        self.assertEqual(len(none.test_concepts), 0)

    def test_split_partition(self):
        universe = set(all_concepts())
        for kind in SplitKind:
            split = make_split(kind)
            self.assertFalse(split.train_concepts & split.test_concepts)
            self.assertEqual(set(split.train_concepts | split.test_concepts), universe)

    def test_numeral_test_set_is_pull_heavy(self):
        for concept in make_split('numeral').test_concepts:
            self.assertEqual(concept.verb, Verb.PULL)
            self.assertEqual(concept.weight, Weight.HEAVY)

    def test_concepts_for_is_ordered(self):
        split = make_split('visual')
        self.assertEqual(split.concepts_for('train'), split.concepts_for('train'))
        self.assertEqual(len(split.concepts_for('test')), 12)
