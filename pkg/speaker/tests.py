import numpy as np
from django.test import SimpleTestCase
from scipy.stats import chisquare

from concepts.encoding import encode_concepts
from concepts.models import Concept, all_concepts
from diffcore.tensor import Tensor
from speaker.language import (
    perfect_speak, perfect_language_table, language_table, count_collisions, is_injective,
    format_language_table, parse_language_table,
)
from speaker.models import ChannelConfig, ChannelTooNarrow, Message
from speaker.network import (
    init_speaker, speak, sample_messages, speaker_message_tensor, message_distribution,
)


class MessageTests(SimpleTestCase):

    def test_channel_capacity(self):
        channel = ChannelConfig()
        self.assertEqual(channel.capacity, 1024)
        self.assertGreaterEqual(channel.capacity, len(all_concepts()))
        with self.assertRaises(ValueError):
            ChannelConfig(d_m=1)

    def test_one_hot_rows(self):
        message = Message((2, 0, 1, 3, 0))
        one_hot = message.one_hot()
        self.assertEqual(one_hot.shape, (5, 4))
        np.testing.assert_array_equal(one_hot.sum(axis=1), np.ones(5))
        self.assertEqual(Message.from_one_hot(one_hot), message)
        self.assertEqual(str(message), '2 0 1 3 0')

    def test_symbol_out_of_range(self):
        with self.assertRaises(ValueError):
            Message((0, 4), d_m=4)


class PerfectSpeakerTests(SimpleTestCase):

    def test_first_and_last_concepts(self):
        self.assertEqual(perfect_speak(Concept('walk', 'red', 'small', 'light', 'square')).symbols, (0, 0, 0, 0, 0))
        self.assertEqual(perfect_speak(Concept('pull', 'green', 'big', 'heavy', 'diamond')).symbols, (2, 3, 1, 1, 3))

    def test_injective(self):
        table = perfect_language_table()
        self.assertEqual(len(set(table.values())), 192)
        self.assertTrue(is_injective(table))

    def test_channel_too_narrow(self):
        with self.assertRaises(ChannelTooNarrow):
            perfect_speak(Concept('walk', 'red', 'small', 'light', 'square'), d_m=3)


class LearnedSpeakerTests(SimpleTestCase):

    def setUp(self):
        self.channel = ChannelConfig()
        self.store = init_speaker(np.random.default_rng(0), self.channel, d_h=16)

    def test_eval_mode_is_deterministic(self):
        concept = Concept('push', 'blue', 'big', 'light', 'circle')
        first, _ = speak(concept, self.store, np.random.default_rng(1), self.channel, 'eval')
        second, _ = speak(concept, self.store, np.random.default_rng(2), self.channel, 'eval')
        self.assertEqual(first, second)

    def test_all_concepts_yield_valid_messages(self):
        rng = np.random.default_rng(3)
        for concept in all_concepts():
            message, log_probs = speak(concept, self.store, rng, self.channel, 'train')
            self.assertEqual(message.n_m, 5)
            np.testing.assert_array_equal(message.one_hot().sum(axis=1), np.ones(5))
            self.assertEqual(log_probs.shape, (5,))
            self.assertTrue(np.all(log_probs <= 0))

    def test_train_mode_frequencies_follow_softmax(self):
        concept = Concept('pull', 'yellow', 'small', 'heavy', 'square')
        probs = message_distribution(concept, self.store, self.channel)
        rng = np.random.default_rng(4)
        counts = np.zeros((5, 4))
        for _ in range(10_000):
            message, _ = speak(concept, self.store, rng, self.channel, 'train')
            counts[np.arange(5), message.symbols] += 1
        for position in range(5):
            result = chisquare(counts[position], probs[position] * 10_000)
            self.assertGreater(result.pvalue, 0.01)

    def test_pseudo_messages_share_the_distribution(self):
        concept = Concept('walk', 'green', 'big', 'light', 'diamond')
        messages = sample_messages(concept, self.store, np.random.default_rng(5), self.channel, 4000)
        frequencies = np.mean([message.one_hot() for message in messages], axis=0)
        np.testing.assert_allclose(frequencies, message_distribution(concept, self.store, self.channel), atol=0.04)

    def test_rebuilt_message_tensor_carries_gradient(self):
        concepts = all_concepts()[:3]
        symbols = np.array([[0, 1, 2, 3, 0], [1, 1, 1, 1, 1], [3, 2, 1, 0, 3]])
        bits, log_probs = speaker_message_tensor(self.store, encode_concepts(concepts), symbols, self.channel)
        self.assertEqual(bits.shape, (3, 20))
        np.testing.assert_array_equal(bits.data[0].reshape(5, 4).argmax(axis=1), symbols[0])
        (bits * Tensor(np.ones((3, 20))) + log_probs.sum()).sum().backward()
        self.assertIsNotNone(self.store['encoder.weight'].grad)


class LanguageTableTests(SimpleTestCase):

    def test_table_is_stable(self):
        channel = ChannelConfig()
        store = init_speaker(np.random.default_rng(7), channel, d_h=8)
        first = language_table(store, channel)
        self.assertEqual(first, language_table(store, channel))
        self.assertEqual(len(first), 192)
        self.assertEqual(count_collisions(first), 192 - len(set(first.values())))

    def test_constant_table_collisions(self):
        table = {concept: Message((0, 0, 0, 0, 0)) for concept in all_concepts()}
        self.assertEqual(count_collisions(table), 191)

    def test_text_export_round_trip(self):
        table = perfect_language_table()
        text = format_language_table(table)
        self.assertIn('pull/green/big/heavy/diamond → 2 3 1 1 3\n', text)
        self.assertEqual(parse_language_table(text, d_m=4), table)
