import math
from collections import defaultdict

import numpy as np
from django.test import SimpleTestCase

from concepts.encoding import slot_indices
from concepts.models import Concept, all_concepts, SLOT_CARDINALITIES
from gridworld.encoding import encode_grid
from gridworld.generator import generate_episode
from concepts.splits import make_split
from intrinsic.buffer import PairBuffer, BufferTooSmall
from intrinsic.discriminator import init_discriminator, train_discriminator, slot_accuracy
from intrinsic.rewards import (
    coverage_reward, coverage_from_log_probs, influence_reward, influence_from_distributions,
    MAX_COVERAGE, MARGINAL_EPSILON,
)
from diffcore.functional import kl_divergence
from listener.network import init_listener
from listener.policy import action_distribution
from speaker.language import perfect_language_table, perfect_speak
from speaker.models import ChannelConfig, Message
from speaker.network import init_speaker, message_distribution, speak

LAMBDA1 = 0.1


def bayes_log_probs(table: dict) -> dict:
    """每個訊息下各欄位的後驗（收斂的 discriminator），concept 均勻分布"""
    by_message = defaultdict(list)
    for concept, message in table.items():
        by_message[message].append(slot_indices(concept))
    posterior = {}
    for message, members in by_message.items():
        members = np.array(members)
        rows = []
        for position, cardinality in enumerate(SLOT_CARDINALITIES):
            counts = np.bincount(members[:, position], minlength=cardinality) / len(members)
            with np.errstate(divide='ignore'):
                rows.append(np.log(counts))
        posterior[message] = rows
    return posterior


def mean_optimal_coverage(table: dict) -> float:
    posterior = bayes_log_probs(table)
    return float(np.mean([
        coverage_from_log_probs(posterior[message], slot_indices(concept), LAMBDA1)
        for concept, message in table.items()
    ]))


class PairBufferTests(SimpleTestCase):

    def test_fifo_and_capacity_under_random_inserts(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            capacity = int(rng.integers(1, 30))
            buffer = PairBuffer(capacity)
            inserted = []
            for step in range(int(rng.integers(0, 80))):
                buffer.add(step, step)
                inserted.append((step, step))
                self.assertLessEqual(len(buffer), capacity)
            self.assertEqual(list(buffer), inserted[-capacity:] if inserted else [])

    def test_sample_requires_enough_pairs(self):
        buffer = PairBuffer(10)
        buffer.add('c', 'm')
        with self.assertRaises(BufferTooSmall):
            buffer.sample(np.random.default_rng(0), 2)


class CoverageRewardTests(SimpleTestCase):

    def setUp(self):
        self.channel = ChannelConfig()
        self.discriminator = init_discriminator(np.random.default_rng(0), self.channel.width, d_h=16)
        self.concept = Concept('pull', 'blue', 'big', 'heavy', 'cylinder')
        self.message = perfect_speak(self.concept)

    def _set_heads(self, favoured=None, strength=50.0):
        for position, slot in enumerate(('verb', 'color', 'size', 'weight', 'shape')):
            head = self.discriminator.dense(f'head.{slot}')
            head.weight.data[:] = 0.0
            head.bias.data[:] = 0.0
            if favoured is not None:
                head.bias.data[favoured[position]] = strength

    def test_perfect_discriminator(self):
        self._set_heads(slot_indices(self.concept))
        reward = coverage_reward(self.concept, self.message, self.discriminator, LAMBDA1)
        self.assertAlmostEqual(reward, LAMBDA1 * 5.0752, places=4)
        self.assertAlmostEqual(reward, LAMBDA1 * MAX_COVERAGE, places=6)

    def test_uniform_discriminator_scores_zero(self):
        self._set_heads()
        self.assertEqual(coverage_reward(self.concept, self.message, self.discriminator, LAMBDA1), 0.0)

    def test_log_probs_are_clamped(self):
        log_probs = [np.full(cardinality, -np.inf) for cardinality in SLOT_CARDINALITIES]
        reward = coverage_from_log_probs(log_probs, (0, 0, 0, 0, 0), 1.0)
        self.assertAlmostEqual(reward, -100.0 + MAX_COVERAGE)

    def test_injective_code_beats_merged_codes(self):
        table = perfect_language_table()
        injective = mean_optimal_coverage(table)
        self.assertAlmostEqual(injective, LAMBDA1 * MAX_COVERAGE)
        concepts = all_concepts()
        rng = np.random.default_rng(1)
        for _ in range(50):
            first, second = rng.choice(len(concepts), size=2, replace=False)
            merged = dict(table)
            merged[concepts[second]] = table[concepts[first]]
            self.assertGreaterEqual(injective, mean_optimal_coverage(merged))

    def test_constant_speaker_converges_to_zero(self):
        buffer = PairBuffer(1000)
        constant = Message((0, 0, 0, 0, 0))
        for concept in all_concepts():
            buffer.add(concept, constant)
        train_discriminator(self.discriminator, buffer, 400, 64, np.random.default_rng(2), lr=0.01)
        rewards = [coverage_reward(concept, constant, self.discriminator, 1.0) for concept in all_concepts()]
        self.assertAlmostEqual(float(np.mean(rewards)), 0.0, delta=0.05)


class DiscriminatorTrainingTests(SimpleTestCase):

    def setUp(self):
        self.channel = ChannelConfig()
        self.discriminator = init_discriminator(np.random.default_rng(3), self.channel.width)

    def test_perfect_speaker_code_is_learned(self):
        buffer = PairBuffer(10_000)
        for concept, message in perfect_language_table().items():
            buffer.add(concept, message)
        _, loss = train_discriminator(self.discriminator, buffer, 200, 64, np.random.default_rng(4), lr=0.01)
        np.testing.assert_array_equal(slot_accuracy(self.discriminator, buffer), np.ones(5))
        self.assertLess(loss, MAX_COVERAGE)

    def test_constant_speaker_accuracy_is_mode_frequency(self):
        buffer = PairBuffer(10_000)
        constant = Message((1, 2, 3, 0, 1))
        for concept in all_concepts():
            buffer.add(concept, constant)
            if concept.verb == 'walk':
                buffer.add(concept, constant)
        train_discriminator(self.discriminator, buffer, 300, 64, np.random.default_rng(5), lr=0.01)
        accuracy = slot_accuracy(self.discriminator, buffer)
        self.assertAlmostEqual(accuracy[0], 0.5)
        for position, cardinality in enumerate(SLOT_CARDINALITIES[1:], start=1):
            self.assertAlmostEqual(accuracy[position], 1.0 / cardinality)

    def test_speaker_parameters_untouched(self):
        speaker = init_speaker(np.random.default_rng(6), self.channel, d_h=16)
        buffer = PairBuffer(500)
        rng = np.random.default_rng(7)
        for concept in all_concepts():
            buffer.add(concept, speak(concept, speaker, rng, self.channel)[0])
        before = speaker.fingerprint()
        train_discriminator(self.discriminator, buffer, 5, 32, rng)
        self.assertEqual(speaker.fingerprint(), before)
        self.assertTrue(all(tensor.grad is None for tensor in speaker.params.values()))

    def test_buffer_too_small(self):
        buffer = PairBuffer(10)
        buffer.add(all_concepts()[0], perfect_speak(all_concepts()[0]))
        with self.assertRaises(BufferTooSmall):
            train_discriminator(self.discriminator, buffer, 1, 4, np.random.default_rng(0))


class InfluenceRewardTests(SimpleTestCase):

    def setUp(self):
        self.channel = ChannelConfig()
        self.speaker = init_speaker(np.random.default_rng(8), self.channel, d_h=16)
        self.listener = init_listener(np.random.default_rng(9), self.channel.width, d_g=8, d_h=16)
        self.state = generate_episode(np.random.default_rng(10), make_split('none'))
        self.grid = encode_grid(self.state)

    def test_message_blind_listener_scores_zero(self):
        message_layer = self.listener.dense('message')
        message_layer.weight.data[:] = 0.0
        rng = np.random.default_rng(11)
        message, _ = speak(self.state.task, self.speaker, rng, self.channel)
        reward = influence_reward(
            self.grid, message, self.state.task, self.speaker, self.listener, self.channel, 5, 0.05, rng,
        )
        self.assertEqual(reward, 0.0)

    def test_antipodal_conditionals(self):
        epsilon = 1e-6
        first = np.array([1 - epsilon, epsilon])
        second = np.array([epsilon, 1 - epsilon])
        reward = influence_from_distributions(first, np.stack([first, second]), 0.05)
        self.assertAlmostEqual(reward, 0.05 * math.log(2), delta=1e-3 * 0.05)

    def test_non_negative(self):
        rng = np.random.default_rng(12)
        for _ in range(200):
            pseudo = rng.dirichlet(np.ones(7), size=5)
            self.assertGreaterEqual(influence_from_distributions(rng.dirichlet(np.ones(7)), pseudo, 1.0), 0.0)

    def test_monte_carlo_marginal_matches_enumeration(self):
        channel = ChannelConfig(n_m=1, d_m=2)
        speaker = init_speaker(np.random.default_rng(13), channel, d_h=8)
        listener = init_listener(np.random.default_rng(14), channel.width, d_g=8, d_h=16)
        concept = self.state.task
        message = Message((0,), d_m=2)
        p_message = message_distribution(concept, speaker, channel)[0]
        conditionals = [action_distribution(self.grid, Message((m,), d_m=2).bits(), listener) for m in range(2)]
        exact_marginal = p_message[0] * conditionals[0] + p_message[1] * conditionals[1]

        def smooth(distribution):
            distribution = distribution + MARGINAL_EPSILON
            return distribution / distribution.sum()

        exact = kl_divergence(smooth(conditionals[0]), smooth(exact_marginal))
        estimate = influence_reward(
            self.grid, message, concept, speaker, listener, channel, 10_000, 1.0, np.random.default_rng(15),
        )
        self.assertAlmostEqual(estimate, exact, delta=0.01)
