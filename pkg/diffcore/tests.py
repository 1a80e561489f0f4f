import math

import numpy as np
from django.test import SimpleTestCase

from diffcore.checkpoint import (
    serialize_checkpoint, deserialize_checkpoint, save_checkpoint, load_checkpoint,
    CorruptCheckpoint, MissingArtifact,
)
from diffcore.functional import (
    DenseLayer, forward_dense, softmax, cross_entropy, kl_divergence, categorical_straight_through,
    NonFiniteLogits, NonNormalizedDistribution,
)
from diffcore.gradcheck import check_gradients, random_graph_suite, straight_through_dual_check
from diffcore.store import ParamStore, optimize_step
from diffcore.tensor import Tensor, ShapeMismatch, NonFiniteValue, no_grad, set_debug


class DenseTests(SimpleTestCase):

    def test_identity_linear_layer(self):
        x = np.array([[0.5, -1.0, 2.0]])
        layer = DenseLayer(Tensor(np.eye(3)), Tensor(np.zeros(3)))
        np.testing.assert_array_equal(forward_dense(x, layer, 'linear').data, x)

    def test_zero_weights_return_activation_of_bias(self):
        bias = np.array([0.3, -2.0])
        layer = DenseLayer(Tensor(np.zeros((4, 2))), Tensor(bias))
        out = forward_dense(np.random.default_rng(0).normal(size=4), layer)
        np.testing.assert_allclose(out.data, np.tanh(bias))
        out = forward_dense(np.ones(4), layer, 'relu')
        np.testing.assert_allclose(out.data, [0.3, 0.0])

    def test_shape_mismatch(self):
        layer = DenseLayer(Tensor(np.zeros((4, 2))), Tensor(np.zeros(2)))
        with self.assertRaises(ShapeMismatch):
            forward_dense(np.ones(3), layer)

    def test_input_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(1)
        x = Tensor(rng.normal(size=(2, 5)), requires_grad=True)
        layer = DenseLayer(Tensor(rng.normal(size=(5, 3)), requires_grad=True),
                           Tensor(rng.normal(size=3), requires_grad=True))
        report = check_gradients(lambda: forward_dense(x, layer).sum(), [x, *layer])
        self.assertTrue(report.ok, report.max_relative_error)

    def test_relu_gradient_away_from_kink(self):
        x = Tensor(np.array([-1.5, -0.2, 0.3, 2.0]), requires_grad=True)
        report = check_gradients(lambda: (x.relu() * x.relu()).sum(), [x])
        self.assertTrue(report.ok)
        np.testing.assert_allclose(x.grad, [0.0, 0.0, 0.6, 4.0])


class GradientSuiteTests(SimpleTestCase):

    def test_random_graphs(self):
        report = random_graph_suite(graphs=100, seed=3)
        self.assertEqual(report.graphs, 100)
        self.assertTrue(report.ok, [failure.name for failure in report.failures])

    def test_straight_through_matches_soft_path(self):
        self.assertLess(straight_through_dual_check(trials=200, seed=5), 1e-6)

    def test_shared_node_accumulates(self):
        x = Tensor(np.array([3.0]), requires_grad=True)
        (x * x + x).sum().backward()
        np.testing.assert_allclose(x.grad, [7.0])

    def test_no_grad_builds_no_graph(self):
        x = Tensor(np.ones(2), requires_grad=True)
        with no_grad():
            y = (x * 2.0).sum()
        self.assertFalse(y.requires_grad)

    def test_debug_mode_rejects_non_finite(self):
        set_debug(True)
        try:
            with self.assertRaises(NonFiniteValue):
                Tensor(np.array([0.0])).log()
        finally:
            set_debug(False)


class CategoricalTests(SimpleTestCase):

    def test_confident_logits_sample_first_symbol(self):
        rng = np.random.default_rng(0)
        logits = Tensor(np.array([10.0, -10.0, -10.0, -10.0]))
        hits = sum(
            categorical_straight_through(logits, rng, 'sample').data[0] == 1.0 for _ in range(10_000)
        )
        self.assertGreater(hits / 10_000, 0.999)

    def test_argmax_tie_breaks_to_first_index(self):
        one_hot = categorical_straight_through(Tensor(np.zeros(4)), mode='argmax')
        np.testing.assert_array_equal(one_hot.data, [1.0, 0.0, 0.0, 0.0])

    def test_forward_is_exact_one_hot_in_batch(self):
        rng = np.random.default_rng(2)
        one_hot = categorical_straight_through(Tensor(rng.normal(size=(5, 4))), rng, 'sample')
        np.testing.assert_array_equal(one_hot.data.sum(axis=-1), np.ones(5))
        self.assertTrue(np.isin(one_hot.data, (0.0, 1.0)).all())

    def test_non_finite_logits(self):
        with self.assertRaises(NonFiniteLogits):
            categorical_straight_through(Tensor(np.array([0.0, np.nan])), mode='argmax')

    def test_given_index_is_reused(self):
        one_hot = categorical_straight_through(Tensor(np.zeros(3)), index=2)
        np.testing.assert_array_equal(one_hot.data, [0.0, 0.0, 1.0])


class LossTests(SimpleTestCase):

    def test_softmax_sums_to_one(self):
        rng = np.random.default_rng(4)
        probs = softmax(Tensor(rng.normal(scale=5.0, size=(50, 7)))).data
        np.testing.assert_allclose(probs.sum(axis=-1), 1.0, atol=1e-9)

    def test_cross_entropy_uniform(self):
        for label in range(4):
            self.assertAlmostEqual(float(cross_entropy(Tensor(np.zeros(4)), label).data), math.log(4), places=12)

    def test_kl_values(self):
        p = np.array([0.2, 0.5, 0.3])
        self.assertEqual(kl_divergence(p, p), 0.0)
        self.assertAlmostEqual(kl_divergence([1.0, 0.0], [0.5, 0.5]), math.log(2), places=12)

    def test_kl_non_negative_on_random_pairs(self):
        rng = np.random.default_rng(6)
        for _ in range(500):
            p, q = rng.dirichlet(np.ones(5)), rng.dirichlet(np.ones(5))
            self.assertGreaterEqual(kl_divergence(p, q), 0.0)

    def test_kl_errors(self):
        with self.assertRaises(NonNormalizedDistribution):
            kl_divergence([0.5, 0.6], [0.5, 0.5])
        with self.assertRaises(ShapeMismatch):
            kl_divergence([1.0], [0.5, 0.5])


class StoreTests(SimpleTestCase):

    def make_store(self, seed=0):
        store = ParamStore('speaker')
        rng = np.random.default_rng(seed)
        store.add_dense('encoder', 15, 8, rng)
        store.add_dense('head', 8, 20, rng)
        return store

    def test_adam_first_step_moves_by_learning_rate(self):
        store = ParamStore('toy')
        weight = store.add('w', np.array([1.0, -1.0]))
        weight.grad = np.array([0.5, -3.0])
        optimize_step(store, lr=1e-3)
        np.testing.assert_allclose(weight.data, [1.0 - 1e-3, -1.0 + 1e-3], rtol=1e-6)
        self.assertEqual(store.step, 1)

    def test_zero_gradient_leaves_parameters(self):
        store = self.make_store()
        before = store.snapshot()
        optimize_step(store, grads={key: np.zeros_like(value) for key, value in before.items()})
        for key, value in before.items():
            self.assertLess(np.max(np.abs(store[key].data - value)), 1e-12)

    def test_missing_gradient_is_skipped(self):
        store = self.make_store()
        before = store.snapshot()
        optimize_step(store)
        self.assertEqual(store.fingerprint(), self.make_store().fingerprint())
        np.testing.assert_array_equal(store['head.weight'].data, before['head.weight'])

    def test_checkpoint_round_trip_is_bit_exact(self):
        store = self.make_store()
        for tensor in store.params.values():
            tensor.grad = np.random.default_rng(1).normal(size=tensor.shape)
        optimize_step(store)
        payload = serialize_checkpoint("seed = 3\n", {'speaker': store})
        restored = deserialize_checkpoint(payload)
        self.assertEqual(restored.config_text, "seed = 3\n")
        copy = restored.stores['speaker']
        self.assertEqual(copy.step, store.step)
        self.assertEqual(copy.keys(), store.keys())
        for key in store.keys():
            self.assertEqual(copy[key].data.tobytes(), store[key].data.tobytes())
            self.assertEqual(copy.first_moment[key].tobytes(), store.first_moment[key].tobytes())
            self.assertEqual(copy.second_moment[key].tobytes(), store.second_moment[key].tobytes())
        self.assertEqual(serialize_checkpoint("seed = 3\n", restored.stores), payload)

    def test_corrupt_and_missing_checkpoints(self):
        payload = serialize_checkpoint("seed = 3\n", {'speaker': self.make_store()})
        with self.assertRaises(CorruptCheckpoint):
            deserialize_checkpoint(b'NOTACKPT' + payload[8:])
        with self.assertRaises(CorruptCheckpoint):
            deserialize_checkpoint(payload[:-5])
        tampered = bytearray(payload)
        tampered[8] = 9
        with self.assertRaises(CorruptCheckpoint):
            deserialize_checkpoint(bytes(tampered))
        tampered = bytearray(payload)
        tampered[10] ^= 0xFF
        with self.assertRaises(CorruptCheckpoint):
            deserialize_checkpoint(bytes(tampered))
        with self.assertRaises(MissingArtifact):
            load_checkpoint('/nonexistent/run/checkpoint.bin')

    def test_save_and_load_file(self):
        import tempfile
        from pathlib import Path
        with tempfile.TemporaryDirectory() as tmp:
            path = save_checkpoint(Path(tmp) / 'checkpoint.bin', "k = 5\n", {'speaker': self.make_store()})
            checkpoint = load_checkpoint(path)
        self.assertEqual(checkpoint.stores['speaker'].fingerprint(), self.make_store().fingerprint())
