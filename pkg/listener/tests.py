import numpy as np
from django.test import SimpleTestCase
from scipy.stats import chisquare

from concepts.models import Concept
from concepts.splits import make_split
from diffcore.gradcheck import check_gradients
from gridworld.encoding import encode_grid, AGENT_PLANE, TARGET_PLANE
from gridworld.generator import generate_episode
from gridworld.models import ACTIONS, Action, GridState, target_object_for
from listener.models import Arm, ARMS, ARM_ACTIONS
from listener.network import init_listener, encode_grid_features, attend, cell_inputs
from listener.policy import act, action_distribution, master_log_probs, action_log_probs
from speaker.language import perfect_speak

D_G = 8


class GridEncoderTests(SimpleTestCase):

    def setUp(self):
        self.store = init_listener(np.random.default_rng(0), 20, d_g=D_G, d_h=16)

    def test_output_shape(self):
        state = generate_episode(np.random.default_rng(1), make_split('none'))
        features = encode_grid_features(encode_grid(state), self.store)
        self.assertEqual(features.shape, (16, D_G))

    def test_same_contents_different_coordinates(self):
        task = Concept('walk', 'red', 'small', 'light', 'square')
        state = GridState(objects=(), agent=(3, 3), task=task)
        features = encode_grid_features(encode_grid(state), self.store).data
        # 兩個空格子內容相同，只差座標
        self.assertFalse(np.allclose(features[0], features[5]))

    def test_coordinates_are_relative_to_agent(self):
        grid = np.zeros((14, 4, 4))
        grid[AGENT_PLANE, 2, 1] = 1.0
        cells = cell_inputs(grid)
        self.assertEqual(cells.shape, (16, 16))
        np.testing.assert_array_equal(cells[2 * 4 + 1, -2:], [0.0, 0.0])
        np.testing.assert_allclose(cells[-1, -2:], [1.0 / 3.0, 2.0 / 3.0])
        np.testing.assert_allclose(cells[0, -2:], [-2.0 / 3.0, -1.0 / 3.0])

    def test_translated_scene_keeps_target_offset(self):
        task = Concept('walk', 'red', 'small', 'light', 'square')
        target = target_object_for(task, (1, 1))
        near = GridState(objects=(target,), agent=(0, 0), task=task)
        shifted = GridState(objects=(target_object_for(task, (3, 3)),), agent=(2, 2), task=task)
        near_cells = cell_inputs(encode_grid(near))
        shifted_cells = cell_inputs(encode_grid(shifted))
        np.testing.assert_array_equal(near_cells[1 * 4 + 1], shifted_cells[3 * 4 + 3])

    def test_batched_grids_use_their_own_agent(self):
        grids = np.zeros((2, 14, 4, 4))
        grids[0, AGENT_PLANE, 0, 0] = 1.0
        grids[1, AGENT_PLANE, 3, 3] = 1.0
        cells = cell_inputs(grids)
        np.testing.assert_array_equal(cells[0, 0, -2:], [0.0, 0.0])
        np.testing.assert_array_equal(cells[1, 0, -2:], [-1.0, -1.0])

    def test_gradient_matches_finite_differences(self):
        grid = np.random.default_rng(2).random((14, 4, 4))
        layer = self.store.dense('cell')
        report = check_gradients(
            lambda: encode_grid_features(grid, self.store).sum(), [layer.weight, layer.bias],
        )
        self.assertTrue(report.ok, report.max_relative_error)


class AttentionTests(SimpleTestCase):

    def test_zero_query_is_uniform(self):
        cells = np.random.default_rng(3).normal(size=(16, D_G))
        output = attend(np.zeros(D_G), cells)
        np.testing.assert_allclose(output.weights, np.full(16, 1 / 16))
        np.testing.assert_allclose(output.attended, cells.mean(axis=0))

    def test_dominant_cell(self):
        cells = np.zeros((16, D_G))
        cells[7, 0] = 1.0
        z = np.zeros(D_G)
        z[0] = 20.0 * np.sqrt(D_G)
        self.assertGreater(attend(z, cells).weights[7], 0.999)

    def test_weights_form_probability_vector(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            cells = rng.normal(size=(16, D_G))
            output = attend(rng.normal(scale=3.0, size=D_G), cells)
            self.assertTrue(np.all(output.weights >= 0))
            self.assertAlmostEqual(output.weights.sum(), 1.0, places=9)
            np.testing.assert_allclose(output.attended, output.weights @ cells)

    def test_oracle_target_plane_draws_attention(self):
        store = init_listener(np.random.default_rng(5), 20, oracle=True, d_g=D_G, d_h=16)
        cell = store.dense('cell')
        cell.weight.data[:] = 0.0
        cell.bias.data[:] = 0.0
        cell.weight.data[TARGET_PLANE, 0] = 5.0
        z = np.zeros(D_G)
        z[0] = 200.0
        state = generate_episode(np.random.default_rng(6), make_split('none'))
        output = attend(z, encode_grid_features(encode_grid(state, oracle=True), store).data)
        row, col = state.target.position
        self.assertGreater(output.weights[row * 4 + col], 0.99)


class PolicyTests(SimpleTestCase):

    def setUp(self):
        self.store = init_listener(np.random.default_rng(7), 20, d_g=D_G, d_h=16)
        self.state = generate_episode(np.random.default_rng(8), make_split('none'))
        self.grid = encode_grid(self.state)
        self.bits = perfect_speak(self.state.task).bits()

    def test_null_arm_never_interacts(self):
        rng = np.random.default_rng(9)
        for _ in range(500):
            _, action = act(self.grid, self.bits, self.store, rng, 'train', arm=Arm.NULL)
            self.assertNotIn(action, (Action.PUSH, Action.PULL))
        self.assertEqual(ARM_ACTIONS[Arm.NULL][-1], Action.NOOP)

    def test_eval_is_deterministic(self):
        first = act(self.grid, self.bits, self.store, np.random.default_rng(1), 'eval')
        second = act(self.grid, self.bits, self.store, np.random.default_rng(2), 'eval')
        self.assertEqual(first[1], second[1])
        self.assertEqual(first[0].arm, second[0].arm)

    def test_distributions_are_normalized(self):
        output, _ = act(self.grid, self.bits, self.store, np.random.default_rng(3), 'train')
        self.assertAlmostEqual(output.master.sum(), 1.0, places=9)
        self.assertAlmostEqual(output.action.sum(), 1.0, places=9)
        self.assertAlmostEqual(action_distribution(self.grid, self.bits, self.store).sum(), 1.0, places=9)

    def test_null_master_excludes_push_and_pull(self):
        master = self.store.dense('master.out')
        master.weight.data[:] = 0.0
        master.bias.data[:] = [-1e3, -1e3, 0.0]
        marginal = action_distribution(self.grid, self.bits, self.store)
        self.assertEqual(marginal[ACTIONS.index(Action.PUSH)], 0.0)
        self.assertEqual(marginal[ACTIONS.index(Action.PULL)], 0.0)

    def test_marginal_matches_sampler(self):
        rng = np.random.default_rng(10)
        counts = np.zeros(len(ACTIONS))
        for _ in range(10_000):
            _, action = act(self.grid, self.bits, self.store, rng, 'train')
            counts[ACTIONS.index(action)] += 1
        expected = action_distribution(self.grid, self.bits, self.store) * 10_000
        self.assertEqual(expected[ACTIONS.index(Action.NOOP)] > 0, True)
        self.assertGreater(chisquare(counts, expected).pvalue, 0.01)

    def test_batched_log_probs_agree_with_act(self):
        rng = np.random.default_rng(11)
        output, _ = act(self.grid, self.bits, self.store, rng, 'train')
        master = master_log_probs(self.store, self.grid[None], self.bits[None], [output.arm_index])
        action = action_log_probs(
            self.store, self.grid[None], self.bits[None], [output.arm_index], [output.local_action],
        )
        self.assertAlmostEqual(float(master.data[0]), output.master_log_prob, places=10)
        self.assertAlmostEqual(float(action.data[0]), output.action_log_prob, places=10)
        self.assertEqual(len(ARMS), 3)
