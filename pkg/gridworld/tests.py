import numpy as np
from django.test import SimpleTestCase

from concepts.models import Concept, Color, Shape
from concepts.splits import make_split
from gridworld.differential import (
    exhaustive_small_suite, randomized_suite, task_predicate_holds, small_start_states,
)
from gridworld.dump import dump_trajectory, parse_dump, replay_dump
from gridworld.dynamics import step, SteppedAfterDone
from gridworld.encoding import encode_grid, AGENT_PLANE, PRESENT_PLANE, TARGET_PLANE, D_GRID
from gridworld.generator import generate_episode, validate_state, EmptyTaskClass
from gridworld.models import GridState, ObjectInstance, Action, Force, ACTIONS, target_object_for
from gridworld.reference import reference_step


def make_state(task, target_position, agent, distractors=(), size=4):
    target = target_object_for(task, target_position)
    return GridState(objects=(target,) + tuple(distractors), agent=agent, task=task, size=size)


class GeneratorTests(SimpleTestCase):

    def test_visual_split_never_targets_red_square(self):
        rng = np.random.default_rng(3)
        split = make_split('visual')
        for _ in range(2000):
            state = generate_episode(rng, split, 'train')
            self.assertFalse(state.target.color == Color.RED and state.target.shape == Shape.SQUARE)

    def test_generated_episodes_satisfy_invariants(self):
        rng = np.random.default_rng(11)
        split = make_split('none')
        for _ in range(10_000):
            state = generate_episode(rng, split, 'train')
            self.assertEqual(validate_state(state), [])
            self.assertEqual(len(state.objects), 3)

    def test_task_filter(self):
        rng = np.random.default_rng(5)
        split = make_split('numeral')
        for _ in range(200):
            state = generate_episode(rng, split, 'test', task_filter='pull_heavy')
            self.assertEqual(state.task.task_class, 'pull_heavy')
        with self.assertRaises(EmptyTaskClass):
            generate_episode(rng, split, 'train', task_filter='pull_heavy')
        with self.assertRaises(EmptyTaskClass):
            generate_episode(rng, make_split('none'), 'test')

    def test_generation_is_deterministic(self):
        split = make_split('none')
        first = [generate_episode(np.random.default_rng(9), split) for _ in range(3)]
        second = [generate_episode(np.random.default_rng(9), split) for _ in range(3)]
        self.assertEqual(first, second)


class DynamicsTests(SimpleTestCase):

    def test_walk_success_when_adjacent(self):
        task = Concept('walk', 'blue', 'small', 'light', 'circle')
        state = make_state(task, target_position=(2, 2), agent=(0, 2))
        state, reward, done = step(state, Action.BACKWARD)
        self.assertEqual((reward, done), (1, True))
        self.assertEqual(state.agent, (1, 2))

    def test_pull_heavy_needs_two_units(self):
        task = Concept('pull', 'green', 'big', 'heavy', 'circle')
        state = make_state(task, target_position=(1, 1), agent=(2, 1))

        state, reward, done = step(state, Action.PULL)
        self.assertEqual((reward, done), (0, False))
        self.assertEqual(state.target.position, (1, 1))
        self.assertEqual(state.target.force_loaded, Force.PULL)

        state, reward, done = step(state, Action.PULL)
        self.assertEqual((reward, done), (1, True))
        self.assertEqual(state.target.position, (2, 1))
        self.assertEqual(state.agent, (3, 1))
        self.assertEqual(state.target.force_loaded, Force.NONE)

    def test_force_resets_on_other_action(self):
        task = Concept('push', 'green', 'big', 'heavy', 'circle')
        state = make_state(task, target_position=(1, 1), agent=(2, 1))
        state, _, _ = step(state, Action.PUSH)
        state, _, _ = step(state, Action.NOOP)
        self.assertEqual(state.target.force_loaded, Force.NONE)
        state, reward, _ = step(state, Action.PUSH)
        self.assertEqual(reward, 0)
        self.assertEqual(state.target.position, (1, 1))

    def test_push_light_moves_object_and_agent(self):
        task = Concept('push', 'red', 'small', 'light', 'square')
        state = make_state(task, target_position=(1, 1), agent=(1, 0))
        state, reward, done = step(state, Action.PUSH)
        self.assertEqual(state.target.position, (1, 2))
        self.assertEqual(state.agent, (1, 1))
        self.assertEqual((reward, done), (1, True))

    def test_push_on_distractor_is_not_rewarded(self):
        task = Concept('push', 'red', 'small', 'light', 'square')
        distractor = ObjectInstance(color='red', size='big', weight='light', shape='circle', position=(0, 1))
        state = make_state(task, target_position=(3, 3), agent=(1, 1), distractors=(distractor,))
        state, reward, done = step(state, Action.PUSH)
        self.assertEqual((reward, done), (0, False))
        self.assertEqual(state.objects[1].position, (0, 1))
        self.assertEqual(state.agent, (1, 1))

        task_state = make_state(task, target_position=(3, 3), agent=(2, 1), distractors=(ObjectInstance(
            color='red', size='big', weight='light', shape='circle', position=(1, 1)),))
        moved, reward, _ = step(task_state, Action.PUSH)
        self.assertEqual(reward, 0)
        self.assertEqual(moved.objects[1].position, (0, 1))

    def test_boundary_move_is_noop(self):
        task = Concept('walk', 'red', 'small', 'light', 'square')
        state = make_state(task, target_position=(3, 3), agent=(0, 0))
        for next_state in (step(state, Action.LEFT)[0], reference_step(state, Action.LEFT)[0]):
            self.assertEqual(next_state.agent, (0, 0))
            self.assertEqual(next_state.objects, state.objects)

    def test_objects_are_impassable(self):
        task = Concept('pull', 'red', 'small', 'light', 'square')
        state = make_state(task, target_position=(0, 1), agent=(0, 0))
        state, _, _ = step(state, Action.RIGHT)
        self.assertEqual(state.agent, (0, 0))

    def test_episode_cap(self):
        task = Concept('pull', 'red', 'small', 'light', 'square')
        state = make_state(task, target_position=(3, 3), agent=(0, 0))
        for _ in range(state.t_max - 1):
            state, reward, done = step(state, Action.NOOP)
            self.assertFalse(done)
        state, reward, done = step(state, Action.NOOP)
        self.assertEqual((reward, done), (0, True))
        with self.assertRaises(SteppedAfterDone):
            step(state, Action.NOOP)

    def test_adjacency_priority(self):
        task = Concept('push', 'red', 'small', 'light', 'square')
        below = ObjectInstance(color='red', size='big', weight='light', shape='circle', position=(2, 1))
        state = make_state(task, target_position=(1, 2), agent=(1, 1), distractors=(below,))
        state, reward, _ = step(state, Action.PUSH)
        # 下方優先於右方
        self.assertEqual(reward, 0)
        self.assertEqual(state.objects[1].position, (3, 1))


class PropertyTests(SimpleTestCase):

    def test_conservation_reward_soundness_and_heavy_accounting(self):
        rng = np.random.default_rng(21)
        split = make_split('none')
        for _ in range(300):
            state = generate_episode(rng, split)
            while not state.done:
                action = ACTIONS[int(rng.integers(len(ACTIONS)))]
                successor, reward, _ = step(state, action)
                self.assertEqual(len(successor.objects), 3)
                self.assertEqual(validate_state(successor), [])
                if reward:
                    self.assertTrue(task_predicate_holds(state, action, successor))
                for before, after in zip(state.objects, successor.objects):
                    if before.weight == 'heavy' and before.position != after.position:
                        self.assertEqual(before.force_loaded, str(action))
                self.assertEqual(step(state, action), (successor, reward, successor.done))
                state = successor

    def test_exhaustive_small_instance_agreement(self):
        self.assertEqual(len(small_start_states()), 9 * 8 * 2 * 3)
        report = exhaustive_small_suite()
        self.assertTrue(report.ok, report.mismatches[:3])
        self.assertGreater(report.transitions, 100_000)

    def test_randomized_agreement(self):
        report = randomized_suite(transitions=100_000, seed=1)
        self.assertTrue(report.ok, report.mismatches[:3])


class EncodingTests(SimpleTestCase):

    def test_empty_grid_with_agent(self):
        task = Concept('walk', 'red', 'small', 'light', 'square')
        state = GridState(objects=(), agent=(0, 0), task=task)
        grid = encode_grid(state)
        self.assertEqual(grid.shape, (D_GRID, 4, 4))
        self.assertEqual(grid.sum(), 1.0)
        self.assertEqual(grid[AGENT_PLANE, 0, 0], 1.0)

    def test_oracle_target_plane(self):
        rng = np.random.default_rng(2)
        split = make_split('none')
        for _ in range(200):
            state = generate_episode(rng, split)
            grid = encode_grid(state, oracle=True)
            self.assertEqual(grid.shape, (D_GRID + 1, 4, 4))
            self.assertEqual(grid[TARGET_PLANE].sum(), 1.0)
            row, col = state.target.position
            self.assertEqual(grid[TARGET_PLANE, row, col], 1.0)
            self.assertEqual(grid[PRESENT_PLANE].sum(), 3.0)
            self.assertEqual(grid[AGENT_PLANE].sum(), 1.0)
            occupied = grid[PRESENT_PLANE] == 1
            # 每個屬性區塊恰好一個位元
            for start, stop in ((1, 5), (5, 9), (9, 11), (11, 13)):
                np.testing.assert_array_equal(grid[start:stop].sum(axis=0)[occupied], 1.0)
                np.testing.assert_array_equal(grid[start:stop].sum(axis=0)[~occupied], 0.0)


class DumpTests(SimpleTestCase):

    def test_dump_parse_and_replay(self):
        rng = np.random.default_rng(4)
        state = generate_episode(rng, make_split('none'))
        states, actions, rewards = [state], [], []
        while not state.done:
            action = ACTIONS[int(rng.integers(len(ACTIONS)))]
            state, reward, _ = step(state, action)
            states.append(state)
            actions.append(action)
            rewards.append(reward)
        text = dump_trajectory(states, actions, rewards)
        task, size, t_max, rows = parse_dump(text)
        self.assertEqual(task, states[0].task)
        self.assertEqual(len(rows), len(states))
        self.assertEqual(rows[0].objects, states[0].objects)
        self.assertTrue(replay_dump(text).ok)

    def test_replay_reports_divergence(self):
        task = Concept('walk', 'red', 'small', 'light', 'square')
        start = make_state(task, target_position=(3, 3), agent=(0, 0))
        after, reward, _ = step(start, Action.RIGHT)
        text = dump_trajectory([start, after], [Action.RIGHT], [reward])
        tampered = text.replace(';0,1;right;', ';0,2;right;')
        result = replay_dump(tampered)
        self.assertFalse(result.ok)
        self.assertEqual(result.divergent_step, 1)
