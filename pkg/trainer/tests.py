import io
import itertools
import math
import tempfile
from pathlib import Path
from unittest import mock

import numpy as np
import pandas as pd
from django.conf import settings
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase, override_settings
from scipy.stats import chisquare

from concepts.encoding import slot_indices
from concepts.models import Concept, TASK_CLASSES, all_concepts
from concepts.splits import SplitMode, make_split
from diffcore.checkpoint import deserialize_checkpoint, serialize_checkpoint
from diffcore.functional import pick_log_prob, softmax_numpy
from diffcore.store import ParamStore, optimize_step
from gridworld.dump import dump_trajectory
from gridworld.dynamics import step
from gridworld.encoding import grid_depth
from gridworld.generator import generate_episode
from gridworld.models import Action, GridState, target_object_for
from listener.models import ARMS, ARM_ACTIONS
from speaker.language import perfect_language_table, perfect_speak
from speaker.models import Message
from trainer.agents import agents_from_checkpoint, build_agents
from trainer.config import ConfigInvalid, RunConfig, format_config, load_config, load_config_text
from trainer.curriculum import CurriculumState, sample_task, sampling_distribution, update_curriculum
from trainer.episode import discounted_returns, run_episode
from trainer.evaluation import (
    EmptyTestSet, TaskAccuracy, evaluate_heldout, evaluate_zero_shot, format_report, parse_report,
    random_policy_baseline, task_classes_for,
)
from trainer.experiments import plan_runs, run_rows, seed_quorum, summary_frame, walk_checks, zero_shot_checks
from trainer.loop import train
from trainer.models import EvaluationReport, RunStatusChoices, TrainingRun
from trainer.reinforce import ReturnBaselines, policy_gradient_loss, reinforce_update
from trainer.topsim import topsim

TINY = {
    'd_h': 8, 'd_g': 8, 'k': 2, 't_max': 6, 'batch_size': 4,
    'episodes': 16, 'eval_every': 8, 'heldout_episodes': 1,
    'disc_every': 8, 'disc_batches': 1, 'disc_batch_size': 4,
    'checkpoint_every': 8,
}


def tiny_config(**overrides) -> RunConfig:
    return RunConfig(**{**TINY, **overrides})


def average_ranks(values) -> np.ndarray:
    order = sorted(range(len(values)), key=lambda index: values[index])
    ranks = [0.0] * len(values)
    position = 0
    while position < len(order):
        end = position
        while end + 1 < len(order) and values[order[end + 1]] == values[order[position]]:
            end += 1
        for index in order[position:end + 1]:
            ranks[index] = (position + end) / 2.0 + 1.0
        position = end + 1
    return np.array(ranks)


def brute_force_topsim(table: dict) -> float:
    items = list(table.items())
    concept_distances, message_distances = [], []
    for (a, ma), (b, mb) in itertools.combinations(items, 2):
        concept_distances.append(sum(x != y for x, y in zip(slot_indices(a), slot_indices(b))))
        message_distances.append(sum(x != y for x, y in zip(ma.symbols, mb.symbols)))
    x = average_ranks(concept_distances)
    y = average_ranks(message_distances)
    x, y = x - x.mean(), y - y.mean()
    return float(np.sum(x * y) / math.sqrt(np.sum(x * x) * np.sum(y * y)))


def random_table(rng, d_m: int = 4) -> dict:
    return {
        concept: Message(tuple(int(s) for s in rng.integers(d_m, size=5)), d_m=d_m)
        for concept in all_concepts()
    }


class DiscountedReturnTests(SimpleTestCase):

    def test_known_values(self):
        np.testing.assert_allclose(discounted_returns([0, 0, 1], 0.5), [0.25, 0.5, 1.0])
        np.testing.assert_allclose(discounted_returns([1, 1], 1.0), [2.0, 1.0])
        self.assertEqual(discounted_returns([], 0.9).shape, (0,))

    def test_recomputed_from_rewards(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            rewards = rng.normal(size=int(rng.integers(1, 30)))
            gamma = float(rng.uniform(0.1, 1.0))
            returns = discounted_returns(rewards, gamma)
            for t in range(len(rewards)):
                expected = sum(gamma ** (u - t) * rewards[u] for u in range(t, len(rewards)))
                self.assertAlmostEqual(returns[t], expected, delta=1e-9)


class ReinforceToyTests(SimpleTestCase):

    def test_bandit_converges_to_rewarded_action(self):
        rng = np.random.default_rng(0)
        store = ParamStore('bandit')
        store.add('logits', np.zeros(2))
        baselines = ReturnBaselines(beta=0.9)
        batch = 4
        for _ in range(2000):
            probs = softmax_numpy(store['logits'].data)
            actions = rng.choice(2, size=batch, p=probs)
            rewards = (actions == 0).astype(np.float64)
            advantages = rewards - baselines.value('bandit')
            store.zero_grad()
            logits = store['logits'][np.zeros(batch, dtype=np.int64)]
            policy_gradient_loss(pick_log_prob(logits, actions), advantages).backward()
            optimize_step(store, lr=0.01)
            baselines.update('bandit', float(rewards.mean()))
            if softmax_numpy(store['logits'].data)[0] > 0.95:
                break
        self.assertGreater(softmax_numpy(store['logits'].data)[0], 0.95)

    def test_two_step_mdp_gradient_matches_analytic(self):
        """列舉所有軌跡，以機率加權的 REINFORCE loss 梯度應等於期望 return 的梯度"""
        gamma = 1.0
        rng = np.random.default_rng(3)
        theta = [rng.normal(size=2), rng.normal(size=2)]

        def rewards_for(a0, a1):
            return [1.0 if a0 == 0 else 0.0, 2.0 if a1 != a0 else 0.0]

        def expected_return(t0, t1):
            p0, p1 = softmax_numpy(t0), softmax_numpy(t1)
            return sum(p0[a0] * p1[a1] * discounted_returns(rewards_for(a0, a1), gamma)[0]
                       for a0 in range(2) for a1 in range(2))

        store = ParamStore('mdp')
        store.add('step0', theta[0])
        store.add('step1', theta[1])
        p0, p1 = softmax_numpy(theta[0]), softmax_numpy(theta[1])
        trajectories = list(itertools.product(range(2), range(2)))
        weights = np.array([p0[a0] * p1[a1] for a0, a1 in trajectories])
        returns = np.array([discounted_returns(rewards_for(a0, a1), gamma) for a0, a1 in trajectories])

        index = np.zeros(len(trajectories), dtype=np.int64)
        first = pick_log_prob(store['step0'][index], [a0 for a0, _ in trajectories])
        second = pick_log_prob(store['step1'][index], [a1 for _, a1 in trajectories])
        loss = (policy_gradient_loss(first, weights * returns[:, 0], normalizer=1)
                + policy_gradient_loss(second, weights * returns[:, 1], normalizer=1))
        loss.backward()

        eps = 1e-6
        for key, position in (('step0', 0), ('step1', 1)):
            numeric = np.zeros(2)
            for i in range(2):
                plus = [t.copy() for t in theta]
                minus = [t.copy() for t in theta]
                plus[position][i] += eps
                minus[position][i] -= eps
                numeric[i] = (expected_return(*plus) - expected_return(*minus)) / (2 * eps)
            np.testing.assert_allclose(-store[key].grad, numeric, atol=1e-7)


class ReinforceUpdateTests(SimpleTestCase):

    def rollout(self, config, seed=0, episodes=3):
        rng = np.random.default_rng(seed)
        agents = build_agents(config, rng)
        split = make_split(config.split)
        batch = [
            run_episode(generate_episode(rng, split, t_max=config.t_max), agents, rng, config=config)
            for _ in range(episodes)
        ]
        return agents, batch

    def test_zero_advantage_leaves_parameters_unchanged(self):
        config = tiny_config(use_coverage=False, use_influence=False, env_reward=False)
        agents, batch = self.rollout(config)
        before = {name: store.snapshot() for name, store in agents.stores().items()}
        reinforce_update(batch, agents, ReturnBaselines(), config.gamma, {'speaker': 1e-3, 'listener': 1e-3})
        for name, store in agents.stores().items():
            for key, value in store.snapshot().items():
                self.assertLess(np.max(np.abs(value - before[name][key])), 1e-12, f'{name}.{key}')

    def test_nonzero_advantage_moves_speaker_and_listener(self):
        config = tiny_config(use_coverage=False, use_influence=False, env_reward=False)
        agents, batch = self.rollout(config, seed=1)
        baselines = ReturnBaselines(values={task: -1.0 for task in TASK_CLASSES})
        speaker_before = agents.speaker.fingerprint()
        listener_before = agents.listener.fingerprint()
        diagnostics = reinforce_update(batch, agents, baselines, config.gamma,
                                       {'speaker': 1e-3, 'listener': 1e-3})
        self.assertNotEqual(agents.speaker.fingerprint(), speaker_before)
        self.assertNotEqual(agents.listener.fingerprint(), listener_before)
        self.assertEqual(diagnostics['steps'], sum(trajectory.length for trajectory in batch))

    def test_empty_batch_rejected(self):
        config = tiny_config()
        agents = build_agents(config, np.random.default_rng(0))
        with self.assertRaises(ValueError):
            reinforce_update([], agents, ReturnBaselines(), 0.95, {})

    def test_baseline_is_ema_of_first_return(self):
        baselines = ReturnBaselines(beta=0.5)
        self.assertEqual(baselines.value('walk_light'), 0.0)
        baselines.update('walk_light', 1.0)
        baselines.update('walk_light', 0.0)
        self.assertAlmostEqual(baselines.value('walk_light'), 0.5)


class EpisodeTests(SimpleTestCase):

    def test_simple_speaker_rewards_are_environment_stream(self):
        config = tiny_config(use_coverage=False, use_influence=False, t_max=30)
        rng = np.random.default_rng(2)
        agents = build_agents(config, rng)
        for _ in range(5):
            trajectory = run_episode(generate_episode(rng, make_split('none')), agents, rng, config=config)
            np.testing.assert_array_equal(trajectory.rewards, np.asarray(trajectory.env_rewards, dtype=float))
            self.assertLessEqual(trajectory.length, 30)
            self.assertEqual(len(trajectory.env_rewards), trajectory.length)

    def test_perfect_speaker_messages(self):
        config = tiny_config(speaker='perfect')
        rng = np.random.default_rng(5)
        agents = build_agents(config, rng)
        self.assertIsNone(agents.speaker)
        trajectory = run_episode(generate_episode(rng, make_split('none')), agents, rng, config=config)
        self.assertEqual(trajectory.message, perfect_speak(trajectory.concept))
        self.assertEqual(trajectory.coverage_reward, 0.0)

    def test_oracle_listener_sees_target_plane_and_silence(self):
        config = tiny_config(speaker='none', oracle_listener=True)
        rng = np.random.default_rng(6)
        agents = build_agents(config, rng)
        trajectory = run_episode(generate_episode(rng, make_split('none')), agents, rng, config=config)
        self.assertIsNone(trajectory.message)
        self.assertFalse(trajectory.listener_bits.any())
        self.assertEqual(trajectory.start_grid.shape[0], grid_depth(True))

    def test_master_arm_fixed_within_episode(self):
        config = tiny_config(use_coverage=False, use_influence=False, t_max=30)
        rng = np.random.default_rng(9)
        agents = build_agents(config, rng)
        for _ in range(30):
            trajectory = run_episode(generate_episode(rng, make_split('none')), agents, rng, config=config)
            self.assertEqual(set(trajectory.arm_indices), {trajectory.arm_index})
            arm = ARMS[trajectory.arm_index]
            for action, local_action in zip(trajectory.actions, trajectory.local_actions):
                self.assertIn(action, ARM_ACTIONS[arm])
                self.assertEqual(action, ARM_ACTIONS[arm][local_action])

    def test_intrinsic_rewards_attached(self):
        config = tiny_config()
        rng = np.random.default_rng(7)
        agents = build_agents(config, rng)
        trajectory = run_episode(generate_episode(rng, make_split('none'), t_max=6), agents, rng, config=config)
        self.assertEqual(len(trajectory.influence_rewards), trajectory.length)
        self.assertTrue(all(value >= 0 for value in trajectory.influence_rewards))
        self.assertAlmostEqual(
            trajectory.rewards[-1],
            trajectory.env_rewards[-1] + trajectory.influence_rewards[-1] + trajectory.coverage_reward,
        )

    def test_intrinsic_only_zeroes_environment_reward(self):
        config = tiny_config(env_reward=False, use_coverage=False, use_influence=False)
        rng = np.random.default_rng(8)
        agents = build_agents(config, rng)
        for _ in range(5):
            trajectory = run_episode(generate_episode(rng, make_split('none'), t_max=6), agents, rng, config=config)
            self.assertFalse(trajectory.rewards.any())


class CurriculumTests(SimpleTestCase):

    def test_equal_progress_is_uniform(self):
        np.testing.assert_allclose(sampling_distribution([0.2] * 4, 0.0), [0.25] * 4)

    def test_direct_normalization(self):
        np.testing.assert_allclose(sampling_distribution([0.3, 0.1, 0.0, 0.0], 0.0), [0.75, 0.25, 0.0, 0.0])

    def test_all_zero_falls_back_to_uniform(self):
        np.testing.assert_allclose(sampling_distribution([0.0] * 4, 0.0), [0.25] * 4)
        np.testing.assert_allclose(CurriculumState.initial(TASK_CLASSES).probabilities, [1 / 6] * 6)

    def test_update_tracks_ema_and_progress(self):
        state = CurriculumState.initial(('walk_light', 'walk_heavy'), beta=0.9, eps_mix=0.2)
        state, probs = update_curriculum(state, {'walk_light': 1.0, 'walk_heavy': 0.0})
        np.testing.assert_allclose(state.mu, [0.1, 0.0])
        np.testing.assert_allclose(state.lp, [0.9, 0.0])
        np.testing.assert_allclose(probs, [0.9, 0.1])
        state, probs = update_curriculum(state, {'walk_light': 1.0, 'walk_heavy': 0.0})
        np.testing.assert_allclose(state.mu, [0.19, 0.0])
        self.assertAlmostEqual(probs.sum(), 1.0)

    def test_missing_reward_rejected(self):
        state = CurriculumState.initial(('walk_light', 'walk_heavy'))
        with self.assertRaises(ValueError):
            update_curriculum(state, {'walk_light': 1.0})

    def test_sampled_frequencies_match_distribution(self):
        tasks = ('walk_light', 'walk_heavy', 'push_light', 'push_heavy')
        state = CurriculumState.initial(tasks, eps_mix=0.2)
        state, probs = update_curriculum(state, dict(zip(tasks, [0.3, 0.1, 0.0, 0.2])))
        rng = np.random.default_rng(11)
        draws = 100_000
        counts = np.zeros(len(tasks))
        for _ in range(draws):
            counts[tasks.index(sample_task(state, rng))] += 1
        self.assertGreater(chisquare(counts, probs * draws).pvalue, 0.01)


class TopsimTests(SimpleTestCase):

    def test_perfect_language_scores_one(self):
        result = topsim(perfect_language_table())
        self.assertFalse(result.degenerate)
        self.assertAlmostEqual(result.value, 1.0, places=12)
        self.assertEqual(result.pairs, 192 * 191 // 2)

    def test_constant_language_is_degenerate(self):
        message = Message((0, 0, 0, 0, 0))
        result = topsim({concept: message for concept in all_concepts()})
        self.assertTrue(result.degenerate)
        self.assertEqual(result.value, 0.0)

    def test_matches_brute_force_spearman(self):
        rng = np.random.default_rng(0)
        for table in (random_table(rng), random_table(rng, d_m=2)):
            self.assertAlmostEqual(topsim(table).value, brute_force_topsim(table), delta=1e-9)

    def test_invariant_under_symbol_relabeling(self):
        rng = np.random.default_rng(1)
        table = random_table(rng)
        relabel = [rng.permutation(4) for _ in range(5)]
        relabeled = {
            concept: Message(tuple(int(relabel[i][s]) for i, s in enumerate(message.symbols)))
            for concept, message in table.items()
        }
        self.assertAlmostEqual(topsim(table).value, topsim(relabeled).value, delta=1e-12)

    def test_random_bijection_is_near_zero(self):
        rng = np.random.default_rng(2)
        concepts = all_concepts()
        messages = list(perfect_language_table().values())
        small = 0
        for _ in range(1000):
            order = rng.permutation(len(messages))
            value = topsim({concept: messages[i] for concept, i in zip(concepts, order)}).value
            small += abs(value) < 0.1
        self.assertGreaterEqual(small, 950)

    def test_needs_two_concepts(self):
        with self.assertRaises(ValueError):
            topsim({all_concepts()[0]: Message((0, 0, 0, 0, 0))})


class EvaluationTests(SimpleTestCase):

    def setUp(self):
        self.config = tiny_config(speaker='perfect')
        self.agents = build_agents(self.config, np.random.default_rng(0))

    def test_training_task_classes(self):
        self.assertEqual(task_classes_for(make_split('none')), list(TASK_CLASSES))
        self.assertEqual(task_classes_for(make_split('none'), verb='walk'), ['walk_light', 'walk_heavy'])
        self.assertEqual(task_classes_for(make_split('numeral'), SplitMode.TEST), ['pull_heavy'])
        self.assertEqual(len(task_classes_for(make_split('visual'), SplitMode.TEST)), 6)

    def test_results_do_not_depend_on_evaluation_order(self):
        split = make_split('none')
        together = evaluate_heldout(self.agents, split, ['walk_light', 'pull_heavy'], 4, seed=3, t_max=6)
        alone = evaluate_heldout(self.agents, split, ['pull_heavy'], 4, seed=3, t_max=6)
        self.assertEqual(together[1], alone[0])

    def test_zero_shot_requires_test_set(self):
        with self.assertRaises(EmptyTestSet):
            evaluate_zero_shot(self.agents, make_split('none'), 2, seed=0)

    def test_zero_shot_numeral_split(self):
        results = evaluate_zero_shot(self.agents, make_split('numeral'), 3, seed=0, t_max=6)
        self.assertEqual([r.task_class for r in results], ['pull_heavy'])
        self.assertEqual(results[0].episodes, 3)

    def test_random_policy_baseline_is_a_rate(self):
        results = random_policy_baseline(make_split('none'), ['walk_light'], 20, seed=0)
        self.assertTrue(0.0 <= results[0].accuracy <= 1.0)

    def test_report_round_trip(self):
        results = evaluate_heldout(self.agents, make_split('none'), ['walk_light'], 2, seed=0, t_max=6)
        parsed = parse_report(format_report(results))
        self.assertEqual(parsed['walk_light'][1], 2)
        self.assertAlmostEqual(parsed['walk_light'][0], results[0].accuracy, places=6)


class ConfigTests(SimpleTestCase):

    def test_defaults(self):
        config = RunConfig()
        self.assertEqual((config.n_m, config.d_m, config.k), (5, 4, 5))
        self.assertEqual(config.eval_every, 100)
        self.assertEqual(config.heldout_episodes, 20)
        self.assertEqual((config.gamma, config.t_max), (0.95, 30))

    def test_unknown_key_reports_line(self):
        with self.assertRaises(ConfigInvalid) as raised:
            load_config_text('seed = 3\nlearning_speed = 2\n')
        self.assertEqual(raised.exception.errors[0][0], 'learning_speed')
        self.assertEqual(raised.exception.errors[0][2], 2)

    def test_range_error_reports_line(self):
        with self.assertRaises(ConfigInvalid) as raised:
            load_config_text('# comment\nseed = 1\nd_m = 1\n')
        key, _, line = raised.exception.errors[0]
        self.assertEqual((key, line), ('d_m', 3))

    def test_invalid_combinations(self):
        with self.assertRaises(ConfigInvalid):
            load_config(overrides={'speaker': 'perfect', 'n_m': 4})
        with self.assertRaises(ConfigInvalid):
            load_config(overrides={'oracle_listener': True})

    def test_round_trip(self):
        config = load_config(overrides={'seed': 9, 'split': 'visual', 'lambda1': 0.25, 'task': 'walk'})
        self.assertEqual(load_config_text(format_config(config)), config)
        self.assertEqual(config.task_verb, 'walk')

    def test_overrides_win_and_none_is_ignored(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'base.cfg'
            path.write_text('seed = 1\nlambda1 = 0.3\n', encoding='utf-8')
            config = load_config(path, {'seed': '7', 'lambda1': None})
        self.assertEqual(config.seed, 7)
        self.assertEqual(config.lambda1, 0.3)

    def test_shipped_base_config_matches_defaults(self):
        config = load_config(Path(settings.BASE_DIR) / 'base.cfg', {'seed': 7, 'split': 'visual'})
        self.assertEqual((config.seed, config.split), (7, 'visual'))
        self.assertEqual(config.output_dir, 'runs/base')
        self.assertEqual(config.model_copy(update={'seed': 0, 'split': 'none', 'output_dir': 'runs/default'}),
                         RunConfig())


class TrainingLoopTests(SimpleTestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.root = Path(self.tmp.name)

    def test_same_seed_gives_identical_metrics(self):
        first = train(tiny_config(seed=4, output_dir=str(self.root / 'a')))
        second = train(tiny_config(seed=4, output_dir=str(self.root / 'b')))
        self.assertEqual(first.metrics_path.read_bytes(), second.metrics_path.read_bytes())
        first_stores = deserialize_checkpoint(first.checkpoint_path.read_bytes()).stores
        second_stores = deserialize_checkpoint(second.checkpoint_path.read_bytes()).stores
        for name, store in first_stores.items():
            self.assertEqual(store.fingerprint(), second_stores[name].fingerprint())

    def test_rerun_from_effective_config(self):
        result = train(tiny_config(seed=2, split='visual', output_dir=str(self.root / 'run')))
        original = result.metrics_path.read_bytes()
        echoed = load_config(result.output_dir / 'effective.cfg')
        self.assertEqual(train(echoed).metrics_path.read_bytes(), original)

    def test_metrics_columns_and_snapshots(self):
        result = train(tiny_config(task='walk', output_dir=str(self.root / 'walk')))
        header = result.metrics_path.read_text(encoding='utf-8').splitlines()[0].split(',')
        self.assertEqual(header, [
            'episode', 'task_class', 'r_env', 'r_cov', 'r_inf_sum', 'success',
            'heldout_success_walk_light', 'heldout_success_walk_heavy', 'topsim',
            'lp_walk_light', 'lp_walk_heavy',
        ])
        self.assertEqual([snapshot.episode for snapshot in result.snapshots], [0, 8, 16])
        rows = result.metrics_path.read_text(encoding='utf-8').splitlines()[1:]
        self.assertEqual(len(rows), 16)
        self.assertTrue(all(row.split(',')[1].startswith('walk_') for row in rows))

    def test_checkpoint_round_trips_bit_exactly(self):
        result = train(tiny_config(output_dir=str(self.root / 'ckpt')))
        payload = result.checkpoint_path.read_bytes()
        checkpoint = deserialize_checkpoint(payload)
        config, agents = agents_from_checkpoint(checkpoint)
        self.assertEqual(format_config(config), checkpoint.config_text)
        self.assertEqual(serialize_checkpoint(checkpoint.config_text, agents.stores()), payload)

    def test_perfect_speaker_topsim_snapshot(self):
        result = train(tiny_config(speaker='perfect', episodes=0, output_dir=str(self.root / 'perfect')))
        self.assertAlmostEqual(result.final.topsim, 1.0, places=12)


class LearningTests(SimpleTestCase):
    """縮小規模的學習回歸測試：短 t_max 下隨機策略很少成功，學到導航才會拉開差距"""

    WALK = {
        'speaker': 'none', 'oracle_listener': True, 'task': 'walk', 't_max': 8,
        'd_h': 16, 'd_g': 16, 'batch_size': 8, 'lr_listener': 0.01,
        'episodes': 2400, 'eval_every': 2400, 'heldout_episodes': 10, 'checkpoint_every': 2400,
    }
    WINDOW = 400

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def test_oracle_listener_learns_to_walk(self):
        config = RunConfig(**self.WALK, output_dir=self.tmp.name)
        result = train(config)
        success = pd.read_csv(result.metrics_path)['success'].to_numpy(dtype=float)
        early, late = success[:self.WINDOW].mean(), success[-self.WINDOW:].mean()
        self.assertGreater(late, early)

        baseline = random_policy_baseline(make_split('none'), ['walk_light', 'walk_heavy'], 200, seed=0,
                                          t_max=config.t_max)
        chance = np.mean([task.accuracy for task in baseline])
        self.assertGreater(late, chance)


class ExperimentTests(SimpleTestCase):

    def test_plan_expands_presets_splits_and_seeds(self):
        planned = plan_runs('zeroshot', range(2), '/tmp/lab', {'episodes': 4})
        self.assertEqual(len(planned), 2 * 2 * 2)
        self.assertEqual(len({run.config.output_dir for run in planned}), len(planned))
        simple = [run for run in planned if run.preset == 'simple']
        self.assertTrue(all(not run.config.use_coverage and not run.config.use_influence for run in simple))
        self.assertEqual({run.config.split for run in planned}, {'visual', 'numeral'})
        self.assertTrue(all(run.config.episodes == 4 for run in planned))

    def test_preset_wins_over_shared_overrides(self):
        planned = plan_runs('walk', [3], '/tmp/lab', {'speaker': 'learned'})
        by_preset = {run.preset: run.config for run in planned}
        self.assertEqual(by_preset['perfect'].speaker, 'perfect')
        self.assertTrue(by_preset['oracle'].oracle_listener)
        self.assertEqual(by_preset['intrinsic'].task, 'walk')
        self.assertEqual(by_preset['intrinsic'].seed, 3)

    def test_seed_quorum(self):
        self.assertEqual(seed_quorum(5), 3)
        self.assertEqual(seed_quorum(1), 1)

    def test_walk_checks(self):
        rows = []
        for seed, (perfect, oracle, intrinsic) in enumerate([(0.95, 0.92, 0.9), (0.97, 0.91, 0.7), (0.93, 0.9, 0.88)]):
            for preset, value in (('perfect', perfect), ('oracle', oracle), ('intrinsic', intrinsic)):
                rows.append({'experiment': 'walk', 'preset': preset, 'split': 'none', 'seed': seed,
                             'metric': 'heldout_mean', 'value': value, 'episodes': 20})
        checks = walk_checks(summary_frame(rows))
        self.assertEqual([check.ok for check in checks], [True, True, True])
        self.assertIn('2/3', checks[2].detail)

        rows[0]['value'] = 0.5
        self.assertFalse(walk_checks(summary_frame(rows))[0].ok)

    def test_zero_shot_checks_pool_successes(self):
        rows = [
            {'experiment': 'zeroshot', 'preset': preset, 'split': split, 'seed': 0,
             'metric': f'zeroshot_{task}', 'value': value, 'episodes': 500}
            for preset, split, task, value in (
                ('intrinsic', 'visual', 'walk_light', 0.8), ('intrinsic', 'visual', 'walk_heavy', 0.7),
                ('simple', 'visual', 'walk_light', 0.75), ('simple', 'visual', 'walk_heavy', 0.7),
                ('intrinsic', 'numeral', 'pull_heavy', 0.6), ('simple', 'numeral', 'pull_heavy', 0.65),
            )
        ]
        checks = zero_shot_checks(summary_frame(rows))
        self.assertEqual([check.ok for check in checks], [True, False])
        self.assertIn('0.7500 vs 0.7250', checks[0].detail)

    def test_run_rows_add_mean_and_zero_shot(self):
        run = plan_runs('zeroshot', [0], '/tmp/lab')[0]
        rows = run_rows(run, {'walk_light': 0.5, 'pull_heavy': 1.0}, 0.25,
                        [TaskAccuracy('walk_light', 3, 4)])
        metrics = {row['metric']: row['value'] for row in rows}
        self.assertEqual(metrics['heldout_mean'], 0.75)
        self.assertEqual(metrics['topsim'], 0.25)
        self.assertEqual(metrics['zeroshot_walk_light'], 0.75)


class CommandTests(TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.root = Path(self.tmp.name)

    def train_tiny(self, name, *extra):
        out = io.StringIO()
        args = ['--output-dir', str(self.root / name)]
        for key, value in TINY.items():
            args += ['--set', f'{key}={value}']
        call_command('train', *args, *extra, stdout=out)
        return self.root / name, out.getvalue()

    def test_train_writes_artifacts_and_records_run(self):
        output_dir, text = self.train_tiny('cmd', '--seed', '7', '--split', 'visual', '--lambda1', '0.1')
        for name in ('effective.cfg', 'metrics.csv', 'checkpoint.bin'):
            self.assertTrue((output_dir / name).is_file(), name)
        self.assertIn('split = visual', (output_dir / 'effective.cfg').read_text(encoding='utf-8'))
        run = TrainingRun.objects.get()
        self.assertEqual(run.status, RunStatusChoices.COMPLETED)
        self.assertEqual(run.seed, 7)
        self.assertIsNone(run.traceback)
        self.assertIn('✅', text)

    def test_train_rejects_out_of_range_value(self):
        with self.assertRaises(CommandError) as raised:
            call_command('train', '--dm', '1', '--output-dir', str(self.root / 'bad'), stdout=io.StringIO())
        self.assertEqual(raised.exception.returncode, 1)
        self.assertIn('d_m', str(raised.exception))

    def test_train_reports_config_line(self):
        path = self.root / 'base.cfg'
        path.write_text('seed = 1\nwhat = 2\n', encoding='utf-8')
        with self.assertRaises(CommandError) as raised:
            call_command('train', '--config', str(path), stdout=io.StringIO())
        self.assertEqual(raised.exception.returncode, 1)
        self.assertIn('第 2 行', str(raised.exception))

    def test_train_rejects_malformed_assignment(self):
        with self.assertRaises(CommandError) as raised:
            call_command('train', '--set', 'seed', stdout=io.StringIO())
        self.assertEqual(raised.exception.returncode, 1)

    def test_train_crash_uses_training_exit_code(self):
        with mock.patch('celery_app.tasks.training.train', side_effect=FloatingPointError('loss 出現 NaN')):
            with self.assertRaises(CommandError) as raised:
                self.train_tiny('crash')
        self.assertEqual(raised.exception.returncode, 4)
        self.assertIn('NaN', str(raised.exception))
        run = TrainingRun.objects.get()
        self.assertEqual(run.status, RunStatusChoices.FAILED)
        self.assertIn('FloatingPointError', run.traceback)

    def test_topsim_on_perfect_speaker(self):
        output_dir, _ = self.train_tiny('perfect', '--speaker', 'perfect', '--episodes', '0')
        out = io.StringIO()
        call_command('topsim', str(output_dir / 'checkpoint.bin'), stdout=out, stderr=io.StringIO())
        lines = out.getvalue().splitlines()
        self.assertEqual(lines[0], 'topsim 1.000000')
        self.assertEqual(lines[1], 'collisions 0')
        self.assertEqual(len(lines), 2 + 192)

    def test_topsim_without_speaker(self):
        output_dir, _ = self.train_tiny('oracle', '--speaker', 'none', '--oracle-listener', '--episodes', '0')
        with self.assertRaises(CommandError) as raised:
            call_command('topsim', str(output_dir / 'checkpoint.bin'), stdout=io.StringIO())
        self.assertEqual(raised.exception.returncode, 1)

    def test_evaluate_numeral_split(self):
        output_dir, _ = self.train_tiny('numeral', '--speaker', 'perfect', '--split', 'numeral', '--episodes', '0')
        out = io.StringIO()
        call_command('evaluate', str(output_dir / 'checkpoint.bin'), '--episodes', '3', stdout=out)
        task_class, accuracy, n = out.getvalue().split()
        self.assertEqual((task_class, n), ('pull_heavy', '3'))
        self.assertTrue(0.0 <= float(accuracy) <= 1.0)
        self.assertEqual(EvaluationReport.objects.get().run, TrainingRun.objects.get())

    def test_evaluate_without_test_set(self):
        output_dir, _ = self.train_tiny('none', '--speaker', 'perfect', '--episodes', '0')
        with self.assertRaises(CommandError) as raised:
            call_command('evaluate', str(output_dir / 'checkpoint.bin'), stdout=io.StringIO())
        self.assertEqual(raised.exception.returncode, 1)

    def test_missing_and_corrupt_checkpoints(self):
        with self.assertRaises(CommandError) as raised:
            call_command('evaluate', str(self.root / 'nope.bin'), stdout=io.StringIO())
        self.assertEqual(raised.exception.returncode, 3)

        corrupt = self.root / 'corrupt.bin'
        corrupt.write_bytes(b'CLABCKPT\x07\x00')
        for command in ('evaluate', 'topsim', 'rollout'):
            with self.assertRaises(CommandError) as raised:
                call_command(command, str(corrupt), stdout=io.StringIO())
            self.assertEqual(raised.exception.returncode, 3, command)

    def test_rollout_dump_replays(self):
        output_dir, _ = self.train_tiny('rollout', '--speaker', 'perfect', '--episodes', '0')
        dump_path = self.root / 'episode.txt'
        call_command('rollout', str(output_dir / 'checkpoint.bin'), '--seed', '3', '--output', str(dump_path),
                     stdout=io.StringIO(), stderr=io.StringIO())
        self.assertTrue(dump_path.read_text(encoding='utf-8').startswith('# task='))
        out = io.StringIO()
        call_command('rollout', '--replay', str(dump_path), stdout=out)
        self.assertIn('✅', out.getvalue())

    def test_replay_divergence_exits_two(self):
        task = Concept('walk', 'red', 'small', 'light', 'square')
        start = GridState(objects=(target_object_for(task, (3, 3)),), agent=(0, 0), task=task)
        after, reward, _ = step(start, Action.RIGHT)
        path = self.root / 'tampered.txt'
        path.write_text(dump_trajectory([start, after], [Action.RIGHT], [reward]).replace(
            ';0,1;right;', ';0,2;right;'), encoding='utf-8')
        with self.assertRaises(CommandError) as raised:
            call_command('rollout', '--replay', str(path), stdout=io.StringIO(), stderr=io.StringIO())
        self.assertEqual(raised.exception.returncode, 2)

    def test_plot_writes_png(self):
        output_dir, _ = self.train_tiny('plot')
        image = self.root / 'curves.png'
        call_command('plot', str(output_dir / 'metrics.csv'), '--output', str(image), stdout=io.StringIO())
        self.assertTrue(image.read_bytes().startswith(b'\x89PNG'))

    def test_plot_missing_csv(self):
        with self.assertRaises(CommandError) as raised:
            call_command('plot', str(self.root / 'missing.csv'), stdout=io.StringIO())
        self.assertEqual(raised.exception.returncode, 3)

    def tiny_assignments(self) -> list:
        args = []
        for key, value in TINY.items():
            args += ['--set', f'{key}={value}']
        return args

    def test_reproduce_walk_writes_summary(self):
        out = io.StringIO()
        call_command('reproduce', 'walk', '--seeds', '1', '--episodes', '8',
                     '--output-root', str(self.root / 'repro'), *self.tiny_assignments(), stdout=out)
        summary = pd.read_csv(self.root / 'repro' / 'walk' / 'summary.csv')
        self.assertEqual(set(summary['preset']), {'perfect', 'oracle', 'intrinsic', 'simple'})
        self.assertEqual(set(summary[summary['metric'] == 'heldout_mean']['preset']),
                         {'perfect', 'oracle', 'intrinsic', 'simple'})
        self.assertEqual(TrainingRun.objects.filter(status=RunStatusChoices.COMPLETED).count(), 4)
        self.assertTrue((self.root / 'repro' / 'walk' / 'oracle' / 'none' / 'seed0' / 'checkpoint.bin').is_file())
        self.assertIn('WALK held-out', out.getvalue())

    def test_reproduce_zeroshot_evaluates_test_tasks(self):
        call_command('reproduce', 'zeroshot', '--seeds', '1', '--episodes', '4', '--eval-episodes', '2',
                     '--output-root', str(self.root / 'zs'), *self.tiny_assignments(), stdout=io.StringIO())
        summary = pd.read_csv(self.root / 'zs' / 'zeroshot' / 'summary.csv')
        zero_shot = summary[summary['metric'].str.startswith('zeroshot_')]
        self.assertEqual(set(zero_shot['metric']),
                         {'zeroshot_walk_light', 'zeroshot_walk_heavy', 'zeroshot_pull_heavy'})
        self.assertTrue((zero_shot['episodes'] == 2).all())

    def test_reproduce_rejects_bad_override(self):
        with self.assertRaises(CommandError) as raised:
            call_command('reproduce', 'topsim', '--set', 'd_m=1', '--output-root', str(self.root / 'bad'),
                         stdout=io.StringIO())
        self.assertEqual(raised.exception.returncode, 1)

    def test_verify_passes(self):
        out = io.StringIO()
        call_command('verify', '--transitions', '500', '--graphs', '10', stdout=out)
        self.assertIn('全部驗證通過', out.getvalue())

    @override_settings(LAB_OUTPUT_DIR='/nonexistent-base')
    def test_relative_output_dir_uses_lab_base(self):
        from trainer.loop import resolve_output_dir
        self.assertEqual(resolve_output_dir(RunConfig(output_dir='runs/x')), Path('/nonexistent-base/runs/x'))
