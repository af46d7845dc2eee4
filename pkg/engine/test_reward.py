import math

import numpy as np
from django.test import SimpleTestCase

from .errors import InsufficientCandidatesError, InvalidParameterError
from .reward import AnswerDistribution, RewardConfig, RolloutGroup, group_advantage, reward, score_group


class RewardTests(SimpleTestCase):

    def test_equal_to_incorrect_mean_is_zero(self):
        dist = AnswerDistribution.from_probabilities([0.25] * 4, 2)
        self.assertEqual(reward(dist), 0.0)

    def test_hand_computed_value(self):
        dist = AnswerDistribution.from_probabilities([0.7, 0.1, 0.1, 0.1], 0)
        self.assertAlmostEqual(reward(dist, RewardConfig(temperature=1.0)), math.tanh(math.log(7)), delta=1e-9)

    def test_low_temperature_saturates(self):
        dist = AnswerDistribution.from_probabilities([0.7, 0.1, 0.1, 0.1], 0)
        self.assertGreater(reward(dist, RewardConfig(temperature=1e-3)), 0.999999)

    def test_zero_probability_is_floored(self):
        dist = AnswerDistribution.from_probabilities([0.0, 0.5, 0.5], 0)
        value = reward(dist)
        self.assertTrue(-1.0 <= value < 0.0)

    def test_candidate_count(self):
        with self.assertRaises(InsufficientCandidatesError):
            AnswerDistribution.from_probabilities([1.0], 0)
        with self.assertRaises(InvalidParameterError):
            AnswerDistribution.from_probabilities([0.5, 0.5], 2)
        self.assertEqual(AnswerDistribution.from_probabilities([0.5, 0.5], 0).candidates, ("A", "B"))

    def test_config_validation(self):
        with self.assertRaises(InvalidParameterError):
            RewardConfig(temperature=0)
        with self.assertRaises(InvalidParameterError):
            RewardConfig(probability_floor=1.0)

    def test_properties_over_random_distributions(self):
        rng = np.random.default_rng(17)
        for _ in range(1000):
            size = int(rng.integers(2, 8))
            probs = rng.uniform(0.01, 1.0, size=size)
            correct = int(rng.integers(0, size))
            config = RewardConfig(temperature=float(rng.uniform(1.0, 3.0)))
            base = reward(AnswerDistribution.from_probabilities(probs, correct), config)
            self.assertTrue(-1.0 < base < 1.0)

            scaled = reward(AnswerDistribution.from_probabilities(probs * float(rng.uniform(0.1, 10.0)), correct), config)
            self.assertAlmostEqual(base, scaled, delta=1e-9)

            boosted = probs.copy()
            boosted[correct] *= 1.5
            self.assertGreater(reward(AnswerDistribution.from_probabilities(boosted, correct), config), base)

            others = np.delete(probs, correct)
            swapped = np.full(size, probs[correct])
            swapped[correct] = others.mean()
            # swapping p(ans) with the incorrect mean inverts the ratio
            mirrored = reward(AnswerDistribution.from_probabilities(swapped, correct), config)
            self.assertAlmostEqual(mirrored, -base, delta=1e-9)


class GroupAdvantageTests(SimpleTestCase):

    def test_examples(self):
        self.assertEqual(group_advantage(RolloutGroup((1.0, 1.0, 1.0))), [0.0, 0.0, 0.0])
        self.assertEqual(group_advantage(RolloutGroup((0.5, -0.5))), [0.5, -0.5])
        np.testing.assert_allclose(group_advantage(RolloutGroup((0.9, 0.3, 0.0))), [0.5, -0.1, -0.4], atol=1e-12)

    def test_shift_invariance_and_zero_sum(self):
        rng = np.random.default_rng(8)
        for _ in range(200):
            rewards = tuple(float(r) for r in rng.uniform(-1, 1, size=int(rng.integers(1, 10))))
            advantages = group_advantage(RolloutGroup(rewards))
            self.assertAlmostEqual(sum(advantages), 0.0, delta=1e-12)
            shifted = group_advantage(RolloutGroup(tuple(r + 0.3 for r in rewards)))
            np.testing.assert_allclose(shifted, advantages, atol=1e-12)

    def test_empty_group(self):
        with self.assertRaises(InvalidParameterError):
            RolloutGroup(())

    def test_score_group(self):
        dists = [AnswerDistribution.from_probabilities(p, 0) for p in ([0.7, 0.1, 0.1, 0.1], [0.25] * 4)]
        scored = score_group(dists)
        self.assertAlmostEqual(scored["rewards"][0], math.tanh(math.log(7)))
        self.assertAlmostEqual(scored["advantages"][0], -scored["advantages"][1])
