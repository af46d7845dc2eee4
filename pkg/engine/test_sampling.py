import math
from fractions import Fraction

import numpy as np
from django.test import SimpleTestCase

from .errors import InvalidBudgetError, InvalidParameterError, NoClipsError, OverBudgetError
from .sampling import (
    SamplingConfig,
    SamplingStrategy,
    focused_sample,
    hybrid_sample,
    hybrid_shares,
    select,
    uniform_sample,
)
from .timeline import ClipSpan, KeyClip, Priority, Timeline, partition_frames


def clip(start, end, priority="P1"):
    return KeyClip(ClipSpan(start, end), Priority.parse(priority))


def random_clips(rng, frame_count):
    clips = []
    for _ in range(int(rng.integers(0, 7))):
        start = int(rng.integers(-5, frame_count + 5))
        end = start + int(rng.integers(0, max(2, frame_count // 4)))
        clips.append(KeyClip(ClipSpan(max(start, 0), max(end, 0)), Priority.P1 if rng.random() < 0.5 else Priority.P2))
    return clips


class UniformSampleTests(SimpleTestCase):

    def test_examples(self):
        self.assertEqual(uniform_sample(Timeline(256), 8).indices, (16, 48, 80, 112, 144, 176, 208, 240))
        self.assertEqual(uniform_sample(Timeline(8), 8).indices, tuple(range(8)))
        self.assertEqual(uniform_sample(Timeline(100), 4).indices, (12, 37, 62, 87))

    def test_budget_errors(self):
        with self.assertRaises(OverBudgetError):
            uniform_sample(Timeline(4), 5)
        with self.assertRaises(InvalidBudgetError):
            uniform_sample(Timeline(4), 0)


class FocusedSampleTests(SimpleTestCase):

    def test_single_clip_absorbs_budget(self):
        result = focused_sample([clip(100, 107)], 8, Timeline(256))
        self.assertEqual(result.indices, tuple(range(100, 108)))
        self.assertIs(result.strategy, SamplingStrategy.FOCUSED)

    def test_two_clip_plan(self):
        result = focused_sample([clip(10, 19), clip(30, 39, "P2")], 6, Timeline(50))
        self.assertEqual(result.plan.quotas, (4, 2))
        self.assertEqual(result.indices, (10, 13, 16, 19, 30, 39))

    def test_top_up_falls_back_to_earliest_unused(self):
        result = focused_sample([clip(48, 49)], 4, Timeline(50))
        self.assertEqual(result.indices, (0, 1, 48, 49))

    def test_top_up_after_last_pick(self):
        result = focused_sample([clip(10, 11)], 4, Timeline(20))
        # clip gives 10, 11; two non-key frames spread over 12..19
        self.assertEqual(result.indices, (10, 11, 14, 18))

    def test_nearby_clips_are_merged_first(self):
        result = focused_sample([clip(5, 10), clip(12, 15)], 3, Timeline(30))
        self.assertEqual(len(result.clips), 1)
        self.assertEqual(result.indices, (5, 10, 15))

    def test_empty_clips(self):
        with self.assertRaises(NoClipsError):
            focused_sample([], 4, Timeline(20))
        with self.assertRaises(NoClipsError):
            focused_sample([clip(40, 45)], 4, Timeline(20))


class HybridSampleTests(SimpleTestCase):

    def test_share_example(self):
        shares = hybrid_shares(50, 150, 32, 4, 0.5)
        self.assertEqual((shares.k_p_raw, shares.k_p, shares.k_b), (18, 18, 14))

    def test_predicted_cap_spills_to_background(self):
        shares = hybrid_shares(4, 252, 32, 4, 0.5)
        self.assertEqual((shares.k_p, shares.k_b), (4, 28))
        result = hybrid_sample([clip(100, 103)], 32, Timeline(256))
        self.assertEqual(len(result), 32)
        self.assertTrue({100, 101, 102, 103} <= set(result.indices))

    def test_background_cap_spills_to_predicted(self):
        shares = hybrid_shares(40, 4, 40, 0.01, 0.0)
        self.assertEqual((shares.k_p_raw, shares.k_p, shares.k_b), (4, 36, 4))

    def test_half_rounds_up(self):
        # k * alpha * p / (alpha * p + b) = 2.5 exactly
        self.assertEqual(hybrid_shares(5, 60, 10, 4, 0.0).k_p_raw, 3)

    def test_empty_clips_match_uniform(self):
        result = hybrid_sample([], 8, Timeline(64))
        self.assertEqual(result.indices, uniform_sample(Timeline(64), 8).indices)

    def test_background_spacing_follows_list_positions(self):
        timeline = Timeline(40)
        result = hybrid_sample([clip(10, 29)], 8, timeline, alpha_pred=1, r_min=0.5)
        _, background = partition_frames(result.clips, timeline)
        picked_background = [i for i in result.indices if i in background]
        self.assertEqual(result.shares.k_b, 4)
        self.assertEqual(picked_background, [2, 7, 32, 37])

    def test_parameter_validation(self):
        with self.assertRaises(InvalidParameterError):
            hybrid_sample([clip(0, 3)], 4, Timeline(20), alpha_pred=0)
        with self.assertRaises(InvalidParameterError):
            hybrid_sample([clip(0, 3)], 4, Timeline(20), r_min=1.5)


class SelectTests(SimpleTestCase):

    def test_auto_dispatch(self):
        clips = [clip(100, 140)]
        self.assertIs(select("auto", clips, 8, Timeline(256)).strategy, SamplingStrategy.FOCUSED)
        self.assertIs(select("auto", clips, 32, Timeline(256)).strategy, SamplingStrategy.HYBRID)
        config = SamplingConfig(focused_max_k=32)
        self.assertIs(select("auto", clips, 32, Timeline(256), config).strategy, SamplingStrategy.FOCUSED)

    def test_empty_clips_fall_back_to_uniform(self):
        result = select(SamplingStrategy.AUTO, [], 8, Timeline(256))
        self.assertIs(result.strategy, SamplingStrategy.UNIFORM)
        self.assertEqual(result.indices, (16, 48, 80, 112, 144, 176, 208, 240))
        self.assertIs(select("focused", [], 8, Timeline(256)).strategy, SamplingStrategy.UNIFORM)

    def test_unknown_strategy(self):
        with self.assertRaises(InvalidParameterError):
            select("random", [], 8, Timeline(256))

    def test_result_json(self):
        timeline = Timeline(50, fps=Fraction(10))
        payload = select("focused", [clip(10, 19), clip(30, 39, "P2")], 6, timeline).to_json(timeline)
        self.assertEqual(payload["strategy"], "focused")
        self.assertEqual(payload["plan"][0], {"clip": 0, "quota": 4, "start": 10, "end": 19, "priority": "P1"})
        self.assertEqual(payload["timestamps"][0], "00:00:01.000")

    def test_deterministic(self):
        clips = [clip(3, 9), clip(40, 70, "P2"), clip(120, 122)]
        first = select("hybrid", clips, 64, Timeline(256))
        second = select("hybrid", list(reversed(clips)), 64, Timeline(256))
        self.assertEqual(first.indices, second.indices)


class SelectionPropertyTests(SimpleTestCase):
    """Randomised (clips, k, T) cases covering every strategy."""

    CASES = 10_000

    def test_budget_exactness_and_guarantees(self):
        rng = np.random.default_rng(424242)
        strategies = list(SamplingStrategy)
        for case in range(self.CASES):
            frame_count = int(rng.integers(1, 300))
            timeline = Timeline(frame_count)
            clips = random_clips(rng, frame_count)
            k = int(rng.integers(1, frame_count + 1))
            strategy = strategies[case % len(strategies)]
            config = SamplingConfig(r_min=float(rng.choice([0.0, 0.25, 0.5, 0.75])))

            result = select(strategy, clips, k, timeline, config)
            context = (case, strategy, frame_count, k, clips)
            self.assertEqual(len(result.indices), k, context)
            self.assertTrue(all(a < b for a, b in zip(result.indices, result.indices[1:])), context)
            self.assertTrue(0 <= result.indices[0] and result.indices[-1] < frame_count, context)

            if result.strategy is SamplingStrategy.FOCUSED:
                merged = result.clips
                if k >= merged.count(Priority.P1):
                    for quota, c in zip(result.plan.quotas, merged):
                        if c.priority is Priority.P1:
                            self.assertGreaterEqual(quota, 1, context)
                if merged.total_length >= k:
                    self.assertTrue(all(any(c.span.contains(i) for c in merged) for i in result.indices), context)

            if result.strategy is SamplingStrategy.HYBRID:
                predicted, _ = partition_frames(result.clips, timeline)
                floor = math.ceil(k * Fraction(str(config.r_min)))
                in_predicted = len(set(predicted).intersection(result.indices))
                self.assertEqual(in_predicted, result.shares.k_p, context)
                if len(predicted) >= floor:
                    self.assertGreaterEqual(in_predicted, floor, context)
