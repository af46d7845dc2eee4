import csv
import io
import math

import numpy as np
from django.test import SimpleTestCase

from .errors import EmptyEvidenceError, InvalidParameterError, OverBudgetError
from .reward import reward
from .sampling import SamplingStrategy, SelectionResult, uniform_sample
from .segmentation import SegmentationPolicy, boundary_scores, segment
from .simulation import (
    CSV_COLUMNS,
    ExperimentConfig,
    SimAnswerModel,
    evidence_hit,
    evidence_recall,
    generate_video,
    run_experiment,
    simulate_answer,
)
from .timeline import ClipSpan, Timeline


def picked(*indices):
    return SelectionResult(indices=tuple(indices), strategy=SamplingStrategy.UNIFORM)


class GenerateVideoTests(SimpleTestCase):

    def test_shape_and_determinism(self):
        video = generate_video(256, 8, seed=7)
        (span,) = video.evidence_spans
        self.assertEqual(span.length, 8)
        self.assertTrue(0 <= span.start and span.end <= 255)
        self.assertEqual(generate_video(256, 8, seed=7), video)

    def test_needle_fills_timeline(self):
        video = generate_video(32, 32, seed=1)
        self.assertEqual(video.evidence_spans, (ClipSpan(0, 31),))
        self.assertEqual(len(video.scenes), 1)

    def test_needle_too_long(self):
        with self.assertRaises(OverBudgetError):
            generate_video(16, 17, seed=0)
        with self.assertRaises(OverBudgetError):
            generate_video(16, 9, seed=0, needles=2)
        with self.assertRaises(InvalidParameterError):
            generate_video(16, 0, seed=0)

    def test_needle_is_its_own_scene(self):
        for seed in range(50):
            video = generate_video(256, 8, seed=seed)
            self.assertIn(video.evidence_spans[0], video.scenes.scenes)
            self.assertEqual(video.scenes.frame_count, 256)

    def test_multi_needle_spans_are_disjoint(self):
        for seed in range(200):
            video = generate_video(64, 10, seed=seed, needles=2)
            first, second = video.evidence_spans
            self.assertEqual((first.length, second.length), (10, 10))
            self.assertLess(first.end, second.start)
            self.assertLessEqual(second.end, 63)
            self.assertEqual(len(video.oracle_clips()), 2)

    def test_needle_start_is_uniform(self):
        starts = np.array([generate_video(20, 5, seed=s).evidence_spans[0].start for s in range(4000)])
        counts = np.bincount(starts, minlength=16)
        self.assertEqual(counts.size, 16)
        self.assertTrue(np.all(counts > 150))

    def test_rendered_histograms_cut_only_at_scene_changes(self):
        detected = 0
        for seed in range(20):
            video = generate_video(256, 8, seed=seed)
            frames = video.histograms()
            self.assertEqual(len(frames), 256)
            partition = segment(boundary_scores(frames), SegmentationPolicy(min_scene_len=1))
            self.assertTrue(set(partition.boundaries) <= set(video.scenes.boundaries))
            detected += len(partition) - 1
        self.assertGreater(detected, 0)


class EvidenceMetricTests(SimpleTestCase):

    def test_recall(self):
        evidence = [ClipSpan(100, 107)]
        self.assertEqual(evidence_recall(picked(*range(100, 108)), evidence), 1.0)
        self.assertEqual(evidence_recall(uniform_sample(Timeline(256), 8), evidence), 0.0)
        self.assertEqual(evidence_recall(picked(100, 102, 104, 106), evidence), 0.5)

    def test_hit(self):
        evidence = [ClipSpan(0, 3), ClipSpan(10, 13)]
        self.assertEqual(evidence_hit(picked(2, 20), evidence), 0.5)
        self.assertEqual(evidence_hit(picked(2, 11), evidence), 1.0)

    def test_empty_evidence(self):
        with self.assertRaises(EmptyEvidenceError):
            evidence_recall(picked(1), [])
        with self.assertRaises(EmptyEvidenceError):
            evidence_hit(picked(1), [])


class SimulateAnswerTests(SimpleTestCase):

    def test_no_coverage_is_chance(self):
        dist = simulate_answer(0.0)
        self.assertEqual(dist.probabilities, (0.25, 0.25, 0.25, 0.25))
        self.assertEqual(reward(dist), 0.0)

    def test_full_coverage(self):
        dist = simulate_answer(1.0)
        self.assertAlmostEqual(dist.probabilities[0], 0.95)
        self.assertAlmostEqual(dist.probabilities[1], 0.05 / 3)
        self.assertAlmostEqual(reward(dist), math.tanh(math.log(57)), delta=1e-9)

    def test_linear_link(self):
        self.assertAlmostEqual(simulate_answer(0.5).probabilities[0], 0.6)

    def test_reward_monotone_in_recall(self):
        rewards = [reward(simulate_answer(r)) for r in np.linspace(0, 1, 101)]
        self.assertTrue(all(a <= b for a, b in zip(rewards, rewards[1:])))

    def test_model_validation(self):
        with self.assertRaises(InvalidParameterError):
            SimAnswerModel(base_prob=0.5, gain=0.7)
        with self.assertRaises(InvalidParameterError):
            SimAnswerModel(num_choices=1)
        with self.assertRaises(InvalidParameterError):
            simulate_answer(1.2)


class RunExperimentTests(SimpleTestCase):

    def test_needle_benchmark(self):
        seeds = tuple(range(1000))
        report = run_experiment(ExperimentConfig(strategies=("uniform", "focused", "hybrid"), ks=(8,), seeds=seeds))
        self.assertEqual(len(report.rows), 3000)
        self.assertEqual(report.mean("focused", 8), 1.0)

        # a placement is hit iff it covers one of the 8 uniform indices: 64 of 249 placements
        exact_hit_rate = 64 / 249
        self.assertLessEqual(abs(exact_hit_rate - 0.25), 0.03)
        spread = 4 * math.sqrt(exact_hit_rate * (1 - exact_hit_rate) / len(seeds))
        self.assertLessEqual(abs(report.mean("uniform", 8, "hit") - exact_hit_rate), spread)
        self.assertAlmostEqual(report.mean("uniform", 8), report.mean("uniform", 8, "hit") / 8)

        by_seed = {}
        for row in report.rows:
            by_seed.setdefault(row.seed, {})[row.strategy] = row
        for seed, rows in by_seed.items():
            self.assertGreater(rows["focused"].reward, rows["uniform"].reward, seed)
            self.assertGreaterEqual(rows["hybrid"].recall, rows["uniform"].recall, seed)
        self.assertGreater(report.mean("focused", 8, "reward"), report.mean("uniform", 8, "reward"))

    def test_focused_recall_for_larger_budgets(self):
        report = run_experiment(ExperimentConfig(strategies=("focused", "hybrid"), ks=(8, 32), seeds=tuple(range(100))))
        self.assertEqual(report.mean("focused", 32), 1.0)
        self.assertEqual(report.mean("hybrid", 32), 1.0)
        self.assertEqual(report.mean("hybrid", 8), 0.5)

    def test_multi_needle_touches_both_spans(self):
        config = ExperimentConfig(strategies=("focused",), ks=(16,), seeds=tuple(range(100)), needles=2)
        report = run_experiment(config)
        self.assertEqual(report.mean("focused", 16, "hit"), 1.0)

    def test_reports_are_reproducible(self):
        config = ExperimentConfig(ks=(8, 32), seeds=tuple(range(12)))
        first = run_experiment(config)
        self.assertEqual(run_experiment(config), first)
        self.assertEqual(run_experiment(config, jobs=2), first)
        self.assertEqual([(r.strategy, r.k, r.seed) for r in first.rows][:3],
                         [("uniform", 8, 0), ("uniform", 8, 1), ("uniform", 8, 2)])

    def test_csv_and_json_output(self):
        report = run_experiment(ExperimentConfig(seeds=(0, 1)))
        rows = list(csv.reader(io.StringIO(report.to_csv())))
        self.assertEqual(tuple(rows[0]), CSV_COLUMNS)
        self.assertEqual(len(rows), 1 + 6)
        payload = report.to_json()
        self.assertEqual(len(payload["rows"]), 6)
        self.assertEqual({s["strategy"] for s in payload["summary"]}, {"uniform", "focused", "hybrid"})
        self.assertIn("recall_std", payload["summary"][0])

    def test_config_validation(self):
        with self.assertRaises(InvalidParameterError):
            ExperimentConfig(ks=(300,))
        with self.assertRaises(InvalidParameterError):
            ExperimentConfig(strategies=("random",))
        with self.assertRaises(InvalidParameterError):
            ExperimentConfig(seeds=())
