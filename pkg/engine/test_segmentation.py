import json
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from .errors import DimensionError, InsufficientFramesError, InvalidParameterError
from .segmentation import (
    BoundaryScoreSeries,
    FrameHistogram,
    ScenePartition,
    SegmentationPolicy,
    boundary_scores,
    histogram_diff,
    load_histograms,
    segment,
)


def unit(bin_index, bins=4):
    counts = np.zeros(bins)
    counts[bin_index] = 1.0
    return FrameHistogram(counts)


def two_block_video():
    return [unit(0)] * 3 + [unit(1)] * 3


def scene_tuples(partition):
    return [(s.start, s.end) for s in partition.scenes]


class HistogramDiffTests(SimpleTestCase):

    def test_identical_frames(self):
        self.assertEqual(histogram_diff(unit(2), unit(2)), 0.0)

    def test_disjoint_unit_masses(self):
        self.assertEqual(histogram_diff(unit(0), unit(1)), 2.0)

    def test_partial_shift(self):
        self.assertAlmostEqual(histogram_diff(FrameHistogram([0.5, 0.5]), FrameHistogram([0.75, 0.25])), 0.5)

    def test_size_mismatch(self):
        with self.assertRaises(DimensionError):
            histogram_diff(unit(0, 4), unit(0, 8))

    def test_alternative_metrics(self):
        self.assertAlmostEqual(histogram_diff(unit(0), unit(1), "chi_square"), 1.0)
        self.assertAlmostEqual(histogram_diff(unit(0), unit(1), "intersection"), 1.0)
        self.assertAlmostEqual(histogram_diff(unit(3), unit(3), "intersection"), 0.0)
        with self.assertRaises(InvalidParameterError):
            histogram_diff(unit(0), unit(1), "emd")

    def test_histogram_must_be_normalized(self):
        with self.assertRaises(InvalidParameterError):
            FrameHistogram([0.5, 0.6])
        with self.assertRaises(InvalidParameterError):
            FrameHistogram([1.5, -0.5])
        self.assertAlmostEqual(FrameHistogram.from_counts([3, 1]).bins[0], 0.75)


class BoundaryScoreTests(SimpleTestCase):

    def test_constant_video(self):
        scores = boundary_scores([unit(1)] * 5)
        self.assertEqual(scores.scores.tolist(), [0.0, 0.0, 0.0, 0.0])

    def test_two_block_video(self):
        self.assertEqual(boundary_scores(two_block_video()).scores.tolist(), [0.0, 0.0, 2.0, 0.0, 0.0])

    def test_metric_paths_agree_on_l1(self):
        rng = np.random.default_rng(3)
        frames = [FrameHistogram.from_counts(rng.uniform(0.1, 1.0, 16)) for _ in range(10)]
        vectorised = boundary_scores(frames).scores
        pairwise = [histogram_diff(a, b) for a, b in zip(frames, frames[1:])]
        np.testing.assert_allclose(vectorised, pairwise)

    def test_shape(self):
        self.assertEqual(boundary_scores([unit(0), unit(1)]).frame_count, 2)
        with self.assertRaises(InsufficientFramesError):
            boundary_scores([unit(0)])


class SegmentTests(SimpleTestCase):

    def test_all_zero_scores_give_one_scene(self):
        partition = segment(BoundaryScoreSeries(np.zeros(5)))
        self.assertEqual(scene_tuples(partition), [(0, 5)])

    def test_two_block_video_splits_at_the_jump(self):
        scores = boundary_scores(two_block_video())
        partition = segment(scores, SegmentationPolicy(threshold_lambda=2.0, min_scene_len=1))
        self.assertEqual(scene_tuples(partition), [(0, 2), (3, 5)])
        self.assertEqual(partition.boundaries, (0, 3, 6))

    def test_unreachable_threshold(self):
        scores = boundary_scores(two_block_video())
        partition = segment(scores, SegmentationPolicy(threshold_lambda=10.0, min_scene_len=1))
        self.assertEqual(len(partition), 1)

    def test_threshold_is_scale_covariant(self):
        rng = np.random.default_rng(11)
        policy = SegmentationPolicy(threshold_lambda=1.5, min_scene_len=3)
        for _ in range(50):
            raw = rng.exponential(0.2, size=120)
            raw[rng.choice(120, size=6, replace=False)] += 2.0
            scores = BoundaryScoreSeries(raw)
            reference = segment(scores, policy)
            self.assertEqual(segment(scores.scaled(0.5), policy), reference)
            self.assertEqual(segment(scores.scaled(10.0), policy), reference)
        two_block = boundary_scores(two_block_video())
        tight = SegmentationPolicy(min_scene_len=1)
        for factor in (0.5, 10.0):
            self.assertEqual(scene_tuples(segment(two_block.scaled(factor), tight)), [(0, 2), (3, 5)])

    def test_min_scene_len_drops_later_cut(self):
        scores = np.zeros(29)
        scores[9] = 5.0   # cut at 10
        scores[13] = 5.0  # cut at 14, too close to 10
        scores[19] = 5.0  # cut at 20
        partition = segment(BoundaryScoreSeries(scores), SegmentationPolicy(threshold_lambda=1.0, min_scene_len=6))
        self.assertEqual(partition.boundaries, (0, 10, 20, 30))

    def test_trailing_short_scene_is_absorbed(self):
        scores = np.zeros(19)
        scores[16] = 5.0
        partition = segment(BoundaryScoreSeries(scores), SegmentationPolicy(threshold_lambda=1.0, min_scene_len=8))
        self.assertEqual(scene_tuples(partition), [(0, 19)])

    def test_scenes_tile_the_timeline(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            frame_count = int(rng.integers(2, 200))
            scores = BoundaryScoreSeries(rng.exponential(1.0, size=frame_count - 1))
            policy = SegmentationPolicy(threshold_lambda=float(rng.uniform(0, 3)), min_scene_len=int(rng.integers(1, 12)))
            scenes = segment(scores, policy).scenes
            self.assertEqual(sum(s.length for s in scenes), frame_count)
            self.assertEqual(scenes[0].start, 0)
            for earlier, later in zip(scenes, scenes[1:]):
                self.assertEqual(earlier.end + 1, later.start)
            if frame_count >= policy.min_scene_len:
                self.assertTrue(all(s.length >= policy.min_scene_len for s in scenes))

    def test_invalid_policy(self):
        with self.assertRaises(InvalidParameterError):
            SegmentationPolicy(min_scene_len=0)


class PartitionJsonTests(SimpleTestCase):

    def test_json_forms(self):
        partition = ScenePartition((0, 3, 6))
        payload = partition.to_json()
        self.assertEqual(payload["scenes"], [{"scene_id": "s1", "start": 0, "end": 2},
                                             {"scene_id": "s2", "start": 3, "end": 5}])
        self.assertEqual(ScenePartition.from_json(payload), partition)
        self.assertEqual(ScenePartition.from_json({"scenes": payload["scenes"]}), partition)

    def test_rejects_non_increasing_boundaries(self):
        with self.assertRaises(InvalidParameterError):
            ScenePartition((0, 3, 3, 6))


class LoadHistogramsTests(SimpleTestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_csv_rows_are_normalized(self):
        path = self.root / "h.csv"
        path.write_text("bin_0,bin_1\n3,1\n0,2\n", encoding="utf-8")
        frames = load_histograms(path)
        self.assertEqual(len(frames), 2)
        self.assertEqual(frames[0].bins.tolist(), [0.75, 0.25])

    def test_csv_header_checked(self):
        path = self.root / "h.csv"
        path.write_text("a,b\n1,1\n", encoding="utf-8")
        with self.assertRaises(DimensionError):
            load_histograms(path)

    def test_json_bins_checked(self):
        path = self.root / "h.json"
        path.write_text(json.dumps({"bins": 2, "frames": [[1, 1], [1, 1, 1]]}), encoding="utf-8")
        with self.assertRaises(DimensionError):
            load_histograms(path)
        path.write_text(json.dumps({"bins": 2, "frames": [[1, 1], [0, 4]]}), encoding="utf-8")
        self.assertEqual(load_histograms(path)[1].bins.tolist(), [0.0, 1.0])

    def test_json_shape_checked(self):
        path = self.root / "h.json"
        for payload in ([[1, 1], [1, 1]], {"frames": "none"}, {"frames": [[1, None]]},
                        {"frames": [3]}, {"bins": "2", "frames": [[1, 1]]}):
            path.write_text(json.dumps(payload), encoding="utf-8")
            with self.assertRaises(InvalidParameterError):
                load_histograms(path)
