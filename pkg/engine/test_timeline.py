from fractions import Fraction

from django.test import SimpleTestCase
from hypothesis import given, settings, strategies as st

from .errors import InvalidParameterError, InvalidTimelineError
from .timeline import (
    ClipSet,
    ClipSpan,
    KeyClip,
    Priority,
    Timeline,
    clips_from_json,
    merge_adjacent,
    normalize_clipset,
    partition_frames,
)


def clip(start, end, priority="P1", reason=""):
    return KeyClip(ClipSpan(start, end), Priority.parse(priority), reason)


def spans(clips):
    return [(c.span.start, c.span.end, c.priority.value) for c in clips]


raw_clips = st.lists(
    st.builds(
        lambda start, length, p1, reason: clip(start, start + length, "P1" if p1 else "P2", reason),
        st.integers(0, 140), st.integers(0, 40), st.booleans(), st.sampled_from(["", "a", "b"]),
    ),
    max_size=8,
)


class TimelineTests(SimpleTestCase):

    def test_frame_count_must_be_positive(self):
        with self.assertRaises(InvalidTimelineError):
            Timeline(0)
        with self.assertRaises(InvalidTimelineError):
            Timeline(10, fps=Fraction(0))

    def test_timestamps_need_fps(self):
        self.assertIsNone(Timeline(256).format_timestamp(10))
        timeline = Timeline(256, fps=Fraction(30))
        self.assertEqual(timeline.format_timestamp(45), "00:00:01.500")
        self.assertEqual(timeline.format_timestamp(30 * 3725), "01:02:05.000")

    def test_priority_weights(self):
        self.assertEqual(Priority.P1.weight, 2)
        self.assertEqual(Priority.P2.weight, 1)
        self.assertIs(Priority.parse(" p2 "), Priority.P2)
        with self.assertRaises(InvalidParameterError):
            Priority.parse("P3")

    def test_span_rejects_reversed_bounds(self):
        with self.assertRaises(InvalidParameterError):
            ClipSpan(5, 3)
        self.assertEqual(ClipSpan(10, 19).length, 10)


class NormalizeTests(SimpleTestCase):

    def test_empty_input(self):
        self.assertEqual(len(normalize_clipset([], Timeline(100))), 0)

    def test_clamps_to_timeline(self):
        result = normalize_clipset([clip(90, 120)], Timeline(100))
        self.assertEqual(spans(result), [(90, 99, "P1")])

    def test_drops_clips_outside_timeline(self):
        result = normalize_clipset([clip(120, 130), clip(1, 2, "P2")], Timeline(100))
        self.assertEqual(spans(result), [(1, 2, "P2")])

    def test_p1_truncates_overlapping_p2(self):
        result = normalize_clipset([clip(3, 10, "P2"), clip(8, 12, "P1")], Timeline(100))
        self.assertEqual(spans(result), [(3, 7, "P2"), (8, 12, "P1")])

    def test_p1_inside_p2_splits_it(self):
        result = normalize_clipset([clip(10, 20, "P2", "wide"), clip(15, 17, "P1")], Timeline(100))
        self.assertEqual(spans(result), [(10, 14, "P2"), (15, 17, "P1"), (18, 20, "P2")])
        self.assertEqual(result[2].rationale, "wide")

    def test_same_priority_overlaps_union_rationales(self):
        result = normalize_clipset([clip(3, 9, reason="b"), clip(0, 5, reason="a")], Timeline(100))
        self.assertEqual(spans(result), [(0, 9, "P1")])
        self.assertEqual(result[0].rationale, "a; b")

    def test_timeline_validation_happens_on_construction(self):
        with self.assertRaises(InvalidTimelineError):
            normalize_clipset([clip(0, 1)], Timeline(0))

    @settings(max_examples=200, deadline=None)
    @given(raw_clips, st.integers(1, 160))
    def test_normalize_is_idempotent_and_disjoint(self, clips, frame_count):
        timeline = Timeline(frame_count)
        once = normalize_clipset(clips, timeline)
        self.assertEqual(normalize_clipset(once, timeline), once)
        for earlier, later in zip(once, list(once)[1:]):
            self.assertLess(earlier.span.end, later.span.start)
        for c in once:
            self.assertLess(c.span.end, frame_count)


class MergeAdjacentTests(SimpleTestCase):

    def test_merges_same_priority_within_tolerance(self):
        merged = merge_adjacent(ClipSet((clip(5, 10, reason="x"), clip(12, 15, reason="y"))), 2)
        self.assertEqual(spans(merged), [(5, 15, "P1")])
        self.assertEqual(merged[0].rationale, "x; y")

    def test_never_merges_across_priorities(self):
        clips = ClipSet((clip(5, 10), clip(12, 15, "P2")))
        self.assertEqual(merge_adjacent(clips, 2), clips)

    def test_gap_beyond_tolerance(self):
        clips = ClipSet((clip(5, 10), clip(14, 15)))
        self.assertEqual(merge_adjacent(clips, 2), clips)

    def test_merging_cascades(self):
        merged = merge_adjacent(ClipSet((clip(0, 1), clip(4, 5), clip(8, 9))), 2)
        self.assertEqual(spans(merged), [(0, 9, "P1")])

    def test_negative_tolerance_rejected(self):
        with self.assertRaises(InvalidParameterError):
            merge_adjacent(ClipSet(), -1)

    @settings(max_examples=200, deadline=None)
    @given(raw_clips, st.integers(0, 5))
    def test_merge_keeps_coverage_and_disjointness(self, clips, tolerance):
        normalized = normalize_clipset(clips, Timeline(200))
        merged = merge_adjacent(normalized, tolerance)
        self.assertGreaterEqual(merged.total_length, normalized.total_length)
        for earlier, later in zip(merged, list(merged)[1:]):
            self.assertLess(earlier.span.end, later.span.start)


class PartitionFramesTests(SimpleTestCase):

    def test_single_clip(self):
        predicted, background = partition_frames(ClipSet((clip(3, 5),)), Timeline(10))
        self.assertEqual(predicted, (3, 4, 5))
        self.assertEqual(background, (0, 1, 2, 6, 7, 8, 9))

    def test_empty_and_full_cover(self):
        self.assertEqual(partition_frames(ClipSet(), Timeline(4)), ((), (0, 1, 2, 3)))
        predicted, background = partition_frames(ClipSet((clip(0, 9),)), Timeline(10))
        self.assertEqual(predicted, tuple(range(10)))
        self.assertEqual(background, ())

    @settings(max_examples=200, deadline=None)
    @given(raw_clips, st.integers(1, 160))
    def test_partition_covers_timeline(self, clips, frame_count):
        timeline = Timeline(frame_count)
        predicted, background = partition_frames(normalize_clipset(clips, timeline), timeline)
        self.assertEqual(len(predicted) + len(background), frame_count)
        self.assertEqual(sorted(predicted + background), list(range(frame_count)))


class ClipJsonTests(SimpleTestCase):

    def test_accepts_list_or_object(self):
        record = {"start": 1, "end": 3, "priority": "P2", "reason": "door opens"}
        from_list = clips_from_json([record])
        from_object = clips_from_json({"clips": [record]})
        self.assertEqual(from_list, from_object)
        self.assertEqual(from_list[0].to_json(), record)

    def test_clip_before_first_frame_is_dropped(self):
        clips = clips_from_json([{"start": -5, "end": -2, "priority": "P1"},
                                 {"start": -3, "end": 4, "priority": "P2"}])
        self.assertEqual(len(clips), 1)
        self.assertEqual((clips[0].span.start, clips[0].span.end), (0, 4))

    def test_missing_bounds_rejected(self):
        with self.assertRaises(InvalidParameterError):
            clips_from_json([{"start": 4}])
