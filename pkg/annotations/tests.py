import copy
import json
import random
from collections import Counter

from django.test import SimpleTestCase
from hypothesis import given, settings, strategies as st

from engine.errors import InvalidParameterError
from engine.timeline import ClipSpan, KeyClip, Priority

from .documents import (
    AnnotationDocument,
    Chapter,
    RelevanceAnnotation,
    RelevanceBundle,
    RelevanceEntry,
    Scene,
    emit_document,
    emit_relevance,
    parse_document,
    parse_record,
    parse_relevance,
    validate_relevance_against,
)
from .errors import AnnotationValidationError, NoJsonPayloadError
from .payload import load_json_payload, parse_clips, strip_json_payload
from .prompts import RELEVANCE_SCALE, build_caption_prompt, build_clip_selection_prompt, build_relevance_prompt
from .stats import StatsAccumulator, compute_stats, histogram_median


def valid_payload():
    return {
        "peakclips_schema": "1",
        "video_id": "v1",
        "frame_count": 10,
        "scenes": [
            {"scene_id": "s1", "start": 0, "end": 5, "description": "a kitchen"},
            {"scene_id": "s2", "start": 6, "end": 9, "description": "a street"},
        ],
        "chapters": [{"chapter_id": "c1", "scene_ids": ["s1", "s2"], "summary": "cooking then leaving"}],
        "video_summary": "someone cooks and leaves",
    }


def make_document(video_id, scene_lengths, fps=None, source=None, chapters=()):
    scenes, start = [], 0
    for index, length in enumerate(scene_lengths, start=1):
        scenes.append(Scene(f"s{index}", ClipSpan(start, start + length - 1), f"scene {index}"))
        start += length
    return AnnotationDocument(video_id, start, tuple(scenes), tuple(chapters), "summary", fps=fps, source=source)


def make_annotation(video_id, scores, query="what happens?"):
    entries = tuple(RelevanceEntry(f"s{i}", score, "because") for i, score in enumerate(scores, start=1))
    return RelevanceAnnotation(video_id, query, entries)


safe_text = st.text(
    alphabet=st.characters(exclude_categories=("Cs",), exclude_characters="\x00"),
    max_size=30,
)


@st.composite
def documents(draw):
    frame_count = draw(st.integers(1, 400))
    cuts = sorted(draw(st.sets(st.integers(1, frame_count - 1), max_size=12))) if frame_count > 1 else []
    bounds = [0] + cuts + [frame_count]
    scenes = tuple(
        Scene(f"s{i}", ClipSpan(a, b - 1), draw(safe_text))
        for i, (a, b) in enumerate(zip(bounds, bounds[1:]), start=1)
    )
    chapters, position = [], 0
    for number, size in enumerate(draw(st.lists(st.integers(1, 4), max_size=len(scenes))), start=1):
        members = scenes[position:position + size]
        if not members:
            break
        chapters.append(Chapter(f"c{number}", tuple(s.scene_id for s in members), draw(safe_text)))
        position += size + draw(st.integers(0, 1))
    return AnnotationDocument(
        video_id=draw(safe_text.filter(bool)),
        frame_count=frame_count,
        scenes=scenes,
        chapters=tuple(chapters),
        video_summary=draw(safe_text),
        fps=draw(st.one_of(st.none(), st.floats(0.5, 120.0, allow_nan=False))),
        source=draw(st.one_of(st.none(), st.sampled_from(["youtube", "egocentric", "movies"]))),
        input_hash=draw(st.one_of(st.none(), st.text(alphabet="0123456789abcdef", min_size=64, max_size=64))),
    )


class DocumentRoundTripTests(SimpleTestCase):

    def test_well_formed_document(self):
        document = parse_document(json.dumps(valid_payload()).encode())
        self.assertEqual(document.scene_ids, ["s1", "s2"])
        self.assertEqual(document.scenes[1].span, ClipSpan(6, 9))
        self.assertEqual(document.chapters[0].scene_ids, ("s1", "s2"))
        self.assertEqual(document.partition.boundaries, (0, 6, 10))

    @settings(max_examples=500, deadline=None)
    @given(documents())
    def test_emit_then_parse_is_identity(self, document):
        emitted = emit_document(document)
        parsed = parse_document(emitted)
        self.assertEqual(parsed, document)
        self.assertEqual(emit_document(parsed), emitted)

    def test_schema_version_is_optional_on_input(self):
        payload = valid_payload()
        del payload["peakclips_schema"]
        self.assertEqual(parse_document(json.dumps(payload)).video_id, "v1")

    def test_version_key_is_written_and_renamed_keys_are_rejected(self):
        emitted = json.loads(emit_document(make_document("v1", [3, 4])))
        self.assertEqual(emitted["peakclips_schema"], "1")
        relevance = json.loads(emit_relevance(RelevanceBundle("v1", (make_annotation("v1", [5, 2]),))))
        self.assertEqual(relevance["peakclips_schema"], "1")

        payload = valid_payload()
        payload["schema_version"] = payload.pop("peakclips_schema")
        with self.assertRaises(AnnotationValidationError) as ctx:
            parse_document(json.dumps(payload))
        self.assertEqual((ctx.exception.first.path, ctx.exception.first.code), ("$.schema_version", "unknown_field"))

    def test_chapters_need_not_cover_every_scene(self):
        payload = valid_payload()
        payload["chapters"] = [{"chapter_id": "c1", "scene_ids": ["s2"], "summary": "leaving"}]
        self.assertEqual(len(parse_document(json.dumps(payload)).chapters), 1)


def mutate(change):
    def build():
        payload = valid_payload()
        change(payload)
        return json.dumps(payload).encode()
    return build


INVALID_DOCUMENTS = [
    ("malformed json", lambda: b'{"video_id": ', "$", "malformed_json"),
    ("not utf-8", lambda: b"\xff\xfe{}", "$", "encoding"),
    ("top level list", lambda: b"[]", "$", "invalid"),
    ("missing video id", mutate(lambda p: p.pop("video_id")), "$.video_id", "required"),
    ("zero frames", mutate(lambda p: p.update(frame_count=0)), "$.frame_count", "min_value"),
    ("frame count as text", mutate(lambda p: p.update(frame_count="10")), "$.frame_count", "invalid"),
    ("no scenes", mutate(lambda p: p.update(scenes=[], chapters=[])), "$.scenes", "empty"),
    ("overlap", mutate(lambda p: p["scenes"][1].update(start=4)), "$.scenes[1].start", "overlap"),
    ("gap between scenes", mutate(lambda p: p["scenes"][1].update(start=7)), "$.scenes[1].start", "gap"),
    ("first scene late", mutate(lambda p: p["scenes"][0].update(start=1)), "$.scenes[0].start", "gap"),
    ("tail uncovered", mutate(lambda p: p["scenes"][1].update(end=8)), "$.scenes[1].end", "gap"),
    ("past last frame", mutate(lambda p: p["scenes"][1].update(end=12)), "$.scenes[1].end", "out_of_range"),
    ("reversed span", mutate(lambda p: p["scenes"][1].update(start=9, end=6)), "$.scenes[1].end", "reversed_span"),
    ("dangling chapter reference", mutate(lambda p: p["chapters"][0].update(scene_ids=["s1", "s99"])),
     "$.chapters[0].scene_ids[1]", "dangling_reference"),
    ("scene in two chapters",
     mutate(lambda p: p["chapters"].append({"chapter_id": "c2", "scene_ids": ["s2"], "summary": "again"})),
     "$.chapters[1].scene_ids[0]", "multiple_chapters"),
    ("duplicate scene id", mutate(lambda p: p["scenes"][1].update(scene_id="s1")), "$.scenes[1].scene_id",
     "duplicate_id"),
    ("unknown field", mutate(lambda p: p.update(extra=1)), "$.extra", "unknown_field"),
    ("unsupported schema version", mutate(lambda p: p.update(peakclips_schema="2")), "$.peakclips_schema",
     "invalid_choice"),
    ("negative fps", mutate(lambda p: p.update(fps=-1)), "$.fps", "invalid_fps"),
    ("numeric scene id", mutate(lambda p: p["scenes"][0].update(scene_id=7)), "$.scenes[0].scene_id", "invalid"),
    ("empty chapter", mutate(lambda p: p["chapters"][0].update(scene_ids=[])), "$.chapters[0].scene_ids", "empty"),
    ("missing description", mutate(lambda p: p["scenes"][1].pop("description")), "$.scenes[1].description",
     "required"),
]


class InvalidDocumentTests(SimpleTestCase):

    def test_each_invalid_document_names_its_violation(self):
        self.assertGreaterEqual(len(INVALID_DOCUMENTS), 20)
        for name, build, path, code in INVALID_DOCUMENTS:
            with self.subTest(name):
                with self.assertRaises(AnnotationValidationError) as ctx:
                    parse_document(build())
                self.assertEqual((ctx.exception.first.path, ctx.exception.first.code), (path, code))

    def test_overlap_names_both_scenes(self):
        with self.assertRaises(AnnotationValidationError) as ctx:
            parse_document(mutate(lambda p: p["scenes"][1].update(start=4))())
        self.assertIn("'s1'", ctx.exception.first.message)
        self.assertIn("'s2'", ctx.exception.first.message)

    def test_every_violation_is_collected(self):
        def two_problems(payload):
            payload["scenes"][1]["start"] = 4
            payload["chapters"][0]["scene_ids"] = ["s99"]

        with self.assertRaises(AnnotationValidationError) as ctx:
            parse_document(mutate(two_problems)())
        self.assertEqual([v.code for v in ctx.exception.violations], ["overlap", "dangling_reference"])
        self.assertIn("(+1 more)", str(ctx.exception))


class RelevanceFileTests(SimpleTestCase):

    def setUp(self):
        self.document = make_document("v1", [6, 4])
        clip = KeyClip(ClipSpan(0, 5), Priority.P1, "scene s1")
        entries = (
            RelevanceEntry("s1", 5, "shows the answer", fused=4.95, priority=Priority.P1),
            RelevanceEntry("s2", 1, "unrelated", fused=1.2),
        )
        self.bundle = RelevanceBundle("v1", (
            RelevanceAnnotation("v1", "what is cooked?", entries, gold_answer="pasta", key_clips=(clip,)),
            RelevanceAnnotation("v1", "who leaves?", entries[1:]),
        ), input_hash="ab" * 32)

    def test_round_trip(self):
        parsed = parse_relevance(emit_relevance(self.bundle))
        self.assertEqual(parsed, self.bundle)
        self.assertIsInstance(parse_record(emit_relevance(self.bundle)), RelevanceBundle)
        self.assertIsInstance(parse_record(emit_document(self.document)), AnnotationDocument)

    def test_scores_must_be_in_range(self):
        payload = self.bundle.to_json()
        payload["annotations"][0]["entries"][0]["relevance_score"] = 6
        with self.assertRaises(AnnotationValidationError) as ctx:
            parse_relevance(json.dumps(payload))
        self.assertEqual(ctx.exception.first.path, "$.annotations[0].entries[0].relevance_score")
        self.assertEqual(ctx.exception.first.code, "max_value")

    def test_annotation_video_must_match_file(self):
        payload = self.bundle.to_json()
        payload["annotations"][1]["video_id"] = "v2"
        with self.assertRaises(AnnotationValidationError) as ctx:
            parse_relevance(json.dumps(payload))
        self.assertEqual(ctx.exception.first.code, "video_mismatch")

    def test_validate_against_document(self):
        validate_relevance_against(self.bundle, self.document)
        with self.assertRaises(AnnotationValidationError) as ctx:
            validate_relevance_against(self.bundle, make_document("v1", [10]))
        self.assertEqual(ctx.exception.first.path, "$.annotations[0].entries[1].scene_id")
        self.assertEqual(ctx.exception.first.code, "unknown_scene")


class JsonPayloadTests(SimpleTestCase):

    def test_fenced(self):
        self.assertEqual(json.loads(strip_json_payload('```json\n{"a":1}\n```')), {"a": 1})

    def test_leading_prose(self):
        self.assertEqual(json.loads(strip_json_payload('Here is the result: {"a":1}')), {"a": 1})

    def test_no_json(self):
        with self.assertRaises(NoJsonPayloadError):
            strip_json_payload("no json here")

    def test_skips_braces_that_are_not_json(self):
        self.assertEqual(load_json_payload('Use {curly} braces: {"a": {"b": [1, 2]}} trailing'), {"a": {"b": [1, 2]}})
        self.assertEqual(load_json_payload(b'ok {"a": 1}'), {"a": 1})
        with self.assertRaises(NoJsonPayloadError):
            strip_json_payload("{broken")

    def test_parse_clips_from_model_text(self):
        text = 'Sure.\n```json\n{"clips": [{"start": 3, "end": 9, "priority": "P1", "reason": "goal"}]}\n```'
        (clip,) = parse_clips(text)
        self.assertEqual((clip.span, clip.priority, clip.rationale), (ClipSpan(3, 9), Priority.P1, "goal"))
        self.assertEqual(len(parse_clips([{"start": 0, "end": 1}])), 1)
        self.assertEqual(len(parse_clips(b'[{"start": 0, "end": 1}, {"start": 4, "end": 5}]')), 2)


class PromptTests(SimpleTestCase):

    def setUp(self):
        self.document = make_document("v1", [6, 4])
        self.meta = {"video_id": "v1", "frame_count": 10, "fps": 2, "scenes": [s.to_json() for s in self.document.scenes]}

    def test_relevance_prompt(self):
        prompt = build_relevance_prompt("What is cooked?", "pasta", self.document.scenes)
        self.assertIn("relevance_score", prompt)
        self.assertIn("Video QA Relevance Analyst", prompt)
        self.assertIn("Question: What is cooked?", prompt)
        self.assertIn("pasta", prompt)
        for anchor in RELEVANCE_SCALE:
            self.assertIn(anchor, prompt)
        self.assertIn("5 (Directly Relevant)", prompt)
        self.assertIn("1 (Not Relevant)", prompt)
        self.assertIn("- s2 (frames 6-9): scene 2", prompt)

    def test_caption_prompt(self):
        prompt = build_caption_prompt(self.meta)
        self.assertIn("video_summary", prompt)
        self.assertIn("Professional Video Content Analyst", prompt)
        self.assertIn("- s1: frames 0-5 (00:00:00.000 to 00:00:02.500)", prompt)

    def test_prompts_are_deterministic(self):
        self.assertEqual(build_caption_prompt(self.meta), build_caption_prompt(copy.deepcopy(self.meta)))
        self.assertEqual(build_relevance_prompt("q", None, self.document.scenes),
                         build_relevance_prompt("q", None, self.document.scenes))

    def test_empty_query_is_rejected(self):
        for query in ("", "   ", None):
            with self.assertRaises(InvalidParameterError):
                build_relevance_prompt(query, None, self.document.scenes)
        with self.assertRaises(InvalidParameterError):
            build_clip_selection_prompt("", 256)

    def test_clip_selection_prompt(self):
        prompt = build_clip_selection_prompt("Where is the goal?", 256)
        for fragment in ("P1", "P2", "0 to 255", '"clips"', "Where is the goal?"):
            self.assertIn(fragment, prompt)
        with self.assertRaises(InvalidParameterError):
            build_clip_selection_prompt("q", 0)


class StatsTests(SimpleTestCase):

    def test_average_scenes(self):
        stats = compute_stats([make_document("a", [2, 2, 2]), make_document("b", [1, 1, 1, 1, 1])])
        self.assertEqual(stats.avg_scenes_per_video, 4.0)
        self.assertEqual(stats.scene_count, 8)

    def test_score_histogram(self):
        stats = compute_stats([make_document("a", [1, 1, 1, 1])], [make_annotation("a", [5, 5, 4, 1])])
        self.assertEqual(stats.score_histogram, {1: 1, 2: 0, 3: 0, 4: 1, 5: 2})
        self.assertEqual(stats.relevance_count, 4)
        self.assertEqual(sum(stats.score_histogram.values()), stats.relevance_count)
        self.assertEqual(stats.median_score, 4.5)

    def test_empty_corpus(self):
        stats = compute_stats([], [])
        self.assertEqual((stats.video_count, stats.avg_scenes_per_video, stats.avg_chapters_per_video), (0, 0.0, 0.0))
        self.assertIsNone(stats.median_score)
        self.assertIsNone(stats.duration_seconds)
        self.assertEqual(stats.to_json()["score_histogram"], {"1": 0, "2": 0, "3": 0, "4": 0, "5": 0})

    def test_buckets_durations_and_sources(self):
        docs = [
            make_document("a", [1] * 3, fps=1.0, source="youtube"),
            make_document("b", [1] * 20, fps=2.0, source="youtube"),
            make_document("c", [1] * 40, source="movies"),
        ]
        stats = compute_stats(docs, [make_annotation("b", [3, 4]), make_annotation("b", [2, 2]),
                                     make_annotation("zz", [1])])
        self.assertEqual(stats.scene_count_buckets, {"<5": 1, "5-15": 0, "16-25": 1, "26-35": 0, ">35": 1})
        self.assertEqual(stats.duration_seconds, {"videos": 2, "min": 3.0, "mean": 6.5, "median": 6.5, "max": 10.0})
        self.assertEqual(stats.query_count, 3)
        self.assertEqual(stats.by_source["youtube"]["relevance_count"], 4)
        self.assertEqual(stats.by_source["youtube"]["median_score"], 2.5)
        self.assertEqual(stats.by_source["movies"]["videos"], 1)
        self.assertEqual(stats.by_source["unknown"]["relevance_count"], 1)

    def test_order_invariance_and_associative_merge(self):
        rng = random.Random(11)
        docs = [make_document(f"v{i}", [rng.randint(1, 9) for _ in range(rng.randint(1, 40))],
                              fps=rng.choice([None, 1.0, 3.0, 29.97]), source=rng.choice([None, "x", "y"]))
                for i in range(60)]
        annotations = [make_annotation(f"v{rng.randint(0, 59)}", [rng.randint(1, 5) for _ in range(5)])
                       for _ in range(80)]
        expected = compute_stats(docs, annotations)
        for _ in range(5):
            rng.shuffle(docs)
            rng.shuffle(annotations)
            self.assertEqual(compute_stats(docs, annotations), expected)

        parts = []
        for chunk in range(3):
            accumulator = StatsAccumulator()
            for doc in docs[chunk::3]:
                accumulator.add(doc)
            for annotation in annotations[chunk::3]:
                accumulator.add(annotation)
            parts.append(accumulator)
        a, b, c = parts
        self.assertEqual(a.merge(b).merge(c).finish(), expected)
        self.assertEqual(a.merge(b.merge(c)).finish(), expected)
        self.assertEqual(c.merge(a).merge(b).finish(), expected)

    def test_histogram_median(self):
        self.assertEqual(histogram_median(Counter({3: 1})), 3.0)
        self.assertEqual(histogram_median(Counter({1: 1, 5: 2})), 5.0)
        self.assertIsNone(histogram_median(Counter()))
