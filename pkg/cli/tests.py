import csv
import json
import math
import tempfile
from io import StringIO
from pathlib import Path
from unittest.mock import patch

from django.test import SimpleTestCase, TestCase

from annotations.test_pipeline import write_histograms, write_manifest
from providers.client import CompletionResponse
from providers.mock import MockProviderClient

from .config import ConfigError, GlobalConfig
from .output import format_table
from .runner import run

DOCUMENT = {
    "peakclips_schema": "1",
    "video_id": "v1",
    "frame_count": 10,
    "fps": 2.0,
    "scenes": [
        {"scene_id": "s1", "start": 0, "end": 5, "description": "a kitchen"},
        {"scene_id": "s2", "start": 6, "end": 9, "description": "a street"},
    ],
    "chapters": [{"chapter_id": "c1", "scene_ids": ["s1", "s2"], "summary": "cooking then leaving"}],
    "video_summary": "someone cooks and leaves",
}

OVERLAPPING = dict(DOCUMENT, scenes=[
    {"scene_id": "s1", "start": 0, "end": 5, "description": "a kitchen"},
    {"scene_id": "s2", "start": 4, "end": 9, "description": "a street"},
])


class CommandTestMixin:

    def setUp(self):
        tmp = tempfile.TemporaryDirectory()
        self.addCleanup(tmp.cleanup)
        self.root = Path(tmp.name)

    def write(self, name, payload):
        path = self.root / name
        path.write_text(payload if isinstance(payload, str) else json.dumps(payload), encoding="utf-8")
        return str(path)

    def call(self, *argv):
        stdout, stderr = StringIO(), StringIO()
        code = run([str(a) for a in argv], stdout=stdout, stderr=stderr)
        return code, stdout.getvalue(), stderr.getvalue()


class RunnerTests(CommandTestMixin, SimpleTestCase):

    def test_unknown_or_missing_subcommand_is_usage_error(self):
        code, _, stderr = self.call("frobnicate")
        self.assertEqual(code, 2)
        self.assertIn("unknown subcommand 'frobnicate'", stderr)
        self.assertIn("usage: scenepick", stderr)
        self.assertEqual(self.call()[0], 2)

    def test_bad_flags_are_usage_errors(self):
        clips = self.write("c.json", [])
        code, stdout, stderr = self.call("select", "--clips", clips, "--k", "0", "--total-frames", "256")
        self.assertEqual(code, 2)
        self.assertEqual(stdout, "")
        self.assertIn("positive integer", stderr)
        self.assertEqual(self.call("select", "--clips", clips, "--total-frames", "256")[0], 2)
        self.assertEqual(self.call("select", "--clips", clips, "--k", "8", "--total-frames", "256",
                                   "--strategy", "random")[0], 2)

    def test_unknown_config_key_is_usage_error(self):
        clips = self.write("c.json", [])
        config = self.write("config.json", {"strategy": "uniform", "colour": "blue"})
        code, _, stderr = self.call("select", "--clips", clips, "--k", 4, "--total-frames", 16, "--config", config)
        self.assertEqual(code, 2)
        self.assertIn("colour", stderr)


class SelectCommandTests(CommandTestMixin, SimpleTestCase):

    def setUp(self):
        super().setUp()
        self.clips = self.write("c.json", [{"start": 100, "end": 107, "priority": "P1", "reason": "needle"}])

    def test_focused_selection_covers_the_clip(self):
        code, stdout, _ = self.call("select", "--clips", self.clips, "--k", 8, "--total-frames", 256,
                                    "--strategy", "auto")
        self.assertEqual(code, 0)
        result = json.loads(stdout)
        self.assertEqual(result["strategy"], "focused")
        self.assertEqual(result["indices"], list(range(100, 108)))
        self.assertEqual(result["plan"][0]["quota"], 8)

    def test_large_budget_goes_hybrid_with_shares(self):
        code, stdout, _ = self.call("select", "--clips", self.clips, "--k", 32, "--total-frames", 256)
        self.assertEqual(code, 0)
        result = json.loads(stdout)
        self.assertEqual(result["strategy"], "hybrid")
        self.assertEqual(len(result["indices"]), 32)
        self.assertEqual(result["indices"], sorted(set(result["indices"])))
        self.assertEqual(result["shares"]["k_p"] + result["shares"]["k_b"], 32)

    def test_clips_outside_the_timeline_are_dropped(self):
        clips = self.write("outside.json", [{"start": -5, "end": -2, "priority": "P1"},
                                            {"start": 100, "end": 107, "priority": "P1"},
                                            {"start": 300, "end": 310, "priority": "P1"}])
        code, stdout, _ = self.call("select", "--clips", clips, "--k", 8, "--total-frames", 256,
                                    "--strategy", "focused")
        self.assertEqual(code, 0)
        self.assertEqual(json.loads(stdout)["indices"], list(range(100, 108)))

    def test_over_budget_is_domain_error(self):
        code, stdout, stderr = self.call("select", "--clips", self.clips, "--k", 300, "--total-frames", 256)
        self.assertEqual(code, 1)
        self.assertEqual(stdout, "")
        self.assertIn("exceeds", stderr)

    def test_config_file_and_flag_layering(self):
        config = self.write("config.toml", 'strategy = "uniform"\n')
        base = ("select", "--clips", self.clips, "--k", 8, "--total-frames", 256, "--config", config)
        self.assertEqual(json.loads(self.call(*base)[1])["strategy"], "uniform")
        self.assertEqual(json.loads(self.call(*base, "--strategy", "focused")[1])["strategy"], "focused")

    def test_timestamps_and_table_output(self):
        code, stdout, _ = self.call("select", "--clips", self.clips, "--k", 2, "--total-frames", 256,
                                    "--strategy", "uniform", "--fps", 2)
        self.assertEqual(code, 0)
        result = json.loads(stdout)
        self.assertEqual(len(result["timestamps"]), 2)
        self.assertTrue(all(len(t) == len("00:00:00.000") for t in result["timestamps"]))

        code, stdout, _ = self.call("select", "--clips", self.clips, "--k", 2, "--total-frames", 256,
                                    "--strategy", "uniform", "--fps", 2, "--format", "table")
        lines = stdout.splitlines()
        self.assertEqual(lines[0].split(), ["frame", "timestamp"])
        self.assertEqual(len(lines), 4)

    def test_out_writes_file(self):
        out = self.root / "nested" / "selection.json"
        code, stdout, _ = self.call("select", "--clips", self.clips, "--k", 8, "--total-frames", 256,
                                    "--out", out)
        self.assertEqual((code, stdout), (0, ""))
        self.assertEqual(len(json.loads(out.read_text())["indices"]), 8)


class PipelineCommandTests(CommandTestMixin, SimpleTestCase):

    def run_pipeline(self, tag):
        histograms = self.root / "video.csv"
        if not histograms.exists():
            write_histograms(histograms, seed=4)
        scenes = self.root / f"scenes-{tag}.json"
        self.assertEqual(self.call("segment", histograms, "--out", scenes)[0], 0)

        scene_ids = [s["scene_id"] for s in json.loads(scenes.read_text())["scenes"]]
        scores = self.write(f"scores-{tag}.txt", "Here you go:\n```json\n" + json.dumps({"entries": [
            {"scene_id": scene_id, "relevance_score": 5 if i % 2 else 2, "reason": f"scene {scene_id}"}
            for i, scene_id in enumerate(scene_ids)
        ]}) + "\n```")
        sims = self.root / "sims.csv"
        with sims.open("w", newline="") as handle:
            writer = csv.writer(handle)
            for index in range(96):
                writer.writerow([index, 1.0])

        fused = self.root / f"fused-{tag}.json"
        self.assertEqual(self.call("fuse-score", "--scenes", scenes, "--llm-scores", scores,
                                   "--similarities", sims, "--out", fused)[0], 0)
        code, stdout, _ = self.call("select", "--clips", fused, "--k", 8, "--total-frames", 96)
        self.assertEqual(code, 0)
        return scenes.read_text(), fused.read_text(), stdout

    def test_segment_fuse_select_is_deterministic(self):
        first = self.run_pipeline("a")
        self.assertEqual(first, self.run_pipeline("b"))

        partition = json.loads(first[0])
        self.assertEqual(partition["boundaries"][0], 0)
        self.assertEqual(partition["boundaries"][-1], 96)
        fused = json.loads(first[1])
        self.assertEqual(len(fused["scenes"]), len(partition["scenes"]))
        # llm 2 with perfect similarity fuses to 2.6; llm 5 fuses to 5.0
        self.assertEqual({s["fused"] for s in fused["scenes"]} - {2.6, 5.0}, set())
        selection = json.loads(first[2])
        self.assertEqual(len(selection["indices"]), 8)

    def test_segment_rejects_unexpected_bin_count(self):
        histograms = self.root / "video.csv"
        write_histograms(histograms, seed=1)
        code, _, stderr = self.call("segment", histograms, "--bins", 32)
        self.assertEqual(code, 1)
        self.assertIn("expected 32 bins", stderr)

    def test_segment_takes_bin_count_from_the_file(self):
        histograms = self.write("narrow.json", {"bins": 4, "frames": [[1, 0, 0, 0]] * 6 + [[0, 0, 0, 1]] * 6})
        code, stdout, _ = self.call("segment", histograms, "--min-scene-len", 2)
        self.assertEqual(code, 0)
        self.assertEqual(json.loads(stdout)["boundaries"], [0, 6, 12])

        config = self.write("bins.toml", "bins = 8\n")
        code, _, stderr = self.call("segment", histograms, "--config", config)
        self.assertEqual(code, 1)
        self.assertIn("expected 8 bins", stderr)

    def test_fuse_score_rejects_missing_scene(self):
        scenes = self.write("scenes.json", {"boundaries": [0, 4, 8]})
        scores = self.write("scores.json", {"entries": [{"scene_id": "s1", "relevance_score": 3, "reason": ""}]})
        sims = self.write("sims.json", [0.0] * 8)
        code, _, stderr = self.call("fuse-score", "--scenes", scenes, "--llm-scores", scores, "--similarities", sims)
        self.assertEqual(code, 1)
        self.assertIn("No score for s2", stderr)

    def test_frame_level_scores(self):
        scenes = self.write("scenes.json", {"boundaries": [0, 4, 8]})
        scores = self.write("scores.json", {"entries": [
            {"scene_id": "s1", "relevance_score": 5, "reason": "goal"},
            {"scene_id": "s2", "relevance_score": 1, "reason": "crowd"},
        ]})
        sims = self.write("sims.json", {"similarities": [1.0] * 8})
        code, stdout, _ = self.call("fuse-score", "--scenes", scenes, "--llm-scores", scores,
                                    "--similarities", sims, "--frame-level")
        self.assertEqual(code, 0)
        result = json.loads(stdout)
        self.assertEqual(len(result["scenes"][0]["frame_scores"]), 4)
        self.assertEqual(result["scenes"][0]["priority"], "P1")
        self.assertEqual(result["clips"], [{"start": 0, "end": 3, "priority": "P1", "reason": "goal"}])


class RewardCommandTests(CommandTestMixin, SimpleTestCase):

    def test_single_distribution(self):
        path = self.write("r.json", {"probs": [0.7, 0.1, 0.1, 0.1], "correct": 0, "tau": 1})
        code, stdout, _ = self.call("reward", path)
        self.assertEqual(code, 0)
        self.assertAlmostEqual(json.loads(stdout)["reward"], math.tanh(math.log(7)), places=9)

        # a flag beats the tau carried in the input
        hot = json.loads(self.call("reward", path, "--tau", 2)[1])["reward"]
        self.assertAlmostEqual(hot, math.tanh(math.log(7) / 2), places=9)

    def test_batch_lines(self):
        lines = [
            [{"probs": [0.7, 0.1, 0.1, 0.1], "correct": 0}, {"probs": [0.25, 0.25, 0.25, 0.25], "correct": 0}],
            {"group": [{"probs": [0.1, 0.9], "correct": 1}], "tau": 2},
        ]
        path = self.write("groups.jsonl", "\n".join(json.dumps(line) for line in lines) + "\n\n")
        code, stdout, _ = self.call("reward", path, "--batch")
        self.assertEqual(code, 0)
        first, second = [json.loads(line) for line in stdout.splitlines() if line]
        self.assertAlmostEqual(first["rewards"][1], 0.0, places=12)
        self.assertAlmostEqual(sum(first["advantages"]), 0.0, places=12)
        self.assertAlmostEqual(second["rewards"][0], math.tanh(math.log(9) / 2), places=9)
        self.assertEqual(second["advantages"], [0.0])

    def test_malformed_input(self):
        path = self.write("r.json", {"probs": [1.0], "correct": 0})
        self.assertEqual(self.call("reward", path)[0], 1)
        path = self.write("r2.json", {"probs": [0.5, 0.5], "correct": "A"})
        code, _, stderr = self.call("reward", path)
        self.assertEqual(code, 1)
        self.assertIn("'correct' must be an integer", stderr)


class ValidateAndStatsCommandTests(CommandTestMixin, SimpleTestCase):

    def test_valid_document(self):
        code, stdout, _ = self.call("validate", self.write("good.json", DOCUMENT))
        self.assertEqual(code, 0)
        self.assertEqual(json.loads(stdout), {"checked": 1, "invalid": 0, "records": []})

    def test_invalid_document_names_json_path(self):
        code, stdout, stderr = self.call("validate", self.write("bad.json", OVERLAPPING))
        self.assertEqual(code, 1)
        self.assertIn("$.scenes[1].start", stderr)
        self.assertIn("[overlap]", stderr)
        self.assertEqual(json.loads(stdout)["invalid"], 1)

    def test_all_reports_every_invalid_record(self):
        corpus = self.write("corpus.jsonl", "\n".join(
            json.dumps(record) for record in (DOCUMENT, OVERLAPPING, dict(DOCUMENT, frame_count=0))
        ))
        code, stdout, _ = self.call("validate", corpus)
        self.assertEqual(code, 1)
        self.assertEqual(json.loads(stdout)["checked"], 2)

        code, stdout, _ = self.call("validate", corpus, "--all")
        self.assertEqual(code, 1)
        report = json.loads(stdout)
        self.assertEqual((report["checked"], report["invalid"]), (3, 2))
        self.assertEqual([r["record"].rsplit(":", 1)[1] for r in report["records"]], ["2", "3"])

    def test_relevance_checked_against_its_document(self):
        corpus = self.root / "corpus"
        corpus.mkdir()
        (corpus / "v1.json").write_text(json.dumps(DOCUMENT), encoding="utf-8")
        relevance = {"peakclips_schema": "1", "video_id": "v1", "annotations": [{
            "video_id": "v1", "query": "where is the street?",
            "entries": [{"scene_id": "s2", "relevance_score": 5, "reason": "street"},
                        {"scene_id": "s99", "relevance_score": 3, "reason": "nowhere"}],
        }]}
        (corpus / "v1.relevance.json").write_text(json.dumps(relevance), encoding="utf-8")

        code, stdout, stderr = self.call("validate", corpus)
        self.assertEqual(code, 1)
        report = json.loads(stdout)
        self.assertEqual((report["checked"], report["invalid"]), (2, 1))
        self.assertTrue(report["records"][0]["record"].endswith("v1.relevance.json"))
        self.assertIn("$.annotations[0].entries[1].scene_id", stderr)
        self.assertIn("[unknown_scene]", stderr)

        del relevance["annotations"][0]["entries"][1]
        (corpus / "v1.relevance.json").write_text(json.dumps(relevance), encoding="utf-8")
        self.assertEqual(self.call("validate", corpus)[0], 0)

    def test_stats_json_and_table(self):
        path = self.write("good.json", DOCUMENT)
        code, stdout, _ = self.call("stats", path)
        self.assertEqual(code, 0)
        stats = json.loads(stdout)
        self.assertEqual((stats["video_count"], stats["scene_count"], stats["chapter_count"]), (1, 2, 1))
        self.assertEqual(stats["duration_seconds"]["mean"], 5.0)

        code, stdout, _ = self.call("stats", path, "--format", "table")
        self.assertEqual(code, 0)
        self.assertIn("videos", stdout.splitlines()[2])

    def test_stats_stops_on_invalid_record(self):
        code, _, stderr = self.call("stats", self.write("bad.json", OVERLAPPING))
        self.assertEqual(code, 1)
        self.assertIn("overlap", stderr)


class SimulateCommandTests(CommandTestMixin, SimpleTestCase):

    def test_csv_report(self):
        out = self.root / "report.csv"
        code, _, _ = self.call("simulate", "--strategies", "uniform,focused", "--k", "8", "--T", 256,
                               "--needle", 8, "--seeds", 5, "--out", out)
        self.assertEqual(code, 0)
        rows = list(csv.DictReader(out.open()))
        self.assertEqual(list(rows[0]), ["strategy", "k", "seed", "recall", "reward"])
        self.assertEqual(len(rows), 10)
        self.assertEqual({r["recall"] for r in rows if r["strategy"] == "focused"}, {"1.0"})

    def test_summary_json_and_table(self):
        code, stdout, _ = self.call("simulate", "--strategies", "focused,hybrid", "--k", "8,32", "--seeds", 3)
        self.assertEqual(code, 0)
        summary = json.loads(stdout)["summary"]
        self.assertEqual([(s["strategy"], s["k"]) for s in summary],
                         [("focused", 8), ("focused", 32), ("hybrid", 8), ("hybrid", 32)])

        code, stdout, _ = self.call("simulate", "--strategies", "focused", "--seeds", 2, "--format", "table")
        self.assertEqual(stdout.splitlines()[0].split(), ["strategy", "k", "seeds", "recall", "hit", "reward"])

    def test_budget_larger_than_video(self):
        code, _, stderr = self.call("simulate", "--k", "300", "--T", 256, "--seeds", 1)
        self.assertEqual(code, 1)
        self.assertIn("k=300", stderr)


class AnnotateCommandTests(CommandTestMixin, TestCase):

    def setUp(self):
        super().setUp()
        self.manifest = write_manifest(self.root, count=2)
        self.out = self.root / "out"

    def test_mock_annotation_validates_and_resumes(self):
        code, stdout, _ = self.call("annotate", self.manifest, "--out", self.out, "--endpoint", "mock:seed=3")
        self.assertEqual(code, 0)
        summary = json.loads(stdout)
        self.assertEqual((summary["videos"], summary["complete"], summary["failed"]), (2, 2, 0))

        code, stdout, _ = self.call("validate", self.out, "--all")
        self.assertEqual(code, 0)
        self.assertEqual(json.loads(stdout)["checked"], 4)

        code, stdout, _ = self.call("annotate", self.manifest, "--out", self.out, "--endpoint", "mock:seed=3")
        summary = json.loads(stdout)
        self.assertEqual((code, summary["skipped"], summary["provider_calls"]), (0, 2, 0))

        code, stdout, _ = self.call("annotate", self.manifest, "--out", self.out, "--endpoint", "mock:seed=3",
                                    "--force", "--jobs", 2)
        self.assertEqual((code, json.loads(stdout)["complete"]), (0, 2))

    def test_predict_clips_flag(self):
        code, stdout, _ = self.call("annotate", self.manifest, "--out", self.out, "--predict-clips")
        self.assertEqual(code, 0)
        self.assertEqual(json.loads(stdout)["provider_calls"], 13)
        relevance = json.loads((self.out / "vid1.relevance.json").read_text())
        self.assertTrue(all(a["predicted_clips"] for a in relevance["annotations"]))
        self.assertEqual(self.call("validate", self.out)[0], 0)

    def test_malformed_response_exits_nonzero_after_batch(self):
        original = MockProviderClient.complete

        def garbled(client, request):
            if request.metadata.get("video_id") == "vid1":
                return CompletionResponse(request.request_id, "sorry, no JSON today")
            return original(client, request)

        with patch.object(MockProviderClient, "complete", autospec=True, side_effect=garbled):
            code, stdout, stderr = self.call("annotate", self.manifest, "--out", self.out)
        self.assertEqual(code, 1)
        summary = json.loads(stdout)
        self.assertEqual((summary["complete"], summary["failed"]), (1, 1))
        self.assertIn("vid1: No JSON object", stderr)
        self.assertIn("1 of 2 videos failed", stderr)
        self.assertTrue((self.out / "vid0.json").exists())

    def test_bad_manifest(self):
        manifest = self.write("manifest.json", {"videos": []})
        code, _, stderr = self.call("annotate", manifest, "--out", self.out)
        self.assertEqual(code, 1)
        self.assertIn("$.videos", stderr)


class GlobalConfigTests(CommandTestMixin, SimpleTestCase):

    def test_defaults_come_from_settings(self):
        config = GlobalConfig.load()
        self.assertEqual(config.policy().threshold_lambda, 2.0)
        self.assertEqual(config.sampling().focused_max_k, 8)
        self.assertEqual(config.reward().temperature, 1.0)
        self.assertEqual(config["strategy"], "auto")
        self.assertTrue(config.provider().is_mock)

    def test_file_then_flags(self):
        path = self.write("config.toml", 'lambda = 3.5\nrmin = 0.25\nlog_level = "info"\n')
        config = GlobalConfig.load(path, {"rmin": 0.75, "alpha": None})
        self.assertEqual(config["lambda"], 3.5)
        self.assertEqual(config["rmin"], 0.75)
        self.assertEqual(config["alpha"], 4.0)
        self.assertEqual(config["log_level"], "INFO")

    def test_rejects_unknown_keys_and_bad_values(self):
        with self.assertRaisesMessage(ConfigError, "seeds"):
            GlobalConfig.load(self.write("a.json", {"seeds": 3}))
        with self.assertRaisesMessage(ConfigError, "'tolerance'"):
            GlobalConfig.load(self.write("b.json", {"tolerance": "wide"}))
        with self.assertRaisesMessage(ConfigError, "must hold a table"):
            GlobalConfig.load(self.write("c.json", [1, 2]))
        with self.assertRaises(ConfigError):
            GlobalConfig.load(self.write("d.toml", "lambda = "))

    def test_format_table(self):
        text = format_table(("name", "n"), [("alpha", 1), ("b", None)])
        self.assertEqual(text.splitlines(), ["name   n", "-----  -", "alpha  1", "b      -"])
