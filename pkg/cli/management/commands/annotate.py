from pathlib import Path

from django.core.management.base import CommandError

from annotations.models import JobStatus
from annotations.pipeline import AnnotateOptions, load_manifest
from annotations.tasks import ensure_ledger, run_batch
from engine.segmentation import METRICS

from cli.base import DOMAIN_ERROR, ScenePickCommand, non_negative_int, positive_int


class Command(ScenePickCommand):
    help = "Segment, caption and score every video of a manifest through the configured provider."
    result_file = False

    def add_command_arguments(self, parser):
        parser.add_argument("manifest", help='JSON {"videos": [...]} naming histogram files and queries')
        parser.add_argument("--out", dest="out_dir", required=True, help="Directory for document files")
        parser.add_argument("--force", action="store_true", help="Redo videos whose outputs are current")
        parser.add_argument("--predict-clips", dest="predict_clips", action="store_true",
                            help="Also ask the provider for P1/P2 evidence clips per query")
        parser.add_argument("--jobs", type=positive_int, help="Videos annotated in parallel")
        parser.add_argument("--queue", action="store_true", help="Send videos to Celery workers")
        parser.add_argument("--lambda", dest="lambda", type=float)
        parser.add_argument("--min-scene-len", dest="min_scene_len", type=positive_int)
        parser.add_argument("--metric", choices=sorted(METRICS), default="l1")
        parser.add_argument("--fusion-lambda", dest="fusion_lambda", type=float)
        parser.add_argument("--endpoint", help='Provider base URL, or "mock:" / "mock:seed=N"')
        parser.add_argument("--credential-env", dest="credential_env",
                            help="Environment variable holding the provider token")
        parser.add_argument("--timeout", type=float)
        parser.add_argument("--max-retries", dest="max_retries", type=non_negative_int)
        parser.add_argument("--max-concurrent-requests", dest="max_concurrent_requests", type=positive_int)

    def run(self, manifest, out_dir, force, queue, metric, predict_clips, **options):
        ensure_ledger()
        entries = load_manifest(manifest)
        annotate_options = AnnotateOptions(
            out_dir=Path(out_dir),
            policy=self.config.policy(),
            fusion_lambda=self.config["fusion_lambda"],
            metric=metric,
            force=force,
            predict_clips=predict_clips,
        )
        outcomes = run_batch(entries, annotate_options, self.config.provider(),
                             jobs=self.config["jobs"], queue=queue)

        counts = {status.value: 0 for status in JobStatus}
        for outcome in outcomes:
            counts[outcome.status] += 1
            if outcome.status == JobStatus.FAILED:
                self.stderr.write(f"{outcome.video_id}: {outcome.error}")
        summary = {
            "videos": len(outcomes),
            **{status: counts[status] for status in ("complete", "skipped", "failed")},
            "provider_calls": sum(o.provider_calls for o in outcomes),
            "outcomes": [
                {"video_id": o.video_id, "status": o.status, "provider_calls": o.provider_calls, "error": o.error}
                for o in outcomes
            ],
        }
        self.emit(summary)
        if counts["failed"]:
            raise CommandError(f"{counts['failed']} of {len(outcomes)} videos failed", returncode=DOMAIN_ERROR)
        return None

    def table(self, payload):
        return ("video", "status", "calls", "error"), [
            (o["video_id"], o["status"], o["provider_calls"], o["error"] or None) for o in payload["outcomes"]
        ]
