import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict
from pathlib import Path
from typing import List, Sequence

from celery import shared_task
from django.core.management import call_command
from django.db import connection

from providers.client import ProviderConfig

from .models import AnnotationJob, JobStatus
from .pipeline import AnnotateOptions, ManifestEntry, VideoOutcome, annotate_entry

logger = logging.getLogger(__name__)


def ensure_ledger():
    """Creates the job ledger table on first use from the command line."""
    if AnnotationJob._meta.db_table not in connection.introspection.table_names():
        logger.info("Job ledger table missing, applying migrations")
        call_command("migrate", interactive=False, verbosity=0)


def record_outcome(outcome: VideoOutcome, out_dir: Path) -> AnnotationJob:
    defaults = {
        "status": outcome.status,
        "input_hash": outcome.input_hash,
        "provider_calls": outcome.provider_calls,
        "error": outcome.error,
    }
    # a skipped run keeps the document recorded by the run that produced it
    if outcome.status != JobStatus.SKIPPED:
        defaults["document"] = outcome.document
    job, _ = AnnotationJob.objects.update_or_create(
        video_id=outcome.video_id, output_dir=str(out_dir), defaults=defaults
    )
    return job


@shared_task
def annotate_video(entry, options, provider):
    """
    Celery task annotating one manifest video.

    Arguments are the JSON forms of ManifestEntry, AnnotateOptions and
    ProviderConfig. Provider and validation failures are stored on the
    job row with status FAILED; the task itself does not raise for them.

    Returns:
        dict: the VideoOutcome as JSON.
    """
    entry = ManifestEntry.from_json(entry)
    options = AnnotateOptions.from_json(options)
    logger.info(f"Celery Task: annotating {entry.video_id} into {options.out_dir}")

    AnnotationJob.objects.update_or_create(
        video_id=entry.video_id, output_dir=str(options.out_dir), defaults={"status": JobStatus.PENDING}
    )
    outcome = annotate_entry(entry, options, ProviderConfig(**provider))
    record_outcome(outcome, options.out_dir)
    return outcome.to_json()


def run_batch(entries: Sequence[ManifestEntry], options: AnnotateOptions, provider: ProviderConfig,
              jobs: int = 1, queue: bool = False) -> List[VideoOutcome]:
    """
    Annotate every entry. With `queue` the videos go to Celery workers;
    otherwise they run on a local thread pool of `jobs` workers and the
    ledger is written from this thread once they finish.
    """
    if queue:
        pending = [annotate_video.delay(e.to_json(), options.to_json(), asdict(provider)) for e in entries]
        logger.info(f"Queued {len(pending)} annotation tasks")
        return [VideoOutcome.from_json(result.get()) for result in pending]

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        outcomes = list(pool.map(lambda entry: annotate_entry(entry, options, provider), entries))
    for outcome in outcomes:
        record_outcome(outcome, options.out_dir)
    return outcomes
