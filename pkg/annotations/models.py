import uuid

from django.db import models
from django.utils.translation import gettext_lazy as _


class JobStatus(models.TextChoices):
    PENDING = 'pending', _('Pending')
    COMPLETE = 'complete', _('Complete')
    FAILED = 'failed', _('Failed')
    SKIPPED = 'skipped', _('Skipped')


class AnnotationJob(models.Model):
    """Ledger row for one video annotated into one output directory."""
    id = models.UUIDField(primary_key=True, default=uuid.uuid4, editable=False)
    video_id = models.CharField(max_length=255)
    output_dir = models.CharField(max_length=1024)
    input_hash = models.CharField(max_length=64, blank=True)
    status = models.CharField(
        max_length=20,
        choices=JobStatus.choices,
        default=JobStatus.PENDING,
    )
    provider_calls = models.PositiveIntegerField(default=0)
    error = models.TextField(blank=True)
    document = models.JSONField(blank=True, null=True)  # emitted annotation document on success
    created_at = models.DateTimeField(auto_now_add=True)
    updated_at = models.DateTimeField(auto_now=True)

    def __str__(self):
        return f"{self.video_id} -> {self.output_dir} ({self.get_status_display()})"

    class Meta:
        db_table = 'AnnotationJobs'
        verbose_name = 'Annotation Job'
        verbose_name_plural = 'Annotation Jobs'
        ordering = ['-updated_at']
        constraints = [
            models.UniqueConstraint(fields=['video_id', 'output_dir'], name='unique_job_per_video_and_output'),
        ]
