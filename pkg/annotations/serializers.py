"""
Strict JSON shapes for annotation documents, relevance files and annotate
manifests. Cross-field rules (tiling, chapter references) live in
documents.py; these serializers only check field presence and types.
"""

from collections.abc import Mapping

from rest_framework import serializers
from rest_framework.exceptions import ErrorDetail

SCHEMA_VERSION = "1"


class StrictCharField(serializers.CharField):
    """No coercion of numbers to text, no whitespace trimming."""

    def __init__(self, **kwargs):
        kwargs.setdefault("trim_whitespace", False)
        super().__init__(**kwargs)

    def to_internal_value(self, data):
        if not isinstance(data, str):
            self.fail("invalid")
        return super().to_internal_value(data)


class StrictIntegerField(serializers.IntegerField):
    """Rejects strings, floats and booleans."""

    def to_internal_value(self, data):
        if isinstance(data, bool) or not isinstance(data, int):
            self.fail("invalid")
        return super().to_internal_value(data)


class ClosedSerializer(serializers.Serializer):
    """Unknown keys are errors rather than silently dropped."""

    def to_internal_value(self, data):
        if isinstance(data, Mapping):
            unknown = sorted(set(data) - set(self.fields))
            if unknown:
                raise serializers.ValidationError(
                    {key: ErrorDetail("Unknown field.", code="unknown_field") for key in unknown}
                )
        return super().to_internal_value(data)


class SceneSerializer(ClosedSerializer):
    scene_id = StrictCharField(max_length=128)
    start = StrictIntegerField(min_value=0)
    end = StrictIntegerField(min_value=0)
    description = StrictCharField(allow_blank=True)

    def validate(self, attrs):
        if attrs["end"] < attrs["start"]:
            raise serializers.ValidationError(
                {"end": ErrorDetail(f"Scene ends at {attrs['end']} before it starts at {attrs['start']}.",
                                    code="reversed_span")}
            )
        return attrs


class ChapterSerializer(ClosedSerializer):
    chapter_id = StrictCharField(max_length=128)
    scene_ids = serializers.ListField(child=StrictCharField(max_length=128), allow_empty=False)
    summary = StrictCharField(allow_blank=True)


class ProvenanceSerializer(ClosedSerializer):
    input_hash = StrictCharField(max_length=128)


class AnnotationDocumentSerializer(ClosedSerializer):
    peakclips_schema = serializers.ChoiceField(choices=[SCHEMA_VERSION], required=False)
    video_id = StrictCharField(max_length=255)
    frame_count = StrictIntegerField(min_value=1)
    fps = serializers.FloatField(required=False, allow_null=True)
    source = StrictCharField(required=False, allow_null=True, max_length=255)
    scenes = SceneSerializer(many=True, allow_empty=False)
    chapters = ChapterSerializer(many=True, required=False)
    video_summary = StrictCharField(allow_blank=True)
    provenance = ProvenanceSerializer(required=False)

    def validate_fps(self, value):
        if value is not None and not value > 0:
            raise serializers.ValidationError("fps must be positive.", code="invalid_fps")
        return value


class RelevanceEntrySerializer(ClosedSerializer):
    scene_id = StrictCharField(max_length=128)
    relevance_score = StrictIntegerField(min_value=1, max_value=5)
    reason = StrictCharField(allow_blank=True)
    fused = serializers.FloatField(required=False, allow_null=True)
    priority = serializers.ChoiceField(choices=["P1", "P2"], required=False, allow_null=True)


class ClipRecordSerializer(ClosedSerializer):
    start = StrictIntegerField(min_value=0)
    end = StrictIntegerField(min_value=0)
    priority = serializers.ChoiceField(choices=["P1", "P2"])
    reason = StrictCharField(allow_blank=True, required=False, default="")

    def validate(self, attrs):
        if attrs["end"] < attrs["start"]:
            raise serializers.ValidationError(
                {"end": ErrorDetail("Clip ends before it starts.", code="reversed_span")}
            )
        return attrs


class RelevanceAnnotationSerializer(ClosedSerializer):
    video_id = StrictCharField(max_length=255)
    query = StrictCharField()
    gold_answer = StrictCharField(required=False, allow_null=True, allow_blank=True)
    entries = RelevanceEntrySerializer(many=True)
    key_clips = ClipRecordSerializer(many=True, required=False)
    predicted_clips = ClipRecordSerializer(many=True, required=False)

    def validate_query(self, value):
        if not value.strip():
            raise serializers.ValidationError("Query must not be blank.", code="blank")
        return value


class RelevanceFileSerializer(ClosedSerializer):
    peakclips_schema = serializers.ChoiceField(choices=[SCHEMA_VERSION], required=False)
    video_id = StrictCharField(max_length=255)
    annotations = RelevanceAnnotationSerializer(many=True)
    provenance = ProvenanceSerializer(required=False)


class ProviderEntriesSerializer(serializers.Serializer):
    """Scores as a provider returns them; extra top-level keys are tolerated."""
    entries = RelevanceEntrySerializer(many=True, allow_empty=False)


class ProviderCaptionSerializer(serializers.Serializer):
    scenes = serializers.ListField(child=serializers.DictField(), allow_empty=False)
    chapters = serializers.ListField(child=serializers.DictField(), required=False)
    video_summary = StrictCharField(allow_blank=True)


class ManifestQuerySerializer(ClosedSerializer):
    query = StrictCharField()
    gold_answer = StrictCharField(required=False, allow_null=True, allow_blank=True)
    similarities = StrictCharField(required=False, allow_null=True)


class ManifestVideoSerializer(ClosedSerializer):
    video_id = StrictCharField(max_length=255)
    histograms = StrictCharField()
    frame_refs = serializers.ListField(child=StrictCharField(), required=False)
    fps = serializers.FloatField(required=False, allow_null=True, min_value=1e-9)
    source = StrictCharField(required=False, allow_null=True)
    queries = ManifestQuerySerializer(many=True, required=False)


class ManifestSerializer(ClosedSerializer):
    videos = ManifestVideoSerializer(many=True, allow_empty=False)
