"""
Annotate Pipeline Module
Per-video annotation: segment the histograms, caption the scenes, score every
query against every scene, fuse with frame similarities and write the
document and relevance files.

Runs without the database so videos can be processed on worker threads;
the job ledger is written by annotations.tasks.
"""

import hashlib
import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from engine.errors import DimensionError, ScenePickError
from engine.relevance import DEFAULT_FUSION_LAMBDA, LlmSceneScore, SimilaritySeries, load_similarities, score_scenes
from engine.segmentation import SegmentationPolicy, ScenePartition, boundary_scores, load_histograms, segment
from engine.timeline import KeyClip, Timeline, normalize_clipset
from providers.client import CompletionRequest, ProviderClient, ProviderConfig, build_client

from .documents import (
    AnnotationDocument,
    RelevanceAnnotation,
    RelevanceBundle,
    RelevanceEntry,
    emit_document,
    emit_relevance,
    flatten_errors,
    load_json_bytes,
    validate_document_payload,
)
from .errors import AnnotationValidationError, Violation
from .models import JobStatus
from .payload import load_json_payload, parse_clips
from .prompts import (
    build_caption_prompt,
    build_clip_selection_prompt,
    build_relevance_prompt,
    caption_metadata,
    clip_metadata,
    relevance_metadata,
)
from .serializers import SCHEMA_VERSION, ManifestSerializer, ProviderCaptionSerializer, ProviderEntriesSerializer

logger = logging.getLogger(__name__)

HASH_CHUNK = 1 << 16


@dataclass(frozen=True)
class QuerySpec:
    query: str
    gold_answer: Optional[str] = None
    similarities: Optional[Path] = None

    def to_json(self) -> Dict:
        return {
            "query": self.query,
            "gold_answer": self.gold_answer,
            "similarities": str(self.similarities) if self.similarities else None,
        }

    @classmethod
    def from_json(cls, record: Dict) -> "QuerySpec":
        similarities = record.get("similarities")
        return cls(record["query"], record.get("gold_answer"), Path(similarities) if similarities else None)


@dataclass(frozen=True)
class ManifestEntry:
    video_id: str
    histograms: Path
    queries: Tuple[QuerySpec, ...] = ()
    frame_refs: Tuple[str, ...] = ()
    fps: Optional[float] = None
    source: Optional[str] = None

    def to_json(self) -> Dict:
        return {
            "video_id": self.video_id,
            "histograms": str(self.histograms),
            "queries": [q.to_json() for q in self.queries],
            "frame_refs": list(self.frame_refs),
            "fps": self.fps,
            "source": self.source,
        }

    @classmethod
    def from_json(cls, record: Dict) -> "ManifestEntry":
        return cls(
            video_id=record["video_id"],
            histograms=Path(record["histograms"]),
            queries=tuple(QuerySpec.from_json(q) for q in record.get("queries") or []),
            frame_refs=tuple(record.get("frame_refs") or ()),
            fps=record.get("fps"),
            source=record.get("source"),
        )


def load_manifest(path: Union[str, Path]) -> List[ManifestEntry]:
    """
    {"videos": [...]} or a bare list of videos. Relative histogram and
    similarity paths resolve against the manifest's directory.
    """
    path = Path(path)
    payload = load_json_bytes(path.read_bytes())
    if isinstance(payload, list):
        payload = {"videos": payload}
    serializer = ManifestSerializer(data=payload)
    if not serializer.is_valid():
        raise AnnotationValidationError(flatten_errors(serializer.errors))

    base = path.parent
    entries, seen, violations = [], set(), []
    for index, video in enumerate(serializer.validated_data["videos"]):
        if video["video_id"] in seen:
            violations.append(Violation(f"$.videos[{index}].video_id",
                                        f"Duplicate video_id {video['video_id']!r}", "duplicate_id"))
            continue
        seen.add(video["video_id"])
        queries = tuple(
            QuerySpec(q["query"], q.get("gold_answer"), base / q["similarities"] if q.get("similarities") else None)
            for q in video.get("queries", [])
        )
        entries.append(ManifestEntry(
            video_id=video["video_id"],
            histograms=base / video["histograms"],
            queries=queries,
            frame_refs=tuple(video.get("frame_refs", ())),
            fps=video.get("fps"),
            source=video.get("source"),
        ))
    if violations:
        raise AnnotationValidationError(violations)
    logger.info(f"Manifest {path}: {len(entries)} videos")
    return entries


@dataclass(frozen=True)
class AnnotateOptions:
    out_dir: Path
    policy: SegmentationPolicy = field(default_factory=SegmentationPolicy)
    fusion_lambda: float = DEFAULT_FUSION_LAMBDA
    metric: str = "l1"
    force: bool = False
    predict_clips: bool = False

    def to_json(self) -> Dict:
        return {
            "out_dir": str(self.out_dir),
            "threshold_lambda": self.policy.threshold_lambda,
            "min_scene_len": self.policy.min_scene_len,
            "fusion_lambda": self.fusion_lambda,
            "metric": self.metric,
            "force": self.force,
            "predict_clips": self.predict_clips,
        }

    @classmethod
    def from_json(cls, record: Dict) -> "AnnotateOptions":
        return cls(
            out_dir=Path(record["out_dir"]),
            policy=SegmentationPolicy(record["threshold_lambda"], record["min_scene_len"]),
            fusion_lambda=record["fusion_lambda"],
            metric=record["metric"],
            force=record["force"],
            predict_clips=record.get("predict_clips", False),
        )


@dataclass(frozen=True)
class VideoOutcome:
    video_id: str
    status: str
    input_hash: str = ""
    provider_calls: int = 0
    error: str = ""
    document: Optional[Dict] = None

    def to_json(self) -> Dict:
        return {
            "video_id": self.video_id,
            "status": self.status,
            "input_hash": self.input_hash,
            "provider_calls": self.provider_calls,
            "error": self.error,
            "document": self.document,
        }

    @classmethod
    def from_json(cls, record: Dict) -> "VideoOutcome":
        return cls(**record)


def output_paths(out_dir: Path, video_id: str) -> Tuple[Path, Path]:
    return out_dir / f"{video_id}.json", out_dir / f"{video_id}.relevance.json"


def _hash_file(digest, path: Path):
    with path.open("rb") as handle:
        for chunk in iter(lambda: handle.read(HASH_CHUNK), b""):
            digest.update(chunk)


def input_hash(entry: ManifestEntry, options: AnnotateOptions) -> str:
    """Content hash over every input that shapes the outputs."""
    digest = hashlib.sha256()
    described = entry.to_json()
    described.pop("histograms")
    for query in described["queries"]:
        query.pop("similarities")
    described["parameters"] = {key: value for key, value in options.to_json().items() if key not in ("out_dir", "force")}
    digest.update(json.dumps(described, sort_keys=True).encode("utf-8"))
    _hash_file(digest, entry.histograms)
    for query in entry.queries:
        if query.similarities:
            _hash_file(digest, query.similarities)
    return digest.hexdigest()


def _embedded_hash(path: Path) -> Optional[str]:
    try:
        payload = json.loads(path.read_bytes())
    except (OSError, ValueError):
        return None
    provenance = payload.get("provenance") if isinstance(payload, dict) else None
    return provenance.get("input_hash") if isinstance(provenance, dict) else None


def is_up_to_date(out_dir: Path, video_id: str, digest: str) -> bool:
    return all(_embedded_hash(path) == digest for path in output_paths(out_dir, video_id))


def caption_document(entry: ManifestEntry, partition: ScenePartition, client: ProviderClient,
                     digest: str) -> AnnotationDocument:
    spans = [
        {"scene_id": scene_id, "start": span.start, "end": span.end}
        for scene_id, span in zip(partition.scene_ids, partition.scenes)
    ]
    prompt = build_caption_prompt({
        "video_id": entry.video_id,
        "frame_count": partition.frame_count,
        "fps": entry.fps,
        "scenes": spans,
    })
    response = client.complete(CompletionRequest(prompt, metadata=caption_metadata(entry.video_id, spans)))
    caption = ProviderCaptionSerializer(data=load_json_payload(response.text))
    if not caption.is_valid():
        raise AnnotationValidationError(flatten_errors(caption.errors, "$caption"))

    descriptions = {s.get("scene_id"): s.get("description") for s in caption.validated_data["scenes"]}
    missing = [span["scene_id"] for span in spans if not isinstance(descriptions.get(span["scene_id"]), str)]
    if missing:
        raise AnnotationValidationError([
            Violation("$caption.scenes", f"Caption response has no description for {', '.join(missing)}",
                      "missing_description")
        ])

    payload = {
        "peakclips_schema": SCHEMA_VERSION,
        "video_id": entry.video_id,
        "frame_count": partition.frame_count,
        "scenes": [dict(span, description=descriptions[span["scene_id"]]) for span in spans],
        "chapters": [
            {key: chapter.get(key) for key in ("chapter_id", "scene_ids", "summary")}
            for chapter in caption.validated_data.get("chapters", [])
        ],
        "video_summary": caption.validated_data["video_summary"],
        "provenance": {"input_hash": digest},
    }
    if entry.fps is not None:
        payload["fps"] = entry.fps
    if entry.source is not None:
        payload["source"] = entry.source
    return validate_document_payload(payload)


def _frame_refs(entry: ManifestEntry, frame_count: int) -> List[str]:
    if not entry.frame_refs:
        return [f"{entry.video_id}/frame_{index:05d}" for index in range(frame_count)]
    if len(entry.frame_refs) != frame_count:
        raise DimensionError(f"{entry.video_id}: {len(entry.frame_refs)} frame refs for {frame_count} frames")
    return list(entry.frame_refs)


def parse_llm_scores(text: Union[str, bytes], scene_ids: List[str], path: str = "$") -> List[LlmSceneScore]:
    scored = ProviderEntriesSerializer(data=load_json_payload(text))
    if not scored.is_valid():
        raise AnnotationValidationError(flatten_errors(scored.errors, path))
    by_scene = {}
    violations = []
    for position, entry in enumerate(scored.validated_data["entries"]):
        if entry["scene_id"] not in scene_ids:
            violations.append(Violation(f"{path}.entries[{position}].scene_id",
                                        f"Score for unknown scene {entry['scene_id']!r}", "unknown_scene"))
        by_scene[entry["scene_id"]] = entry
    missing = [scene_id for scene_id in scene_ids if scene_id not in by_scene]
    if missing:
        violations.append(Violation(f"{path}.entries", f"No score for {', '.join(missing)}", "missing_score"))
    if violations:
        raise AnnotationValidationError(violations)
    return [
        LlmSceneScore(scene_id, by_scene[scene_id]["relevance_score"], by_scene[scene_id]["reason"])
        for scene_id in scene_ids
    ]


def predict_clips(query: str, frame_count: int, client: ProviderClient) -> Tuple[KeyClip, ...]:
    """Ask the provider for P1/P2 evidence clips, normalized to the video's frame grid."""
    response = client.complete(
        CompletionRequest(build_clip_selection_prompt(query, frame_count), metadata=clip_metadata(query, frame_count))
    )
    return tuple(normalize_clipset(parse_clips(response.text), Timeline(frame_count)))


def score_query(entry: ManifestEntry, document: AnnotationDocument, spec: QuerySpec, client: ProviderClient,
                fusion_lambda: float, index: int = 0, with_predictions: bool = False) -> RelevanceAnnotation:
    partition = document.partition
    prompt = build_relevance_prompt(spec.query, spec.gold_answer, document.scenes)
    response = client.complete(
        CompletionRequest(prompt, metadata=relevance_metadata(spec.query, document.scene_ids))
    )
    llm_scores = parse_llm_scores(response.text, document.scene_ids, f"$relevance[{index}]")

    if spec.similarities:
        sims = load_similarities(spec.similarities, partition.frame_count)
    else:
        sims = SimilaritySeries(client.similarity_batch(spec.query, _frame_refs(entry, partition.frame_count)))

    records, clips = score_scenes(partition, llm_scores, sims, fusion_lambda)
    entries = tuple(
        RelevanceEntry(
            scene_id=llm.scene_id,
            relevance_score=llm.score,
            reason=llm.reason,
            fused=round(record.fused.value, 6),
            priority=record.priority,
        )
        for llm, record in zip(llm_scores, records)
    )
    predicted = predict_clips(spec.query, partition.frame_count, client) if with_predictions else ()
    return RelevanceAnnotation(entry.video_id, spec.query, entries, spec.gold_answer, tuple(clips), predicted)


def _write_atomic(path: Path, data: bytes):
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def annotate_entry(entry: ManifestEntry, options: AnnotateOptions, provider: ProviderConfig) -> VideoOutcome:
    """
    Annotate one video. Failures are returned as a failed outcome, never
    raised, so a batch keeps going.
    """
    digest, calls = "", 0
    try:
        digest = input_hash(entry, options)
        if not options.force and is_up_to_date(options.out_dir, entry.video_id, digest):
            logger.info(f"{entry.video_id}: outputs are current, skipping")
            return VideoOutcome(entry.video_id, JobStatus.SKIPPED.value, digest)

        histograms = load_histograms(entry.histograms)
        partition = segment(boundary_scores(histograms, options.metric), options.policy)
        logger.info(f"{entry.video_id}: {len(partition)} scenes over {partition.frame_count} frames")

        client = build_client(provider)
        try:
            document = caption_document(entry, partition, client, digest)
            annotations = tuple(
                score_query(entry, document, spec, client, options.fusion_lambda, index, options.predict_clips)
                for index, spec in enumerate(entry.queries)
            )
        finally:
            calls = client.call_count
            client.close()

        options.out_dir.mkdir(parents=True, exist_ok=True)
        document_path, relevance_path = output_paths(options.out_dir, entry.video_id)
        _write_atomic(relevance_path, emit_relevance(RelevanceBundle(entry.video_id, annotations, digest)))
        _write_atomic(document_path, emit_document(document))
    except (ScenePickError, OSError, ValueError) as exc:
        logger.error(f"{entry.video_id}: annotation failed: {exc}")
        return VideoOutcome(entry.video_id, JobStatus.FAILED.value, digest, calls, str(exc))
    except Exception as exc:
        logger.exception(f"{entry.video_id}: unexpected error during annotation")
        return VideoOutcome(entry.video_id, JobStatus.FAILED.value, digest, calls, f"{type(exc).__name__}: {exc}")

    logger.info(f"{entry.video_id}: annotated with {calls} provider calls")
    return VideoOutcome(entry.video_id, JobStatus.COMPLETE.value, digest, calls, document=document.to_json())
