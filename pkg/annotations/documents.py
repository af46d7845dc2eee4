"""
Annotation Documents Module
Scene/chapter/summary documents and scene-query relevance files: parsing,
validation with JSON-path diagnostics, and emission.

Shape and types are checked by the DRF serializers; the rules that span
several fields (scenes tile the timeline, chapters reference real scenes)
are checked here. Every violation is collected, the first is the headline.
"""

import json
import logging
from collections.abc import Mapping
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, List, Optional, Tuple, Union

from rest_framework.settings import api_settings

from engine.segmentation import ScenePartition
from engine.timeline import ClipSpan, KeyClip, Priority, Timeline

from .errors import AnnotationValidationError, Violation
from .serializers import SCHEMA_VERSION, AnnotationDocumentSerializer, RelevanceFileSerializer

logger = logging.getLogger(__name__)

CORPUS_SUFFIXES = (".json", ".jsonl")


@dataclass(frozen=True)
class Scene:
    scene_id: str
    span: ClipSpan
    description: str

    def to_json(self) -> Dict:
        return {
            "scene_id": self.scene_id,
            "start": self.span.start,
            "end": self.span.end,
            "description": self.description,
        }


@dataclass(frozen=True)
class Chapter:
    chapter_id: str
    scene_ids: Tuple[str, ...]
    summary: str

    def to_json(self) -> Dict:
        return {"chapter_id": self.chapter_id, "scene_ids": list(self.scene_ids), "summary": self.summary}


@dataclass(frozen=True)
class AnnotationDocument:
    video_id: str
    frame_count: int
    scenes: Tuple[Scene, ...]
    chapters: Tuple[Chapter, ...]
    video_summary: str
    fps: Optional[float] = None
    source: Optional[str] = None
    input_hash: Optional[str] = None

    @property
    def timeline(self) -> Timeline:
        return Timeline(self.frame_count, Fraction(str(self.fps)) if self.fps else None)

    @property
    def partition(self) -> ScenePartition:
        return ScenePartition(tuple([0] + [scene.span.end + 1 for scene in self.scenes]))

    @property
    def scene_ids(self) -> List[str]:
        return [scene.scene_id for scene in self.scenes]

    @property
    def duration_seconds(self) -> Optional[float]:
        if not self.fps:
            return None
        return self.frame_count / self.fps

    def to_json(self) -> Dict:
        payload: Dict[str, Any] = {
            "peakclips_schema": SCHEMA_VERSION,
            "video_id": self.video_id,
            "frame_count": self.frame_count,
        }
        if self.fps is not None:
            payload["fps"] = self.fps
        if self.source is not None:
            payload["source"] = self.source
        payload["scenes"] = [scene.to_json() for scene in self.scenes]
        payload["chapters"] = [chapter.to_json() for chapter in self.chapters]
        payload["video_summary"] = self.video_summary
        if self.input_hash is not None:
            payload["provenance"] = {"input_hash": self.input_hash}
        return payload


@dataclass(frozen=True)
class RelevanceEntry:
    scene_id: str
    relevance_score: int
    reason: str
    fused: Optional[float] = None
    priority: Optional[Priority] = None

    def to_json(self) -> Dict:
        record = {"scene_id": self.scene_id, "relevance_score": self.relevance_score, "reason": self.reason}
        if self.fused is not None:
            record["fused"] = self.fused
        if self.priority is not None:
            record["priority"] = self.priority.value
        return record


@dataclass(frozen=True)
class RelevanceAnnotation:
    video_id: str
    query: str
    entries: Tuple[RelevanceEntry, ...]
    gold_answer: Optional[str] = None
    key_clips: Tuple[KeyClip, ...] = ()
    predicted_clips: Tuple[KeyClip, ...] = ()

    def to_json(self) -> Dict:
        record = {
            "video_id": self.video_id,
            "query": self.query,
            "gold_answer": self.gold_answer,
            "entries": [entry.to_json() for entry in self.entries],
            "key_clips": [clip.to_json() for clip in self.key_clips],
        }
        if self.predicted_clips:
            record["predicted_clips"] = [clip.to_json() for clip in self.predicted_clips]
        return record


@dataclass(frozen=True)
class RelevanceBundle:
    """Every query annotated for one video."""
    video_id: str
    annotations: Tuple[RelevanceAnnotation, ...]
    input_hash: Optional[str] = None

    def to_json(self) -> Dict:
        payload: Dict[str, Any] = {
            "peakclips_schema": SCHEMA_VERSION,
            "video_id": self.video_id,
            "annotations": [annotation.to_json() for annotation in self.annotations],
        }
        if self.input_hash is not None:
            payload["provenance"] = {"input_hash": self.input_hash}
        return payload


def flatten_errors(detail: Any, path: str = "$") -> List[Violation]:
    """DRF error detail (nested dicts and lists of ErrorDetail) to path-addressed violations."""
    violations: List[Violation] = []
    if isinstance(detail, Mapping):
        for key, value in detail.items():
            if key == api_settings.NON_FIELD_ERRORS_KEY:
                child = path
            elif isinstance(key, int):
                child = f"{path}[{key}]"
            else:
                child = f"{path}.{key}"
            violations.extend(flatten_errors(value, child))
    elif isinstance(detail, list):
        if all(isinstance(item, str) for item in detail):
            for item in detail:
                violations.append(Violation(path, str(item), getattr(item, "code", None) or "invalid"))
        else:
            for index, item in enumerate(detail):
                violations.extend(flatten_errors(item, f"{path}[{index}]"))
    else:
        violations.append(Violation(path, str(detail), getattr(detail, "code", None) or "invalid"))
    return violations


def load_json_bytes(data: Union[bytes, str]) -> Any:
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise AnnotationValidationError([Violation("$", f"Input is not UTF-8: {exc.reason}", "encoding")])
    try:
        return json.loads(data)
    except json.JSONDecodeError as exc:
        raise AnnotationValidationError(
            [Violation("$", f"Malformed JSON: {exc.msg} at line {exc.lineno} column {exc.colno}", "malformed_json")]
        )


def _scene_violations(frame_count: int, scenes: List[Dict]) -> List[Violation]:
    violations = []
    first_seen: Dict[str, int] = {}
    for index, scene in enumerate(scenes):
        scene_id = scene["scene_id"]
        if scene_id in first_seen:
            violations.append(Violation(
                f"$.scenes[{index}].scene_id",
                f"Duplicate scene_id {scene_id!r} (first at $.scenes[{first_seen[scene_id]}])",
                "duplicate_id",
            ))
        else:
            first_seen[scene_id] = index

    covered_to = 0
    for index, scene in enumerate(scenes):
        start, end, scene_id = scene["start"], scene["end"], scene["scene_id"]
        if start < covered_to:
            previous = scenes[index - 1]
            violations.append(Violation(
                f"$.scenes[{index}].start",
                f"Scene {scene_id!r} [{start}, {end}] overlaps scene {previous['scene_id']!r} "
                f"[{previous['start']}, {previous['end']}]",
                "overlap",
            ))
        elif start > covered_to:
            violations.append(Violation(
                f"$.scenes[{index}].start",
                f"Frames {covered_to}..{start - 1} before scene {scene_id!r} belong to no scene",
                "gap",
            ))
        if end > frame_count - 1:
            violations.append(Violation(
                f"$.scenes[{index}].end",
                f"Scene {scene_id!r} ends at {end}, past the last frame {frame_count - 1}",
                "out_of_range",
            ))
        covered_to = max(covered_to, end + 1)

    if covered_to < frame_count:
        violations.append(Violation(
            f"$.scenes[{len(scenes) - 1}].end",
            f"Frames {covered_to}..{frame_count - 1} after the last scene belong to no scene",
            "gap",
        ))
    return violations


def _chapter_violations(scenes: List[Dict], chapters: List[Dict]) -> List[Violation]:
    violations = []
    scene_ids = {scene["scene_id"] for scene in scenes}
    chapter_ids: Dict[str, int] = {}
    owner: Dict[str, str] = {}
    for index, chapter in enumerate(chapters):
        chapter_id = chapter["chapter_id"]
        if chapter_id in chapter_ids:
            violations.append(Violation(
                f"$.chapters[{index}].chapter_id",
                f"Duplicate chapter_id {chapter_id!r} (first at $.chapters[{chapter_ids[chapter_id]}])",
                "duplicate_id",
            ))
        else:
            chapter_ids[chapter_id] = index
        for position, scene_id in enumerate(chapter["scene_ids"]):
            path = f"$.chapters[{index}].scene_ids[{position}]"
            if scene_id not in scene_ids:
                violations.append(Violation(
                    path, f"Chapter {chapter_id!r} references unknown scene {scene_id!r}", "dangling_reference"
                ))
            elif scene_id in owner:
                violations.append(Violation(
                    path, f"Scene {scene_id!r} already belongs to chapter {owner[scene_id]!r}", "multiple_chapters"
                ))
            else:
                owner[scene_id] = chapter_id
    return violations


def validate_document_payload(payload: Any) -> AnnotationDocument:
    serializer = AnnotationDocumentSerializer(data=payload)
    if not serializer.is_valid():
        raise AnnotationValidationError(flatten_errors(serializer.errors))
    data = serializer.validated_data
    scenes = data["scenes"]
    chapters = data.get("chapters", [])

    violations = _scene_violations(data["frame_count"], scenes) + _chapter_violations(scenes, chapters)
    if violations:
        raise AnnotationValidationError(violations)

    provenance = data.get("provenance") or {}
    return AnnotationDocument(
        video_id=data["video_id"],
        frame_count=data["frame_count"],
        scenes=tuple(Scene(s["scene_id"], ClipSpan(s["start"], s["end"]), s["description"]) for s in scenes),
        chapters=tuple(Chapter(c["chapter_id"], tuple(c["scene_ids"]), c["summary"]) for c in chapters),
        video_summary=data["video_summary"],
        fps=data.get("fps"),
        source=data.get("source"),
        input_hash=provenance.get("input_hash"),
    )


def parse_document(data: Union[bytes, str]) -> AnnotationDocument:
    return validate_document_payload(load_json_bytes(data))


def emit_document(document: AnnotationDocument) -> bytes:
    return (json.dumps(document.to_json(), indent=2, ensure_ascii=False) + "\n").encode("utf-8")


def _relevance_violations(data: Dict) -> List[Violation]:
    violations = []
    for index, annotation in enumerate(data["annotations"]):
        if annotation["video_id"] != data["video_id"]:
            violations.append(Violation(
                f"$.annotations[{index}].video_id",
                f"Annotation is for video {annotation['video_id']!r}, file is for {data['video_id']!r}",
                "video_mismatch",
            ))
        seen = set()
        for position, entry in enumerate(annotation["entries"]):
            if entry["scene_id"] in seen:
                violations.append(Violation(
                    f"$.annotations[{index}].entries[{position}].scene_id",
                    f"Scene {entry['scene_id']!r} is scored twice for query {annotation['query']!r}",
                    "duplicate_id",
                ))
            seen.add(entry["scene_id"])
    return violations


def _clip_records(records) -> Tuple[KeyClip, ...]:
    return tuple(
        KeyClip(ClipSpan(c["start"], c["end"]), Priority.parse(c["priority"]), c.get("reason", ""))
        for c in records
    )


def validate_relevance_payload(payload: Any) -> RelevanceBundle:
    serializer = RelevanceFileSerializer(data=payload)
    if not serializer.is_valid():
        raise AnnotationValidationError(flatten_errors(serializer.errors))
    data = serializer.validated_data
    violations = _relevance_violations(data)
    if violations:
        raise AnnotationValidationError(violations)

    annotations = []
    for annotation in data["annotations"]:
        entries = tuple(
            RelevanceEntry(
                scene_id=e["scene_id"],
                relevance_score=e["relevance_score"],
                reason=e["reason"],
                fused=e.get("fused"),
                priority=Priority.parse(e["priority"]) if e.get("priority") else None,
            )
            for e in annotation["entries"]
        )
        clips = _clip_records(annotation.get("key_clips", []))
        annotations.append(RelevanceAnnotation(
            video_id=annotation["video_id"],
            query=annotation["query"],
            entries=entries,
            gold_answer=annotation.get("gold_answer"),
            key_clips=clips,
            predicted_clips=_clip_records(annotation.get("predicted_clips", [])),
        ))
    provenance = data.get("provenance") or {}
    return RelevanceBundle(data["video_id"], tuple(annotations), provenance.get("input_hash"))


def parse_relevance(data: Union[bytes, str]) -> RelevanceBundle:
    return validate_relevance_payload(load_json_bytes(data))


def emit_relevance(bundle: RelevanceBundle) -> bytes:
    return (json.dumps(bundle.to_json(), indent=2, ensure_ascii=False) + "\n").encode("utf-8")


def validate_relevance_against(bundle: RelevanceBundle, document: AnnotationDocument):
    """Scene references and key clips of a relevance file must fit its document."""
    violations = []
    if bundle.video_id != document.video_id:
        violations.append(Violation(
            "$.video_id", f"Relevance file is for {bundle.video_id!r}, document is {document.video_id!r}",
            "video_mismatch",
        ))
    known = set(document.scene_ids)
    for index, annotation in enumerate(bundle.annotations):
        for position, entry in enumerate(annotation.entries):
            if entry.scene_id not in known:
                violations.append(Violation(
                    f"$.annotations[{index}].entries[{position}].scene_id",
                    f"Scene {entry.scene_id!r} does not exist in document {document.video_id!r}",
                    "unknown_scene",
                ))
        for field_name in ("key_clips", "predicted_clips"):
            for position, clip in enumerate(getattr(annotation, field_name)):
                if clip.span.end > document.frame_count - 1:
                    violations.append(Violation(
                        f"$.annotations[{index}].{field_name}[{position}].end",
                        f"Clip ends at {clip.span.end}, past the last frame {document.frame_count - 1}",
                        "out_of_range",
                    ))
    if violations:
        raise AnnotationValidationError(violations)


Record = Union[AnnotationDocument, RelevanceBundle]


def parse_record(data: Union[bytes, str]) -> Record:
    """A document, or a relevance file when the object carries 'annotations'."""
    payload = load_json_bytes(data)
    if isinstance(payload, Mapping) and "annotations" in payload:
        return validate_relevance_payload(payload)
    return validate_document_payload(payload)


def iter_records(path: Union[str, Path]) -> Iterator[Tuple[str, bytes]]:
    """
    Raw records with a location label: a .json file is one record, a .jsonl
    file one record per non-blank line, a directory every such file in name
    order. Lines are read lazily.
    """
    path = Path(path)
    if path.is_dir():
        for child in sorted(p for p in path.iterdir() if p.suffix in CORPUS_SUFFIXES):
            yield from iter_records(child)
    elif path.suffix == ".jsonl":
        with path.open("rb") as handle:
            for number, line in enumerate(handle, start=1):
                if line.strip():
                    yield f"{path}:{number}", line
    else:
        yield str(path), path.read_bytes()


def load_corpus(paths: Iterable[Union[str, Path]]) -> Iterator[Record]:
    for path in paths:
        for label, raw in iter_records(path):
            logger.debug(f"Parsing {label}")
            yield parse_record(raw)
