"""
Prompt builders for the captioner, the relevance scorer and clip prediction.
Pure functions of their inputs: identical arguments give identical text.
"""

from fractions import Fraction
from typing import Dict, Mapping, Optional, Sequence

from engine.errors import InvalidParameterError
from engine.timeline import Timeline

from .documents import Scene

CAPTION_ROLE = "You are a Professional Video Content Analyst."
RELEVANCE_ROLE = "You are a Video QA Relevance Analyst."
CLIP_SELECTION_ROLE = "You are a Video Evidence Localization Analyst."

STRICT_JSON_INSTRUCTION = (
    "Respond with strict JSON only: a single JSON object, no markdown, no commentary, "
    "double-quoted keys and strings."
)

RELEVANCE_SCALE = (
    "5 (Directly Relevant): the scene contains critical visual evidence that directly resolves the question",
    "4 (Highly Relevant): the scene provides strong supporting context, though it is not the single most "
    "essential frame",
    "3 (Moderately Relevant): the scene depicts related subjects or environments but lacks the decisive "
    "information",
    "2 (Slightly Relevant): the scene has only weak or indirect connection to the question",
    "1 (Not Relevant): the scene provides no information useful for answering the question",
)


def _require_query(query: Optional[str]) -> str:
    if query is None or not str(query).strip():
        raise InvalidParameterError("A non-empty query is required")
    return str(query).strip()


def _span_label(start: int, end: int, timeline: Optional[Timeline]) -> str:
    label = f"frames {start}-{end}"
    if timeline is not None and timeline.fps is not None:
        label += f" ({timeline.format_timestamp(start)} to {timeline.format_timestamp(end)})"
    return label


def build_caption_prompt(video_meta: Mapping) -> str:
    """
    `video_meta` carries video_id, frame_count, optional fps and the scene
    spans [{scene_id, start, end}] the captioner must describe.
    """
    video_id = video_meta.get("video_id")
    frame_count = video_meta.get("frame_count")
    scenes = video_meta.get("scenes") or []
    if not video_id or not scenes:
        raise InvalidParameterError("Caption prompt needs a video_id and at least one scene")
    fps = video_meta.get("fps")
    timeline = Timeline(int(frame_count), Fraction(str(fps)) if fps else None) if frame_count else None

    lines = [
        CAPTION_ROLE,
        "",
        "Describe the video below scene by scene, then organise the scenes into chapters and summarise the "
        "whole video.",
        "",
        STRICT_JSON_INSTRUCTION,
        'The object has exactly three components: "scenes", "chapters" and "video_summary".',
        '- "scenes": one object per listed scene with keys "scene_id", "start", "end" and "description". '
        "Keep every scene_id, start and end exactly as given; describe the visible people, objects, actions, "
        "on-screen text and setting.",
        '- "chapters": objects with keys "chapter_id", "scene_ids" and "summary". A chapter groups consecutive '
        "scenes that share a topic; a scene belongs to at most one chapter.",
        '- "video_summary": a short paragraph covering the whole video.',
        "",
        f"Video: {video_id}" + (f", {frame_count} frames" if frame_count else "") + (f", {fps} fps" if fps else ""),
        "Scenes:",
    ]
    for scene in scenes:
        lines.append(f"- {scene['scene_id']}: {_span_label(scene['start'], scene['end'], timeline)}")
    return "\n".join(lines) + "\n"


def build_relevance_prompt(query: str, gold_answer: Optional[str], scenes: Sequence[Scene]) -> str:
    query = _require_query(query)
    if not scenes:
        raise InvalidParameterError("Relevance prompt needs at least one scene")

    lines = [
        RELEVANCE_ROLE,
        "",
        "Rate how useful each scene is for answering the question, given the question and the corresponding "
        "gold-standard answer.",
        "",
        f"Question: {query}",
        f"Gold-standard answer: {gold_answer if gold_answer else 'not provided'}",
        "",
        "Relevance scale:",
    ]
    lines.extend(f"- {anchor}" for anchor in RELEVANCE_SCALE)
    lines.extend([
        "",
        STRICT_JSON_INSTRUCTION,
        'Return {"entries": [...]} with one entry per scene, each with keys "scene_id", "relevance_score" '
        '(an integer from 1 to 5) and "reason" (one sentence citing what is visible).',
        "",
        "Scenes:",
    ])
    for scene in scenes:
        lines.append(f"- {scene.scene_id} (frames {scene.span.start}-{scene.span.end}): {scene.description}")
    return "\n".join(lines) + "\n"


def build_clip_selection_prompt(query: str, frame_count: int) -> str:
    query = _require_query(query)
    if not isinstance(frame_count, int) or frame_count < 1:
        raise InvalidParameterError(f"frame_count must be a positive integer, got {frame_count!r}")

    lines = [
        CLIP_SELECTION_ROLE,
        "",
        f"The video has been sampled to {frame_count} frames indexed 0 to {frame_count - 1}. "
        "Predict the contiguous clips that contain the evidence needed to answer the question.",
        "",
        f"Question: {query}",
        "",
        "Tag each clip with a priority:",
        "- P1: the clip holds the decisive evidence for the answer",
        "- P2: the clip gives useful supporting context",
        "Give a one-sentence reason for every clip.",
        "",
        STRICT_JSON_INSTRUCTION,
        'Return {"clips": [...]} where each clip has keys "start", "end" (inclusive frame indices), '
        '"priority" ("P1" or "P2") and "reason".',
    ]
    return "\n".join(lines) + "\n"


def caption_metadata(video_id: str, scenes: Sequence[Dict]) -> Dict:
    """Request metadata the mock provider understands for a caption call."""
    return {"task": "caption", "video_id": video_id, "scenes": [dict(s) for s in scenes]}


def relevance_metadata(query: str, scene_ids: Sequence[str]) -> Dict:
    return {"task": "relevance", "query": query, "scene_ids": list(scene_ids)}


def clip_metadata(query: str, frame_count: int) -> Dict:
    return {"task": "clips", "query": query, "frame_count": frame_count}
