"""
Relevance Scoring Module
Fuses LLM scene scores with frame-query similarities and classifies highlights.
"""

import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import DimensionError, InsufficientDataError, InvalidParameterError
from .segmentation import ScenePartition
from .timeline import ClipSet, KeyClip, Priority, Timeline, normalize_clipset

logger = logging.getLogger(__name__)

DEFAULT_FUSION_LAMBDA = 0.8
P1_THRESHOLD = 4.9
P2_THRESHOLD = 4.3
SCORE_MIN = 1
SCORE_MAX = 5


@dataclass(frozen=True)
class LlmSceneScore:
    scene_id: str
    score: int
    reason: str = ""

    def __post_init__(self):
        if not SCORE_MIN <= self.score <= SCORE_MAX:
            raise InvalidParameterError(f"LLM score for {self.scene_id} must be in [1, 5], got {self.score}")


@dataclass(frozen=True, eq=False)
class SimilaritySeries:
    """Raw cosine similarities in [-1, 1], one per frame of a scene."""
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).reshape(-1)
        if np.any(values < -1.0) or np.any(values > 1.0):
            raise InvalidParameterError("Similarities must lie in [-1, 1]")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_mapped(cls, mapped: Sequence[float]) -> "SimilaritySeries":
        return cls(np.asarray(mapped, dtype=float) * 2.0 - 1.0)

    @property
    def mapped(self) -> np.ndarray:
        return (self.values + 1.0) / 2.0

    def __len__(self) -> int:
        return int(self.values.size)

    def slice(self, start: int, end: int) -> "SimilaritySeries":
        return SimilaritySeries(self.values[start:end + 1])


@dataclass(frozen=True)
class FusedClipScore:
    value: float
    llm: float
    sim_mapped_to_scale: float
    fusion_lambda: float


def _similarity_scale(mapped: Union[float, np.ndarray]):
    return 1.0 + 4.0 * mapped


def _check_lambda(fusion_lambda: float):
    if not 0.0 <= fusion_lambda <= 1.0:
        raise InvalidParameterError(f"Fusion weight must be in [0, 1], got {fusion_lambda}")


def fuse_clip_score(llm: LlmSceneScore, sims: SimilaritySeries,
                    fusion_lambda: float = DEFAULT_FUSION_LAMBDA) -> FusedClipScore:
    """Weighted average of the LLM score and the mean similarity mapped onto [1, 5]."""
    if len(sims) == 0:
        raise InsufficientDataError(f"No similarities for scene {llm.scene_id}")
    _check_lambda(fusion_lambda)
    sim_scale = float(_similarity_scale(sims.mapped.mean()))
    value = fusion_lambda * llm.score + (1.0 - fusion_lambda) * sim_scale
    value = min(max(value, float(SCORE_MIN)), float(SCORE_MAX))
    return FusedClipScore(value=value, llm=float(llm.score), sim_mapped_to_scale=sim_scale,
                          fusion_lambda=fusion_lambda)


def classify_priority(fused: Union[FusedClipScore, float]) -> Optional[Priority]:
    value = fused.value if isinstance(fused, FusedClipScore) else float(fused)
    if value >= P1_THRESHOLD:
        return Priority.P1
    if value >= P2_THRESHOLD:
        return Priority.P2
    return None


def frame_level_scores(llm: LlmSceneScore, sims: SimilaritySeries,
                       fusion_lambda: float = DEFAULT_FUSION_LAMBDA) -> List[float]:
    """Per-frame refinement: the fuse formula with each frame's own similarity."""
    if len(sims) == 0:
        raise InsufficientDataError(f"No similarities for scene {llm.scene_id}")
    _check_lambda(fusion_lambda)
    scores = fusion_lambda * llm.score + (1.0 - fusion_lambda) * _similarity_scale(sims.mapped)
    return [float(s) for s in np.clip(scores, SCORE_MIN, SCORE_MAX)]


def extract_key_clips(partition: ScenePartition, fused_scores: Sequence[Union[FusedClipScore, float]],
                      reasons: Sequence[str]) -> ClipSet:
    scenes = partition.scenes
    if len(fused_scores) != len(scenes) or len(reasons) != len(scenes):
        raise DimensionError(
            f"Expected {len(scenes)} scores and reasons, got {len(fused_scores)} and {len(reasons)}"
        )
    clips = []
    for span, fused, reason in zip(scenes, fused_scores, reasons):
        priority = classify_priority(fused)
        if priority is not None:
            clips.append(KeyClip(span=span, priority=priority, rationale=reason))
    return normalize_clipset(clips, Timeline(partition.frame_count))


@dataclass(frozen=True)
class SceneRelevance:
    scene_id: str
    fused: FusedClipScore
    priority: Optional[Priority]
    reason: str
    frame_scores: Optional[Tuple[float, ...]] = None

    def to_json(self) -> Dict:
        record = {
            "scene_id": self.scene_id,
            "fused": round(self.fused.value, 6),
            "priority": self.priority.value if self.priority else None,
            "reason": self.reason,
        }
        if self.frame_scores is not None:
            record["frame_scores"] = [round(s, 6) for s in self.frame_scores]
        return record


def score_scenes(partition: ScenePartition, llm_scores: Sequence[LlmSceneScore], sims: SimilaritySeries,
                 fusion_lambda: float = DEFAULT_FUSION_LAMBDA,
                 frame_level: bool = False) -> Tuple[List[SceneRelevance], ClipSet]:
    """
    Fuse one LLM score per scene with that scene's slice of a whole-video
    similarity series, then extract the key clips.
    """
    scenes = partition.scenes
    if len(llm_scores) != len(scenes):
        raise DimensionError(f"Expected {len(scenes)} LLM scores, got {len(llm_scores)}")
    if len(sims) != partition.frame_count:
        raise DimensionError(f"Expected {partition.frame_count} similarities, got {len(sims)}")

    records = []
    for span, llm in zip(scenes, llm_scores):
        scene_sims = sims.slice(span.start, span.end)
        fused = fuse_clip_score(llm, scene_sims, fusion_lambda)
        frames = tuple(frame_level_scores(llm, scene_sims, fusion_lambda)) if frame_level else None
        records.append(SceneRelevance(llm.scene_id, fused, classify_priority(fused), llm.reason, frames))

    clips = extract_key_clips(partition, [r.fused for r in records], [r.reason for r in records])
    return records, clips


def load_similarities(path: Union[str, Path], frame_count: Optional[int] = None) -> SimilaritySeries:
    """
    Read per-frame similarities from CSV rows (frame_index, similarity) or JSON
    (a list of values, or {"similarities": [...]}) into a dense series.
    """
    path = Path(path)
    if path.suffix.lower() == ".json":
        payload = json.loads(path.read_text(encoding="utf-8"))
        values = payload.get("similarities", []) if isinstance(payload, dict) else payload
        if not isinstance(values, list):
            raise InvalidParameterError(f"{path}: similarities must be a list of numbers")
        for index, value in enumerate(values):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise InvalidParameterError(f"{path}: similarity {index} must be a number, got {value!r}")
        pairs = list(enumerate(float(v) for v in values))
    else:
        with path.open(newline="", encoding="utf-8") as handle:
            rows = [row for row in csv.reader(handle) if row]
        if rows and not rows[0][0].strip().lstrip("-").isdigit():
            rows = rows[1:]
        if any(len(r) < 2 for r in rows):
            raise DimensionError(f"{path}: every row must be frame_index,similarity")
        pairs = [(int(r[0]), float(r[1])) for r in rows]

    count = frame_count if frame_count is not None else (max(i for i, _ in pairs) + 1 if pairs else 0)
    dense = np.full(count, np.nan)
    for index, value in pairs:
        if not 0 <= index < count:
            raise DimensionError(f"{path}: frame index {index} outside [0, {count - 1}]")
        dense[index] = value
    if np.isnan(dense).any():
        missing = int(np.isnan(dense).sum())
        raise InsufficientDataError(f"{path}: {missing} frames have no similarity")
    logger.info(f"Loaded {count} similarities from {path}")
    return SimilaritySeries(dense)
