"""
Timeline Module
Frame-index arithmetic, key clips, priorities, merging and partitioning.

All indices refer to the sampled working grid of a video (typically 256
frames). Spans are inclusive on both ends, counts are half-open.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Dict, Iterable, Iterator, List, Optional, Tuple, Union

import numpy as np

from .errors import InvalidParameterError, InvalidTimelineError

logger = logging.getLogger(__name__)

RATIONALE_SEPARATOR = "; "


@dataclass(frozen=True)
class Timeline:
    """Working grid of T frames; fps is only used for display."""
    frame_count: int
    fps: Optional[Fraction] = None

    def __post_init__(self):
        if not isinstance(self.frame_count, int) or self.frame_count < 1:
            raise InvalidTimelineError(f"frame_count must be a positive integer, got {self.frame_count!r}")
        if self.fps is not None:
            fps = Fraction(self.fps)
            if fps <= 0:
                raise InvalidTimelineError(f"fps must be positive, got {self.fps!r}")
            object.__setattr__(self, "fps", fps)

    @property
    def last_index(self) -> int:
        return self.frame_count - 1

    def contains(self, index: int) -> bool:
        return 0 <= index < self.frame_count

    def timestamp(self, index: int) -> Optional[float]:
        """Seconds from the start of the video, or None without fps."""
        if self.fps is None:
            return None
        return float(Fraction(index) / self.fps)

    def format_timestamp(self, index: int) -> Optional[str]:
        seconds = self.timestamp(index)
        if seconds is None:
            return None
        millis = int(round(seconds * 1000))
        hours, millis = divmod(millis, 3_600_000)
        minutes, millis = divmod(millis, 60_000)
        secs, millis = divmod(millis, 1000)
        return f"{hours:02d}:{minutes:02d}:{secs:02d}.{millis:03d}"


class Priority(Enum):
    """Importance tag of a key clip"""
    P1 = "P1"  # direct evidence
    P2 = "P2"  # strong support

    @property
    def weight(self) -> int:
        return 2 if self is Priority.P1 else 1

    @classmethod
    def parse(cls, value: Union[str, "Priority"]) -> "Priority":
        if isinstance(value, Priority):
            return value
        try:
            return cls(str(value).strip().upper())
        except ValueError as exc:
            raise InvalidParameterError(f"Unknown priority tag: {value!r}") from exc


@dataclass(frozen=True, order=True)
class ClipSpan:
    start: int
    end: int

    def __post_init__(self):
        if self.start < 0 or self.end < self.start:
            raise InvalidParameterError(f"Invalid span [{self.start}, {self.end}]")

    @property
    def length(self) -> int:
        return self.end - self.start + 1

    def indices(self) -> range:
        return range(self.start, self.end + 1)

    def overlaps(self, other: "ClipSpan") -> bool:
        return self.start <= other.end and other.start <= self.end

    def contains(self, index: int) -> bool:
        return self.start <= index <= self.end


@dataclass(frozen=True)
class KeyClip:
    span: ClipSpan
    priority: Priority
    rationale: str = ""

    @property
    def weighted_mass(self) -> int:
        return self.priority.weight * self.span.length

    def to_json(self) -> Dict:
        return {
            "start": self.span.start,
            "end": self.span.end,
            "priority": self.priority.value,
            "reason": self.rationale,
        }

    @classmethod
    def from_json(cls, record: Dict) -> "KeyClip":
        try:
            start = int(record["start"])
            end = int(record["end"])
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidParameterError(f"Clip record needs integer 'start' and 'end': {record!r}") from exc
        # negative starts are clamped here; the rest of the clamping is normalize_clipset's job
        return cls(
            span=ClipSpan(max(start, 0), end),
            priority=Priority.parse(record.get("priority", "P2")),
            rationale=str(record.get("reason") or ""),
        )


@dataclass(frozen=True)
class ClipSet:
    """Key clips ordered by start, ties by end."""
    clips: Tuple[KeyClip, ...] = field(default_factory=tuple)

    def __post_init__(self):
        ordered = tuple(sorted(self.clips, key=lambda c: (c.span.start, c.span.end)))
        object.__setattr__(self, "clips", ordered)

    def __iter__(self) -> Iterator[KeyClip]:
        return iter(self.clips)

    def __len__(self) -> int:
        return len(self.clips)

    def __getitem__(self, item: int) -> KeyClip:
        return self.clips[item]

    @property
    def total_length(self) -> int:
        return sum(c.span.length for c in self.clips)

    def count(self, priority: Priority) -> int:
        return sum(1 for c in self.clips if c.priority is priority)

    def to_json(self) -> List[Dict]:
        return [c.to_json() for c in self.clips]


def clips_from_json(payload: Union[List, Dict]) -> List[KeyClip]:
    """Accepts a bare list of clip records or an object carrying a 'clips' list."""
    if isinstance(payload, dict):
        payload = payload.get("clips", [])
    if not isinstance(payload, list):
        raise InvalidParameterError("Expected a list of clip records")
    clips = []
    for record in payload:
        if isinstance(record, dict) and _ends_before_first_frame(record):
            logger.debug(f"Dropping clip that ends before frame 0: {record!r}")
            continue
        clips.append(KeyClip.from_json(record))
    return clips


def _ends_before_first_frame(record: Dict) -> bool:
    try:
        return int(record["end"]) < 0
    except (KeyError, TypeError, ValueError):
        return False


def _join_rationales(parts: Iterable[str]) -> str:
    return RATIONALE_SEPARATOR.join(p for p in parts if p)


def _union_same_priority(clips: List[KeyClip]) -> List[KeyClip]:
    merged: List[KeyClip] = []
    for clip in sorted(clips, key=lambda c: (c.span.start, c.span.end)):
        if merged and clip.span.start <= merged[-1].span.end:
            prev = merged[-1]
            merged[-1] = KeyClip(
                span=ClipSpan(prev.span.start, max(prev.span.end, clip.span.end)),
                priority=prev.priority,
                rationale=_join_rationales([prev.rationale, clip.rationale]),
            )
        else:
            merged.append(clip)
    return merged


def _subtract(clip: KeyClip, blockers: List[KeyClip]) -> List[KeyClip]:
    """Pieces of clip not covered by any blocker (blockers sorted, disjoint)."""
    pieces = []
    cursor = clip.span.start
    for blocker in blockers:
        if blocker.span.end < cursor:
            continue
        if blocker.span.start > clip.span.end:
            break
        if blocker.span.start > cursor:
            pieces.append(ClipSpan(cursor, blocker.span.start - 1))
        cursor = max(cursor, blocker.span.end + 1)
        if cursor > clip.span.end:
            break
    if cursor <= clip.span.end:
        pieces.append(ClipSpan(cursor, clip.span.end))
    return [KeyClip(span=s, priority=clip.priority, rationale=clip.rationale) for s in pieces]


def normalize_clipset(clips: Iterable[KeyClip], timeline: Timeline) -> ClipSet:
    """
    Clamp, drop, union and de-overlap raw clip predictions.

    Same-priority overlaps are unioned with their rationales joined; where a
    P2 clip overlaps a P1 clip the P2 clip is truncated (split if needed).
    """
    if timeline.frame_count < 1:
        raise InvalidTimelineError("Timeline has no frames")

    buckets: Dict[Priority, List[KeyClip]] = {Priority.P1: [], Priority.P2: []}
    for clip in clips:
        start = max(clip.span.start, 0)
        end = min(clip.span.end, timeline.last_index)
        if start > end:
            continue
        buckets[clip.priority].append(KeyClip(ClipSpan(start, end), clip.priority, clip.rationale))

    p1 = _union_same_priority(buckets[Priority.P1])
    p2: List[KeyClip] = []
    for clip in _union_same_priority(buckets[Priority.P2]):
        p2.extend(_subtract(clip, p1))
    return ClipSet(tuple(p1 + p2))


def merge_adjacent(clips: ClipSet, tolerance: int = 2) -> ClipSet:
    """Merge consecutive same-priority clips whose gap is at most `tolerance` frames."""
    if tolerance < 0:
        raise InvalidParameterError(f"Merge tolerance must be non-negative, got {tolerance}")

    merged: List[KeyClip] = []
    for clip in clips:
        if merged and merged[-1].priority is clip.priority:
            prev = merged[-1]
            gap = clip.span.start - prev.span.end - 1
            if gap <= tolerance:
                merged[-1] = KeyClip(
                    span=ClipSpan(prev.span.start, max(prev.span.end, clip.span.end)),
                    priority=prev.priority,
                    rationale=_join_rationales([prev.rationale, clip.rationale]),
                )
                continue
        merged.append(clip)
    return ClipSet(tuple(merged))


def coverage_mask(clips: ClipSet, timeline: Timeline) -> np.ndarray:
    mask = np.zeros(timeline.frame_count, dtype=bool)
    for clip in clips:
        mask[clip.span.start:clip.span.end + 1] = True
    return mask


def partition_frames(clips: ClipSet, timeline: Timeline) -> Tuple[Tuple[int, ...], Tuple[int, ...]]:
    """Split the timeline into (predicted, background) index tuples."""
    mask = coverage_mask(clips, timeline)
    predicted = tuple(int(i) for i in np.flatnonzero(mask))
    background = tuple(int(i) for i in np.flatnonzero(~mask))
    return predicted, background
