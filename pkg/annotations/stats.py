"""
Dataset Statistics Module
Streaming corpus statistics. Partial accumulators merge associatively, so a
corpus can be folded in any order or in parallel chunks.
"""

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Tuple, Union

from .documents import AnnotationDocument, RelevanceAnnotation, RelevanceBundle

SCORES = (1, 2, 3, 4, 5)
UNKNOWN_SOURCE = "unknown"
# (label, lowest, highest); None means unbounded
SCENE_COUNT_BUCKETS = (
    ("<5", 0, 4),
    ("5-15", 5, 15),
    ("16-25", 16, 25),
    ("26-35", 26, 35),
    (">35", 36, None),
)


def _ratio(numerator: int, denominator: int) -> float:
    return numerator / denominator if denominator else 0.0


def _bucket(scene_count: int) -> str:
    for label, low, high in SCENE_COUNT_BUCKETS:
        if scene_count >= low and (high is None or scene_count <= high):
            return label
    raise AssertionError(f"no bucket for {scene_count}")


def histogram_median(histogram: Counter) -> Optional[float]:
    """Median of the multiset described by a score histogram."""
    total = sum(histogram.values())
    if total == 0:
        return None
    ordered = sorted(histogram.items())

    def nth(n: int) -> int:
        seen = 0
        for value, count in ordered:
            seen += count
            if n < seen:
                return value
        raise IndexError(n)

    if total % 2:
        return float(nth(total // 2))
    return (nth(total // 2 - 1) + nth(total // 2)) / 2.0


def _summary(values: List[float]) -> Optional[Dict]:
    if not values:
        return None
    ordered = sorted(values)
    middle = len(ordered) // 2
    median = ordered[middle] if len(ordered) % 2 else (ordered[middle - 1] + ordered[middle]) / 2.0
    return {
        "videos": len(ordered),
        "min": ordered[0],
        "mean": math.fsum(ordered) / len(ordered),
        "median": median,
        "max": ordered[-1],
    }


@dataclass(frozen=True)
class DatasetStats:
    video_count: int
    scene_count: int
    chapter_count: int
    relevance_count: int
    query_count: int
    avg_scenes_per_video: float
    avg_chapters_per_video: float
    queries_per_video: float
    relevance_per_video: float
    score_histogram: Dict[int, int]
    median_score: Optional[float]
    scene_count_buckets: Dict[str, int]
    duration_seconds: Optional[Dict]
    by_source: Dict[str, Dict]

    def to_json(self) -> Dict:
        return {
            "video_count": self.video_count,
            "scene_count": self.scene_count,
            "chapter_count": self.chapter_count,
            "relevance_count": self.relevance_count,
            "query_count": self.query_count,
            "avg_scenes_per_video": self.avg_scenes_per_video,
            "avg_chapters_per_video": self.avg_chapters_per_video,
            "queries_per_video": self.queries_per_video,
            "relevance_per_video": self.relevance_per_video,
            "score_histogram": {str(score): count for score, count in self.score_histogram.items()},
            "median_score": self.median_score,
            "scene_count_buckets": dict(self.scene_count_buckets),
            "duration_seconds": self.duration_seconds,
            "by_source": self.by_source,
        }

    def table_rows(self) -> List[Tuple[str, str]]:
        rows = [
            ("videos", str(self.video_count)),
            ("scenes", str(self.scene_count)),
            ("chapters", str(self.chapter_count)),
            ("queries", str(self.query_count)),
            ("relevance annotations", str(self.relevance_count)),
            ("avg scenes / video", f"{self.avg_scenes_per_video:.2f}"),
            ("avg chapters / video", f"{self.avg_chapters_per_video:.2f}"),
            ("queries / video", f"{self.queries_per_video:.2f}"),
            ("relevance / video", f"{self.relevance_per_video:.2f}"),
            ("median score", "-" if self.median_score is None else f"{self.median_score:.1f}"),
        ]
        rows.extend((f"score {score}", str(count)) for score, count in self.score_histogram.items())
        rows.extend((f"videos with {label} scenes", str(count)) for label, count in self.scene_count_buckets.items())
        if self.duration_seconds:
            for key in ("min", "mean", "median", "max"):
                rows.append((f"duration {key} (s)", f"{self.duration_seconds[key]:.2f}"))
        for source, breakdown in sorted(self.by_source.items()):
            rows.append((f"[{source}] videos / scenes / relevance",
                         f"{breakdown['videos']} / {breakdown['scenes']} / {breakdown['relevance_count']}"))
        return rows


@dataclass
class StatsAccumulator:
    video_count: int = 0
    scene_count: int = 0
    chapter_count: int = 0
    query_count: int = 0
    buckets: Counter = field(default_factory=Counter)
    durations: List[float] = field(default_factory=list)
    sources: Dict[str, str] = field(default_factory=dict)
    source_videos: Counter = field(default_factory=Counter)
    source_scenes: Counter = field(default_factory=Counter)
    # video_id -> score histogram; sources are resolved at finish so relevance may arrive first
    scores_by_video: Dict[str, Counter] = field(default_factory=dict)

    def add_document(self, document: AnnotationDocument):
        source = document.source or UNKNOWN_SOURCE
        self.video_count += 1
        self.scene_count += len(document.scenes)
        self.chapter_count += len(document.chapters)
        self.buckets[_bucket(len(document.scenes))] += 1
        if document.duration_seconds is not None:
            self.durations.append(document.duration_seconds)
        self.sources.setdefault(document.video_id, source)
        self.source_videos[source] += 1
        self.source_scenes[source] += len(document.scenes)

    def add_relevance(self, annotation: RelevanceAnnotation):
        self.query_count += 1
        histogram = self.scores_by_video.setdefault(annotation.video_id, Counter())
        histogram.update(entry.relevance_score for entry in annotation.entries)

    def add(self, record: Union[AnnotationDocument, RelevanceBundle, RelevanceAnnotation]):
        if isinstance(record, AnnotationDocument):
            self.add_document(record)
        elif isinstance(record, RelevanceBundle):
            for annotation in record.annotations:
                self.add_relevance(annotation)
        else:
            self.add_relevance(record)

    def merge(self, other: "StatsAccumulator") -> "StatsAccumulator":
        merged = StatsAccumulator(
            video_count=self.video_count + other.video_count,
            scene_count=self.scene_count + other.scene_count,
            chapter_count=self.chapter_count + other.chapter_count,
            query_count=self.query_count + other.query_count,
            buckets=self.buckets + other.buckets,
            durations=self.durations + other.durations,
            sources={**other.sources, **self.sources},
            source_videos=self.source_videos + other.source_videos,
            source_scenes=self.source_scenes + other.source_scenes,
        )
        for part in (self.scores_by_video, other.scores_by_video):
            for video_id, histogram in part.items():
                merged.scores_by_video.setdefault(video_id, Counter()).update(histogram)
        return merged

    def finish(self) -> DatasetStats:
        scores = Counter()
        by_source_scores: Dict[str, Counter] = {}
        for video_id, histogram in self.scores_by_video.items():
            scores.update(histogram)
            source = self.sources.get(video_id, UNKNOWN_SOURCE)
            by_source_scores.setdefault(source, Counter()).update(histogram)
        relevance_count = sum(scores.values())

        by_source = {}
        for source in sorted(set(self.source_videos) | set(by_source_scores)):
            histogram = by_source_scores.get(source, Counter())
            by_source[source] = {
                "videos": self.source_videos[source],
                "scenes": self.source_scenes[source],
                "relevance_count": sum(histogram.values()),
                "score_histogram": {str(s): histogram[s] for s in SCORES},
                "median_score": histogram_median(histogram),
            }

        return DatasetStats(
            video_count=self.video_count,
            scene_count=self.scene_count,
            chapter_count=self.chapter_count,
            relevance_count=relevance_count,
            query_count=self.query_count,
            avg_scenes_per_video=_ratio(self.scene_count, self.video_count),
            avg_chapters_per_video=_ratio(self.chapter_count, self.video_count),
            queries_per_video=_ratio(self.query_count, self.video_count),
            relevance_per_video=_ratio(relevance_count, self.video_count),
            score_histogram={s: scores[s] for s in SCORES},
            median_score=histogram_median(scores),
            scene_count_buckets={label: self.buckets[label] for label, _, _ in SCENE_COUNT_BUCKETS},
            duration_seconds=_summary(self.durations),
            by_source=by_source,
        )


def compute_stats(documents: Iterable[AnnotationDocument],
                  relevance_annotations: Iterable[Union[RelevanceBundle, RelevanceAnnotation]] = ()) -> DatasetStats:
    accumulator = StatsAccumulator()
    for document in documents:
        accumulator.add_document(document)
    for record in relevance_annotations:
        accumulator.add(record)
    return accumulator.finish()
