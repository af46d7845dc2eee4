"""
Scene Segmentation Module
Scene-boundary scores from per-frame histograms and contiguous scene partitions.

Histograms are inputs (CSV or JSON); nothing here touches pixels.
"""

import csv
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Sequence, Tuple, Union

import numpy as np

from .errors import DimensionError, InsufficientFramesError, InvalidParameterError
from .timeline import ClipSpan

logger = logging.getLogger(__name__)

DEFAULT_BINS = 64
NORMALIZATION_TOLERANCE = 1e-6
THRESHOLD_REL_TOLERANCE = 1e-9


@dataclass(frozen=True, eq=False)
class FrameHistogram:
    """L1-normalized intensity histogram of one frame"""
    bins: np.ndarray

    def __post_init__(self):
        bins = np.asarray(self.bins, dtype=float)
        if bins.ndim != 1 or bins.size == 0:
            raise DimensionError("A histogram must be a non-empty vector")
        if np.any(bins < 0):
            raise InvalidParameterError("Histogram bins must be non-negative")
        if abs(bins.sum() - 1.0) > NORMALIZATION_TOLERANCE:
            raise InvalidParameterError(f"Histogram must sum to 1 (got {bins.sum():.8f})")
        bins.setflags(write=False)
        object.__setattr__(self, "bins", bins)

    @classmethod
    def from_counts(cls, counts: Sequence[float]) -> "FrameHistogram":
        counts = np.asarray(counts, dtype=float)
        total = counts.sum()
        if total <= 0:
            raise InvalidParameterError("Histogram counts must have positive mass")
        return cls(counts / total)

    @property
    def size(self) -> int:
        return int(self.bins.size)


def _l1(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.abs(a - b).sum())


def _chi_square(a: np.ndarray, b: np.ndarray) -> float:
    total = a + b
    nonzero = total > 0
    return float(0.5 * np.sum((a[nonzero] - b[nonzero]) ** 2 / total[nonzero]))


def _intersection(a: np.ndarray, b: np.ndarray) -> float:
    return float(1.0 - np.minimum(a, b).sum())


METRICS: Dict[str, Callable[[np.ndarray, np.ndarray], float]] = {
    "l1": _l1,
    "chi_square": _chi_square,
    "intersection": _intersection,
}


def histogram_diff(h1: FrameHistogram, h2: FrameHistogram, metric: str = "l1") -> float:
    """Distance between two histograms; L1 by default (0 iff equal, at most 2)."""
    if h1.size != h2.size:
        raise DimensionError(f"Histogram sizes differ: {h1.size} vs {h2.size}")
    try:
        distance = METRICS[metric]
    except KeyError as exc:
        raise InvalidParameterError(f"Unknown histogram metric: {metric}") from exc
    return max(distance(h1.bins, h2.bins), 0.0)


@dataclass(frozen=True, eq=False)
class BoundaryScoreSeries:
    """scores[t] measures the transition from frame t to frame t+1"""
    scores: np.ndarray

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=float)
        if scores.ndim != 1 or scores.size == 0:
            raise InsufficientFramesError("A boundary score series needs at least one transition")
        if np.any(scores < 0):
            raise InvalidParameterError("Boundary scores must be non-negative")
        scores.setflags(write=False)
        object.__setattr__(self, "scores", scores)

    @property
    def frame_count(self) -> int:
        return int(self.scores.size) + 1

    def scaled(self, factor: float) -> "BoundaryScoreSeries":
        return BoundaryScoreSeries(self.scores * factor)


def boundary_scores(histograms: Sequence[FrameHistogram], metric: str = "l1") -> BoundaryScoreSeries:
    if len(histograms) < 2:
        raise InsufficientFramesError(f"Need at least 2 frames to score transitions, got {len(histograms)}")
    sizes = {h.size for h in histograms}
    if len(sizes) != 1:
        raise DimensionError(f"All histograms of a video must share one bin count, got {sorted(sizes)}")

    if metric == "l1":
        stacked = np.vstack([h.bins for h in histograms])
        scores = np.abs(np.diff(stacked, axis=0)).sum(axis=1)
    else:
        scores = np.array([histogram_diff(a, b, metric) for a, b in zip(histograms, histograms[1:])])
    return BoundaryScoreSeries(scores)


@dataclass(frozen=True)
class SegmentationPolicy:
    threshold_lambda: float = 2.0
    min_scene_len: int = 8

    def __post_init__(self):
        if self.min_scene_len < 1:
            raise InvalidParameterError(f"min_scene_len must be >= 1, got {self.min_scene_len}")


@dataclass(frozen=True)
class ScenePartition:
    """Boundaries b_0 = 0 < ... < b_M = T; scene j spans [b_{j-1}, b_j - 1]."""
    boundaries: Tuple[int, ...]

    def __post_init__(self):
        b = tuple(int(x) for x in self.boundaries)
        if len(b) < 2 or b[0] != 0:
            raise InvalidParameterError("A partition needs boundaries starting at 0 and ending at T")
        if any(later <= earlier for earlier, later in zip(b, b[1:])):
            raise InvalidParameterError(f"Boundaries must be strictly increasing: {b}")
        object.__setattr__(self, "boundaries", b)

    @property
    def frame_count(self) -> int:
        return self.boundaries[-1]

    @property
    def scenes(self) -> List[ClipSpan]:
        return [ClipSpan(a, b - 1) for a, b in zip(self.boundaries, self.boundaries[1:])]

    @property
    def scene_ids(self) -> List[str]:
        return [f"s{j}" for j in range(1, len(self) + 1)]

    def __len__(self) -> int:
        return len(self.boundaries) - 1

    def to_json(self) -> Dict:
        return {
            "boundaries": list(self.boundaries),
            "scenes": [
                {"scene_id": scene_id, "start": s.start, "end": s.end}
                for scene_id, s in zip(self.scene_ids, self.scenes)
            ],
        }

    @classmethod
    def from_json(cls, payload: Dict) -> "ScenePartition":
        if "boundaries" in payload:
            return cls(tuple(payload["boundaries"]))
        scenes = payload.get("scenes") or []
        if not scenes:
            raise InvalidParameterError("Partition JSON needs 'boundaries' or 'scenes'")
        return cls(tuple([0] + [int(s["end"]) + 1 for s in scenes]))

    @classmethod
    def single(cls, frame_count: int) -> "ScenePartition":
        return cls((0, frame_count))


def _is_high(score: float, threshold: float) -> bool:
    # Floating-point tie rule: a score that equals the threshold up to rounding counts as above it.
    return score > threshold or math.isclose(score, threshold, rel_tol=THRESHOLD_REL_TOLERANCE)


def segment(scores: BoundaryScoreSeries, policy: SegmentationPolicy = SegmentationPolicy()) -> ScenePartition:
    """
    Cut after every transition scoring at least mean + lambda * std.

    A score equal to the threshold within floating tolerance counts as high.
    Cuts that would leave a scene shorter than min_scene_len are dropped
    greedily from the left, keeping the earlier cut; a degenerate series with
    zero spread yields a single scene.
    """
    values = scores.scores
    frame_count = scores.frame_count
    std = float(values.std())
    if std == 0.0:
        return ScenePartition.single(frame_count)

    threshold = float(values.mean()) + policy.threshold_lambda * std
    candidates = [t + 1 for t, s in enumerate(values) if _is_high(float(s), threshold)]

    kept: List[int] = []
    last = 0
    for cut in candidates:
        if cut - last >= policy.min_scene_len:
            kept.append(cut)
            last = cut
    while kept and frame_count - kept[-1] < policy.min_scene_len:
        kept.pop()

    logger.debug(f"Segmentation: threshold={threshold:.4f}, candidates={len(candidates)}, kept={len(kept)}")
    return ScenePartition(tuple([0] + kept + [frame_count]))


def _numeric_row(path: Path, index: int, row) -> List[float]:
    if not isinstance(row, list) or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in row):
        raise InvalidParameterError(f"{path}: frame {index} must be a list of numbers")
    return [float(v) for v in row]


def load_histograms(path: Union[str, Path]) -> List[FrameHistogram]:
    """
    Read per-frame histograms from CSV (header bin_0..bin_{B-1}) or JSON
    ({"bins": B, "frames": [[...], ...]}). Rows are L1-normalized on load.
    """
    path = Path(path)
    if path.suffix.lower() == ".json":
        payload = json.loads(path.read_text(encoding="utf-8"))
        if not isinstance(payload, dict) or not isinstance(payload.get("frames", []), list):
            raise InvalidParameterError(f'{path}: expected an object {{"bins": B, "frames": [[...], ...]}}')
        rows = [_numeric_row(path, index, row) for index, row in enumerate(payload.get("frames") or [])]
        declared = payload.get("bins")
        if declared is not None and (isinstance(declared, bool) or not isinstance(declared, int)):
            raise InvalidParameterError(f"{path}: bins must be an integer, got {declared!r}")
        if declared is not None and any(len(r) != int(declared) for r in rows):
            raise DimensionError(f"{path}: every frame must have {declared} bins")
    else:
        with path.open(newline="", encoding="utf-8") as handle:
            reader = csv.reader(handle)
            header = next(reader, None)
            if not header:
                raise InsufficientFramesError(f"{path}: empty histogram file")
            expected = [f"bin_{i}" for i in range(len(header))]
            if [h.strip() for h in header] != expected:
                raise DimensionError(f"{path}: header must be bin_0..bin_{len(header) - 1}")
            rows = [[float(v) for v in row] for row in reader if row]
            if any(len(r) != len(header) for r in rows):
                raise DimensionError(f"{path}: every row must have {len(header)} bins")
    logger.info(f"Loaded {len(rows)} frame histograms from {path}")
    return [FrameHistogram.from_counts(r) for r in rows]
