"""
Needle Simulation Module
Synthetic needle-in-haystack videos, a simulated answerer and a strategy comparison harness.
"""

import csv
import io
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Dict, Iterable, List, Sequence, TextIO, Tuple

import numpy as np

from .errors import EmptyEvidenceError, InvalidParameterError, OverBudgetError
from .reward import AnswerDistribution, RewardConfig, reward
from .sampling import SamplingConfig, SamplingStrategy, SelectionResult, select
from .segmentation import DEFAULT_BINS, FrameHistogram, ScenePartition
from .timeline import ClipSet, ClipSpan, KeyClip, Priority, Timeline

logger = logging.getLogger(__name__)

CSV_COLUMNS = ("strategy", "k", "seed", "recall", "reward")
DISTRACTOR_SCENE_LEN = (16, 48)


@dataclass(frozen=True)
class SyntheticVideo:
    timeline: Timeline
    evidence_spans: Tuple[ClipSpan, ...]
    scenes: ScenePartition
    seed: int

    def oracle_clips(self) -> ClipSet:
        return ClipSet(tuple(KeyClip(span, Priority.P1, "planted evidence") for span in self.evidence_spans))

    def histograms(self, bins: int = DEFAULT_BINS, noise: float = 0.002) -> List[FrameHistogram]:
        """
        Render one peaked histogram per scene plus per-frame jitter, so scene
        changes show up as large L1 jumps and within-scene changes stay small.
        """
        rng = np.random.default_rng([self.seed, 1])
        positions = np.arange(bins)
        frames = []
        for span in self.scenes.scenes:
            centre = rng.uniform(0, bins - 1)
            width = rng.uniform(1.5, 4.0)
            base = np.exp(-0.5 * ((positions - centre) / width) ** 2) + 1e-3
            base /= base.sum()
            for _ in span.indices():
                frame = base + rng.uniform(0, noise, size=bins)
                frames.append(FrameHistogram.from_counts(frame))
        return frames


def _place_needles(frame_count: int, needle_len: int, needles: int, rng: np.random.Generator) -> List[int]:
    # stars and bars: uniform over all placements of `needles` disjoint spans
    free = frame_count - needles * needle_len
    cuts = np.sort(rng.choice(free + needles, size=needles, replace=False))
    return [int(cut - i) + i * needle_len for i, cut in enumerate(cuts)]


def _distractor_scenes(start: int, end: int, rng: np.random.Generator) -> List[int]:
    """Boundaries (exclusive ends) of background scenes tiling [start, end)."""
    cuts = []
    cursor = start
    low, high = DISTRACTOR_SCENE_LEN
    while cursor < end:
        cursor = min(end, cursor + int(rng.integers(low, high + 1)))
        cuts.append(cursor)
    return cuts


def generate_video(frame_count: int, needle_len: int, seed: int, needles: int = 1) -> SyntheticVideo:
    """Plant `needles` disjoint evidence spans of needle_len frames uniformly at random."""
    if needles < 1:
        raise InvalidParameterError(f"Need at least one needle, got {needles}")
    if needle_len < 1:
        raise InvalidParameterError(f"needle_len must be >= 1, got {needle_len}")
    if needles * needle_len > frame_count:
        raise OverBudgetError(f"{needles} needles of {needle_len} frames do not fit in {frame_count} frames")

    timeline = Timeline(frame_count)
    rng = np.random.default_rng(seed)
    starts = _place_needles(frame_count, needle_len, needles, rng)
    spans = tuple(ClipSpan(s, s + needle_len - 1) for s in starts)

    boundaries = [0]
    cursor = 0
    for span in spans:
        boundaries.extend(_distractor_scenes(cursor, span.start, rng))
        boundaries.append(span.end + 1)
        cursor = span.end + 1
    boundaries.extend(_distractor_scenes(cursor, frame_count, rng))
    scenes = ScenePartition(tuple(sorted(set(boundaries))))
    return SyntheticVideo(timeline=timeline, evidence_spans=spans, scenes=scenes, seed=seed)


def _evidence_frames(evidence: Sequence[ClipSpan]) -> set:
    if not evidence:
        raise EmptyEvidenceError("Evidence must contain at least one span")
    return {i for span in evidence for i in span.indices()}


def evidence_recall(selection: SelectionResult, evidence: Sequence[ClipSpan]) -> float:
    """Fraction of evidence frames covered by the selection."""
    frames = _evidence_frames(evidence)
    return len(frames.intersection(selection.indices)) / len(frames)


def evidence_hit(selection: SelectionResult, evidence: Sequence[ClipSpan]) -> float:
    """Fraction of evidence spans touched by at least one selected frame."""
    _evidence_frames(evidence)
    touched = sum(1 for span in evidence if any(span.contains(i) for i in selection.indices))
    return touched / len(evidence)


@dataclass(frozen=True)
class SimAnswerModel:
    num_choices: int = 4
    base_prob: float = 0.25
    gain: float = 0.7

    def __post_init__(self):
        if self.num_choices < 2:
            raise InvalidParameterError(f"Need at least 2 choices, got {self.num_choices}")
        if self.base_prob < 0 or self.gain < 0:
            raise InvalidParameterError("base_prob and gain must be non-negative")
        if self.base_prob + self.gain > 1.0 + 1e-12:
            raise InvalidParameterError(f"base_prob + gain must not exceed 1, got {self.base_prob + self.gain}")


def simulate_answer(recall: float, model: SimAnswerModel = SimAnswerModel()) -> AnswerDistribution:
    """Linear link from coverage to p(ans); wrong answers split the remainder evenly."""
    if not 0.0 <= recall <= 1.0:
        raise InvalidParameterError(f"recall must be in [0, 1], got {recall}")
    p_ans = min(model.base_prob + model.gain * recall, 1.0)
    p_wrong = (1.0 - p_ans) / (model.num_choices - 1)
    return AnswerDistribution.from_probabilities([p_ans] + [p_wrong] * (model.num_choices - 1), 0)


@dataclass(frozen=True)
class ExperimentConfig:
    strategies: Tuple[str, ...] = ("uniform", "focused", "hybrid")
    ks: Tuple[int, ...] = (8,)
    seeds: Tuple[int, ...] = tuple(range(100))
    frame_count: int = 256
    needle_len: int = 8
    needles: int = 1
    model: SimAnswerModel = field(default_factory=SimAnswerModel)
    reward_config: RewardConfig = field(default_factory=RewardConfig)
    sampling: SamplingConfig = field(default_factory=SamplingConfig)

    def __post_init__(self):
        for name in self.strategies:
            SamplingStrategy.parse(name)
        for k in self.ks:
            if not 1 <= k <= self.frame_count:
                raise InvalidParameterError(f"k={k} must be in [1, {self.frame_count}]")
        if not self.seeds:
            raise InvalidParameterError("At least one seed is required")


@dataclass(frozen=True)
class ExperimentRow:
    strategy: str
    k: int
    seed: int
    recall: float
    hit: float
    reward: float
    frames_in_evidence: int


@dataclass(frozen=True)
class ExperimentReport:
    rows: Tuple[ExperimentRow, ...]

    def summary(self) -> List[Dict]:
        cells: Dict[Tuple[str, int], List[ExperimentRow]] = {}
        for row in self.rows:
            cells.setdefault((row.strategy, row.k), []).append(row)
        summary = []
        for (strategy, k), rows in cells.items():
            entry = {"strategy": strategy, "k": k, "seeds": len(rows)}
            for metric in ("recall", "hit", "reward"):
                values = np.array([getattr(r, metric) for r in rows])
                entry[f"{metric}_mean"] = float(values.mean())
                entry[f"{metric}_std"] = float(values.std())
            summary.append(entry)
        return summary

    def mean(self, strategy: str, k: int, metric: str = "recall") -> float:
        values = [getattr(r, metric) for r in self.rows if r.strategy == strategy and r.k == k]
        return float(np.mean(values))

    def write_csv(self, handle: TextIO):
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in self.rows:
            writer.writerow([row.strategy, row.k, row.seed, repr(row.recall), repr(row.reward)])

    def to_csv(self) -> str:
        buffer = io.StringIO()
        self.write_csv(buffer)
        return buffer.getvalue()

    def to_json(self) -> Dict:
        return {"rows": [asdict(r) for r in self.rows], "summary": self.summary()}


def _run_seed(config: ExperimentConfig, seed: int) -> List[ExperimentRow]:
    video = generate_video(config.frame_count, config.needle_len, seed, config.needles)
    clips = video.oracle_clips()
    rows = []
    for name in config.strategies:
        strategy = SamplingStrategy.parse(name)
        for k in config.ks:
            selection = select(strategy, clips, k, video.timeline, config.sampling)
            recall = evidence_recall(selection, video.evidence_spans)
            frames = len(_evidence_frames(video.evidence_spans).intersection(selection.indices))
            rows.append(ExperimentRow(
                strategy=strategy.value,
                k=k,
                seed=seed,
                recall=recall,
                hit=evidence_hit(selection, video.evidence_spans),
                reward=reward(simulate_answer(recall, config.model), config.reward_config),
                frames_in_evidence=frames,
            ))
    return rows


def run_experiment(config: ExperimentConfig, jobs: int = 1) -> ExperimentReport:
    """Oracle-clip selections for every (strategy, k, seed) cell; rows come back in a fixed order."""
    logger.info(f"Simulating {len(config.seeds)} seeds x {len(config.strategies)} strategies x k={list(config.ks)}")
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            batches: Iterable[List[ExperimentRow]] = list(pool.map(_run_seed, [config] * len(config.seeds),
                                                                 config.seeds))
    else:
        batches = [_run_seed(config, seed) for seed in config.seeds]

    order = {SamplingStrategy.parse(s).value: i for i, s in enumerate(config.strategies)}
    rows = sorted((r for batch in batches for r in batch), key=lambda r: (order[r.strategy], r.k, r.seed))
    return ExperimentReport(tuple(rows))

