"""
Keyframe Sampling Module
Uniform baseline, Focused Sampling and Hybrid Sampling over predicted key clips.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from .allocation import (
    AllocationPlan,
    allocate_with_guarantee,
    exact,
    pick_in_clip,
    round_half_up,
    uniform_offsets,
)
from .errors import InvalidBudgetError, InvalidParameterError, NoClipsError, OverBudgetError
from .timeline import ClipSet, Timeline, coverage_mask, merge_adjacent, normalize_clipset, partition_frames

logger = logging.getLogger(__name__)


class SamplingStrategy(Enum):
    AUTO = "auto"
    UNIFORM = "uniform"
    FOCUSED = "focused"
    HYBRID = "hybrid"

    @classmethod
    def parse(cls, value) -> "SamplingStrategy":
        if isinstance(value, SamplingStrategy):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError as exc:
            raise InvalidParameterError(f"Unknown sampling strategy: {value!r}") from exc


@dataclass(frozen=True)
class SamplingConfig:
    tolerance: int = 2
    alpha_pred: float = 4.0
    r_min: float = 0.5
    focused_max_k: int = 8

    def __post_init__(self):
        if self.tolerance < 0:
            raise InvalidParameterError(f"tolerance must be >= 0, got {self.tolerance}")
        if self.alpha_pred <= 0:
            raise InvalidParameterError(f"alpha must be positive, got {self.alpha_pred}")
        if not 0.0 <= self.r_min <= 1.0:
            raise InvalidParameterError(f"r_min must be in [0, 1], got {self.r_min}")


@dataclass(frozen=True)
class HybridShares:
    k_p_raw: int
    k_p: int
    k_b: int
    alpha_pred: float
    r_min: float

    def to_json(self) -> Dict:
        return {"k_p_raw": self.k_p_raw, "k_p": self.k_p, "k_b": self.k_b,
                "alpha": self.alpha_pred, "r_min": self.r_min}


@dataclass(frozen=True)
class SelectionResult:
    indices: Tuple[int, ...]
    strategy: SamplingStrategy
    clips: Optional[ClipSet] = None
    plan: Optional[AllocationPlan] = None
    shares: Optional[HybridShares] = None

    def __len__(self) -> int:
        return len(self.indices)

    def to_json(self, timeline: Optional[Timeline] = None) -> Dict:
        payload = {
            "indices": list(self.indices),
            "strategy": self.strategy.value,
            "plan": self.plan.to_json(self.clips) if self.plan else [],
        }
        if self.shares is not None:
            payload["shares"] = self.shares.to_json()
        if timeline is not None and timeline.fps is not None:
            payload["timestamps"] = [timeline.format_timestamp(i) for i in self.indices]
        return payload


def _check_budget(k: int, timeline: Timeline):
    if k <= 0:
        raise InvalidBudgetError(f"Frame budget must be positive, got {k}")
    if k > timeline.frame_count:
        raise OverBudgetError(f"Budget {k} exceeds the {timeline.frame_count} available frames")


def _pick_uniform(candidates: Sequence[int], n: int) -> List[int]:
    if n <= 0 or not candidates:
        return []
    n = min(n, len(candidates))
    return [candidates[offset] for offset in uniform_offsets(len(candidates), n)]


def uniform_sample(timeline: Timeline, k: int) -> SelectionResult:
    _check_budget(k, timeline)
    return SelectionResult(indices=tuple(uniform_offsets(timeline.frame_count, k)),
                           strategy=SamplingStrategy.UNIFORM)


def focused_sample(clips, k: int, timeline: Timeline, tolerance: int = 2) -> SelectionResult:
    """
    Select k frames exclusively from key clips, topping up from non-key frames
    after the last pick and finally from the earliest unused frames.
    """
    _check_budget(k, timeline)
    normalized = normalize_clipset(clips, timeline)
    if len(normalized) == 0:
        raise NoClipsError("Focused sampling needs at least one key clip")

    merged = merge_adjacent(normalized, tolerance)
    plan = allocate_with_guarantee(merged, k)

    picked: List[int] = []
    last_id = -1
    for clip, quota in zip(merged, plan.quotas):
        picks = pick_in_clip(clip, quota, after=last_id)
        if picks:
            picked.extend(picks)
            last_id = picks[-1]

    if len(picked) < k:
        mask = coverage_mask(merged, timeline)
        tail = [i for i in range(last_id + 1, timeline.frame_count) if not mask[i]]
        picked.extend(_pick_uniform(tail, k - len(picked)))

    if len(picked) < k:
        used = set(picked)
        spare = [i for i in range(timeline.frame_count) if i not in used]
        picked.extend(spare[:k - len(picked)])
        logger.debug(f"Focused sampling: filled from earliest unused frames to reach k={k}")

    return SelectionResult(indices=tuple(sorted(set(picked))), strategy=SamplingStrategy.FOCUSED,
                           clips=merged, plan=plan)


def hybrid_shares(predicted: int, background: int, k: int, alpha_pred: float = 4.0,
                  r_min: float = 0.5) -> HybridShares:
    """Split k between predicted and background frames; caps spill to the side with room."""
    alpha = exact(alpha_pred)
    if predicted == 0:
        k_p_raw = 0
    else:
        k_p_raw = round_half_up(Fraction(k) * alpha * predicted / (alpha * predicted + background))
    floor = math.ceil(Fraction(k) * exact(r_min))
    k_p = min(predicted, max(floor, k_p_raw))
    k_b = min(background, k - k_p)

    shortfall = k - k_p - k_b
    if shortfall > 0:
        extra = min(shortfall, predicted - k_p)
        k_p += extra
        k_b += min(shortfall - extra, background - k_b)
    return HybridShares(k_p_raw=k_p_raw, k_p=k_p, k_b=k_b, alpha_pred=alpha_pred, r_min=r_min)


def hybrid_sample(clips, k: int, timeline: Timeline, alpha_pred: float = 4.0,
                  r_min: float = 0.5) -> SelectionResult:
    """Densely inside key clips, sparsely over the background."""
    _check_budget(k, timeline)
    SamplingConfig(alpha_pred=alpha_pred, r_min=r_min)
    normalized = normalize_clipset(clips, timeline)
    if len(normalized) == 0:
        return uniform_sample(timeline, k)

    predicted, background = partition_frames(normalized, timeline)
    shares = hybrid_shares(len(predicted), len(background), k, alpha_pred, r_min)

    picked: List[int] = []
    plan = None
    if shares.k_p > 0:
        plan = allocate_with_guarantee(normalized, shares.k_p)
        for clip, quota in zip(normalized, plan.quotas):
            picked.extend(pick_in_clip(clip, quota))
    picked.extend(_pick_uniform(background, shares.k_b))

    return SelectionResult(indices=tuple(sorted(set(picked))), strategy=SamplingStrategy.HYBRID,
                           clips=normalized, plan=plan, shares=shares)


def select(strategy, clips, k: int, timeline: Timeline,
           config: SamplingConfig = SamplingConfig()) -> SelectionResult:
    """
    Dispatch to a sampler. Auto picks Focused for small budgets and Hybrid
    otherwise; an empty clip set always falls back to uniform sampling.
    """
    strategy = SamplingStrategy.parse(strategy)
    _check_budget(k, timeline)
    normalized = normalize_clipset(clips, timeline)
    if len(normalized) == 0 or strategy is SamplingStrategy.UNIFORM:
        return uniform_sample(timeline, k)
    if strategy is SamplingStrategy.AUTO:
        strategy = SamplingStrategy.FOCUSED if k <= config.focused_max_k else SamplingStrategy.HYBRID
        logger.debug(f"Auto dispatch: k={k} -> {strategy.value}")
    if strategy is SamplingStrategy.FOCUSED:
        return focused_sample(normalized, k, timeline, config.tolerance)
    return hybrid_sample(normalized, k, timeline, config.alpha_pred, config.r_min)
