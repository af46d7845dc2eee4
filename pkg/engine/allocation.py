"""
Budget Allocation Module
Priority-weighted apportionment of a frame budget across key clips.

Quotas follow k_j = k * w(t_j) * l_j / sum_i w(t_i) * l_i, rounded with the
largest-remainder (Hamilton) method so the quotas always sum to k, then
capped by clip length with the surplus re-apportioned among open clips.
Arithmetic is exact (fractions) so remainder ties are real ties.
"""

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

from .errors import InvalidBudgetError, NoClipsError, OverBudgetError
from .timeline import ClipSet, ClipSpan, KeyClip, Priority

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AllocationPlan:
    """Per-clip quotas aligned with a merged, sorted ClipSet."""
    quotas: Tuple[int, ...]
    target: int

    @property
    def total(self) -> int:
        return sum(self.quotas)

    def to_json(self, clips: Optional[ClipSet] = None) -> List[dict]:
        rows = []
        for index, quota in enumerate(self.quotas):
            row = {"clip": index, "quota": quota}
            if clips is not None:
                clip = clips[index]
                row.update(start=clip.span.start, end=clip.span.end, priority=clip.priority.value)
            rows.append(row)
        return rows


def round_half_up(value: Fraction) -> int:
    return math.floor(value + Fraction(1, 2))


def exact(value) -> Fraction:
    """Exact rational of a user-supplied number (decimal text, not binary float)."""
    if isinstance(value, Fraction):
        return value
    return Fraction(str(value))


def largest_remainder(ideals: Sequence[Fraction], total: int) -> List[int]:
    """
    Integer apportionment of `ideals` summing to `total`: floor everything,
    then hand the leftover units to the largest fractional remainders,
    earlier entries first on ties.
    """
    floors = [math.floor(x) for x in ideals]
    leftover = total - sum(floors)
    if leftover < 0:
        raise InvalidBudgetError(f"Ideals exceed the total {total}")
    order = sorted(range(len(ideals)), key=lambda j: (-(ideals[j] - floors[j]), j))
    quotas = list(floors)
    for position in range(leftover):
        quotas[order[position % len(order)]] += 1
    return quotas


def weighted_allocation(clips: ClipSet, k: int) -> AllocationPlan:
    if k <= 0:
        raise InvalidBudgetError(f"Frame budget must be positive, got {k}")
    if len(clips) == 0:
        raise NoClipsError("Cannot allocate a budget over an empty clip set")

    masses = [c.weighted_mass for c in clips]
    capacities = [c.span.length for c in clips]
    total_mass = sum(masses)
    quotas = largest_remainder([Fraction(k * m, total_mass) for m in masses], k)

    # Cap by clip length, re-apportion the surplus over clips with room left.
    while True:
        surplus = sum(max(0, q - cap) for q, cap in zip(quotas, capacities))
        if surplus == 0:
            break
        quotas = [min(q, cap) for q, cap in zip(quotas, capacities)]
        open_clips = [j for j, (q, cap) in enumerate(zip(quotas, capacities)) if q < cap]
        if not open_clips:
            logger.debug(f"Budget {k} exceeds total clip length {sum(capacities)}; {surplus} frames unassigned")
            break
        open_mass = sum(masses[j] for j in open_clips)
        shares = largest_remainder([Fraction(surplus * masses[j], open_mass) for j in open_clips], surplus)
        for j, share in zip(open_clips, shares):
            quotas[j] += share

    return AllocationPlan(quotas=tuple(quotas), target=k)


def _pick_donor(quotas: List[int], clips: ClipSet) -> Optional[int]:
    tiers = (
        (Priority.P2, 2),
        (Priority.P1, 2),
        (Priority.P2, 1),  # only when nothing richer is left
    )
    for priority, minimum in tiers:
        candidates = [j for j, c in enumerate(clips) if c.priority is priority and quotas[j] >= minimum]
        if candidates:
            return min(candidates, key=lambda j: (-quotas[j], -clips[j].span.start))
    return None


def enforce_p1_guarantee(plan: AllocationPlan, clips: ClipSet, k: int) -> AllocationPlan:
    """
    Give every P1 clip at least one frame by borrowing from donors, P2 first.

    When the budget is smaller than the number of P1 clips the guarantee is
    relaxed: the longest P1 clips get one frame each until the budget runs out.
    """
    quotas = list(plan.quotas)
    p1 = [j for j, c in enumerate(clips) if c.priority is Priority.P1]
    if not p1:
        return plan

    by_length = sorted(p1, key=lambda j: (-clips[j].span.length, clips[j].span.start))
    if k < len(p1):
        quotas = [0] * len(clips)
        for j in by_length[:max(k, 0)]:
            quotas[j] = 1
        return AllocationPlan(quotas=tuple(quotas), target=plan.target)

    for needy in (j for j in by_length if quotas[j] == 0):
        donor = _pick_donor(quotas, clips)
        if donor is None:
            break
        quotas[donor] -= 1
        quotas[needy] += 1
    return AllocationPlan(quotas=tuple(quotas), target=plan.target)


def spaced_offsets(length: int, n: int) -> List[int]:
    """Endpoint-inclusive integer linspace over positions 0..length-1."""
    if n == 1:
        return [(length - 1) // 2]
    return [(2 * i * (length - 1) + (n - 1)) // (2 * (n - 1)) for i in range(n)]


def uniform_offsets(length: int, n: int) -> List[int]:
    """Bin-centre positions floor((i + 0.5) * length / n)."""
    return [((2 * i + 1) * length) // (2 * n) for i in range(n)]


def equally_spaced(span: ClipSpan, n: int) -> List[int]:
    if n <= 0:
        raise InvalidBudgetError(f"Need a positive frame count, got {n}")
    if n > span.length:
        raise OverBudgetError(f"Cannot pick {n} distinct frames from a clip of length {span.length}")
    return [span.start + offset for offset in spaced_offsets(span.length, n)]


def allocate_with_guarantee(clips: ClipSet, k: int) -> AllocationPlan:
    return enforce_p1_guarantee(weighted_allocation(clips, k), clips, k)


def pick_in_clip(clip: KeyClip, quota: int, after: int = -1) -> List[int]:
    """Equally spaced picks inside the part of the clip strictly after `after`."""
    start = max(clip.span.start, after + 1)
    if quota <= 0 or start > clip.span.end:
        return []
    window = ClipSpan(start, clip.span.end)
    return equally_spaced(window, min(quota, window.length))
