import itertools
import math
import random
from fractions import Fraction

from django.test import SimpleTestCase

from .allocation import (
    AllocationPlan,
    allocate_with_guarantee,
    enforce_p1_guarantee,
    equally_spaced,
    largest_remainder,
    pick_in_clip,
    weighted_allocation,
)
from .errors import InvalidBudgetError, NoClipsError, OverBudgetError
from .timeline import ClipSet, ClipSpan, KeyClip, Priority


def make_clips(layout):
    """layout: sequence of (length, priority) laid out left to right with a one-frame gap."""
    clips, cursor = [], 0
    for length, priority in layout:
        clips.append(KeyClip(ClipSpan(cursor, cursor + length - 1), priority))
        cursor += length + 1
    return ClipSet(tuple(clips))


def oracle_apportionment(clips, k):
    """
    Brute force: among all floor/ceil roundings of the ideal quotas summing to k,
    the one with the smallest total deviation, earliest clips first on ties.
    """
    masses = [c.priority.weight * c.span.length for c in clips]
    ideals = [Fraction(k * m, sum(masses)) for m in masses]
    floors = [math.floor(x) for x in ideals]
    leftover = k - sum(floors)
    best, best_cost = None, None
    for chosen in itertools.combinations(range(len(clips)), leftover):
        quotas = [f + (1 if j in chosen else 0) for j, f in enumerate(floors)]
        cost = sum(abs(q - x) for q, x in zip(quotas, ideals))
        if best_cost is None or cost < best_cost:
            best, best_cost = quotas, cost
    return ideals, best


def oracle_instances():
    priorities = (Priority.P1, Priority.P2)
    for k in range(1, 21):
        for length in range(1, 13):
            for priority in priorities:
                yield [(length, priority)], k
        for l1, l2 in itertools.product(range(1, 13), repeat=2):
            for p1, p2 in itertools.product(priorities, repeat=2):
                yield [(l1, p1), (l2, p2)], k
    rng = random.Random(20240611)
    for _ in range(1500):
        n = rng.randint(3, 6)
        layout = [(rng.randint(1, 12), rng.choice(priorities)) for _ in range(n)]
        yield layout, rng.randint(1, 20)


class WeightedAllocationTests(SimpleTestCase):

    def test_two_clip_example(self):
        clips = ClipSet((KeyClip(ClipSpan(10, 19), Priority.P1), KeyClip(ClipSpan(30, 39), Priority.P2)))
        self.assertEqual(weighted_allocation(clips, 6).quotas, (4, 2))

    def test_single_clip_takes_all(self):
        self.assertEqual(weighted_allocation(ClipSet((KeyClip(ClipSpan(0, 9), Priority.P1),)), 8).quotas, (8,))

    def test_cap_then_redistribute(self):
        clips = ClipSet((KeyClip(ClipSpan(0, 0), Priority.P1), KeyClip(ClipSpan(10, 19), Priority.P2)))
        self.assertEqual(weighted_allocation(clips, 4).quotas, (1, 3))
        # the short clip is capped at 1, its surplus moves to the open clip
        self.assertEqual(weighted_allocation(clips, 9).quotas, (1, 8))

    def test_budget_beyond_total_length(self):
        clips = make_clips([(2, Priority.P1), (3, Priority.P2)])
        self.assertEqual(weighted_allocation(clips, 10).quotas, (2, 3))

    def test_errors(self):
        with self.assertRaises(InvalidBudgetError):
            weighted_allocation(make_clips([(3, Priority.P1)]), 0)
        with self.assertRaises(NoClipsError):
            weighted_allocation(ClipSet(), 3)

    def test_largest_remainder_ties_go_to_earlier_entries(self):
        third = Fraction(1, 3)
        self.assertEqual(largest_remainder([third, third, third], 1), [1, 0, 0])
        self.assertEqual(largest_remainder([Fraction(3, 2), Fraction(1, 2)], 2), [2, 0])

    def test_matches_brute_force_oracle(self):
        checked = full_checks = 0
        for layout, k in oracle_instances():
            clips = make_clips(layout)
            ideals, expected = oracle_apportionment(clips, k)
            self.assertEqual(largest_remainder(ideals, k), expected, (layout, k))
            if all(q <= c.span.length for q, c in zip(expected, clips)):
                self.assertEqual(list(weighted_allocation(clips, k).quotas), expected, (layout, k))
                full_checks += 1
            checked += 1
        self.assertGreaterEqual(checked, 10_000)
        self.assertGreater(full_checks, 2_000)

    def test_quotas_respect_caps_and_budget(self):
        rng = random.Random(7)
        for _ in range(2000):
            layout = [(rng.randint(1, 12), rng.choice((Priority.P1, Priority.P2))) for _ in range(rng.randint(1, 6))]
            clips = make_clips(layout)
            k = rng.randint(1, 40)
            plan = weighted_allocation(clips, k)
            self.assertEqual(plan.total, min(k, clips.total_length))
            self.assertTrue(all(0 <= q <= c.span.length for q, c in zip(plan.quotas, clips)))


class P1GuaranteeTests(SimpleTestCase):

    def test_p2_donor_gives_a_frame(self):
        clips = make_clips([(1, Priority.P1), (40, Priority.P2)])
        plan = enforce_p1_guarantee(AllocationPlan((0, 3), 3), clips, 3)
        self.assertEqual(plan.quotas, (1, 2))

    def test_fixed_point(self):
        clips = make_clips([(4, Priority.P1), (4, Priority.P2)])
        plan = AllocationPlan((2, 1), 3)
        self.assertEqual(enforce_p1_guarantee(plan, clips, 3), plan)

    def test_relaxed_when_budget_is_short(self):
        clips = make_clips([(5, Priority.P1), (2, Priority.P1), (9, Priority.P1)])
        plan = enforce_p1_guarantee(weighted_allocation(clips, 2), clips, 2)
        self.assertEqual(plan.quotas, (1, 0, 1))

    def test_largest_p2_donor_first_later_start_on_ties(self):
        clips = make_clips([(3, Priority.P2), (1, Priority.P1), (3, Priority.P2)])
        plan = enforce_p1_guarantee(AllocationPlan((2, 0, 2), 4), clips, 4)
        self.assertEqual(plan.quotas, (2, 1, 1))

    def test_p1_donor_when_no_p2_can_give(self):
        clips = make_clips([(10, Priority.P1), (1, Priority.P1), (1, Priority.P2)])
        plan = enforce_p1_guarantee(AllocationPlan((3, 0, 1), 4), clips, 4)
        self.assertEqual(plan.quotas, (2, 1, 1))

    def test_every_p1_clip_served_when_budget_allows(self):
        rng = random.Random(99)
        for _ in range(10_000):
            layout = [(rng.randint(1, 30), rng.choice((Priority.P1, Priority.P2))) for _ in range(rng.randint(1, 8))]
            clips = make_clips(layout)
            k = rng.randint(1, 60)
            plan = allocate_with_guarantee(clips, k)
            self.assertEqual(plan.total, min(k, clips.total_length))
            if k >= clips.count(Priority.P1):
                for quota, clip in zip(plan.quotas, clips):
                    if clip.priority is Priority.P1:
                        self.assertGreaterEqual(quota, 1, (layout, k, plan.quotas))
            self.assertTrue(all(0 <= q <= c.span.length for q, c in zip(plan.quotas, clips)))


class EquallySpacedTests(SimpleTestCase):

    def test_examples(self):
        span = ClipSpan(10, 19)
        self.assertEqual(equally_spaced(span, 4), [10, 13, 16, 19])
        self.assertEqual(equally_spaced(span, 10), list(range(10, 20)))
        self.assertEqual(equally_spaced(span, 1), [14])

    def test_strictly_increasing_with_endpoints(self):
        for length in range(1, 40):
            span = ClipSpan(5, 5 + length - 1)
            for n in range(2, length + 1):
                picks = equally_spaced(span, n)
                self.assertEqual(len(set(picks)), n)
                self.assertEqual(picks, sorted(picks))
                self.assertEqual((picks[0], picks[-1]), (span.start, span.end))

    def test_errors(self):
        with self.assertRaises(OverBudgetError):
            equally_spaced(ClipSpan(0, 2), 4)
        with self.assertRaises(InvalidBudgetError):
            equally_spaced(ClipSpan(0, 2), 0)

    def test_pick_after_restriction(self):
        clip = KeyClip(ClipSpan(10, 19), Priority.P1)
        self.assertEqual(pick_in_clip(clip, 2, after=15), [16, 19])
        self.assertEqual(pick_in_clip(clip, 8, after=15), [16, 17, 18, 19])
        self.assertEqual(pick_in_clip(clip, 3, after=19), [])
