"""
Reward Module
Downstream-answer reward and group-relative advantages for candidate selections.
"""

import math
from dataclasses import dataclass
from string import ascii_uppercase
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import InsufficientCandidatesError, InvalidParameterError

DEFAULT_PROBABILITY_FLOOR = 1e-9


@dataclass(frozen=True)
class AnswerDistribution:
    """Relative likelihoods of the candidate answers; need not sum to 1."""
    candidates: Tuple[str, ...]
    probabilities: Tuple[float, ...]
    correct_index: int

    def __post_init__(self):
        if len(self.candidates) < 2:
            raise InsufficientCandidatesError(f"Need at least 2 candidate answers, got {len(self.candidates)}")
        if len(self.probabilities) != len(self.candidates):
            raise InvalidParameterError("One probability per candidate is required")
        if any(p < 0 or math.isnan(p) for p in self.probabilities):
            raise InvalidParameterError("Probabilities must be non-negative")
        if not 0 <= self.correct_index < len(self.candidates):
            raise InvalidParameterError(f"correct_index {self.correct_index} out of range")

    @classmethod
    def from_probabilities(cls, probabilities: Sequence[float], correct_index: int,
                           labels: Optional[Sequence[str]] = None) -> "AnswerDistribution":
        probabilities = tuple(float(p) for p in probabilities)
        if len(probabilities) < 2:
            raise InsufficientCandidatesError(f"Need at least 2 candidate answers, got {len(probabilities)}")
        if labels is None:
            labels = [ascii_uppercase[i] if i < 26 else f"Y{i}" for i in range(len(probabilities))]
        return cls(tuple(labels), probabilities, int(correct_index))

    def normalized(self) -> "AnswerDistribution":
        total = sum(self.probabilities)
        if total <= 0:
            raise InvalidParameterError("Probabilities must have positive mass")
        return AnswerDistribution(self.candidates, tuple(p / total for p in self.probabilities), self.correct_index)


@dataclass(frozen=True)
class RewardConfig:
    temperature: float = 1.0
    probability_floor: float = DEFAULT_PROBABILITY_FLOOR

    def __post_init__(self):
        if not self.temperature > 0:
            raise InvalidParameterError(f"Temperature must be positive, got {self.temperature}")
        if not 0 < self.probability_floor < 1:
            raise InvalidParameterError(f"Probability floor must be in (0, 1), got {self.probability_floor}")


@dataclass(frozen=True)
class RolloutGroup:
    rewards: Tuple[float, ...]

    def __post_init__(self):
        if not self.rewards:
            raise InvalidParameterError("A rollout group needs at least one reward")


def reward(dist: AnswerDistribution, config: RewardConfig = RewardConfig()) -> float:
    """tanh of the tempered log-ratio between p(ans) and the mean incorrect probability."""
    floored = [max(p, config.probability_floor) for p in dist.probabilities]
    p_ans = floored[dist.correct_index]
    incorrect = [p for i, p in enumerate(floored) if i != dist.correct_index]
    mean_incorrect = sum(incorrect) / len(incorrect)
    return math.tanh(math.log(p_ans / mean_incorrect) / config.temperature)


def group_advantage(group: RolloutGroup) -> List[float]:
    """Mean-centred rewards, no standard-deviation scaling."""
    rewards = np.asarray(group.rewards, dtype=float)
    return [float(a) for a in rewards - rewards.mean()]


def score_group(distributions: Sequence[AnswerDistribution],
                config: RewardConfig = RewardConfig()) -> Dict[str, List[float]]:
    """Rewards and advantages for one batch line of candidate selections."""
    rewards = [reward(d, config) for d in distributions]
    return {"rewards": rewards, "advantages": group_advantage(RolloutGroup(tuple(rewards)))}
