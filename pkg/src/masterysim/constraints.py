"""System-side selection constraints.

Skill constraints shrink the learner's candidate set to the half of the
unmastered skills closer to (or further from) the mastery threshold. Problem
constraints bias which problem is served for a chosen skill via difficulty
weights normalized into a multinomial distribution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .domain import BktParams, KnowledgeState, Problem, ProblemConstraint, SkillConstraint

#: Fraction of the unmastered set retained by an active skill constraint.
DEFAULT_RETAIN_FRACTION = 0.5

#: Smoothing added to problem weights so no problem ever has zero probability.
WEIGHT_EPSILON = 1e-6


def apply_skill_constraint(constraint: SkillConstraint, state: KnowledgeState,
                           unmastered_skills: Sequence[int], threshold: float,
                           retain_fraction: float = DEFAULT_RETAIN_FRACTION) -> list[int]:
    """Restrict the unmastered skill set per the active constraint.

    CloserToMastery keeps the ceil(n * retain_fraction) skills with the
    highest mastery, FurtherFromMastery the same count with the lowest.
    The result is never empty and is returned in skill-index order.
    """
    if not unmastered_skills:
        raise ValueError("apply_skill_constraint requires a non-empty skill set")
    if constraint is SkillConstraint.NONE:
        return sorted(unmastered_skills)
    n = len(unmastered_skills)
    keep = max(1, math.ceil(n * retain_fraction))
    mastery = state.mastery
    if constraint is SkillConstraint.CLOSER_TO_MASTERY:
        ranked = sorted(unmastered_skills, key=lambda k: (-mastery[k], k))
    elif constraint is SkillConstraint.FURTHER_FROM_MASTERY:
        ranked = sorted(unmastered_skills, key=lambda k: (mastery[k], k))
    else:
        raise ValueError(f"unknown skill constraint: {constraint!r}")
    return sorted(ranked[:keep])


def skill_success_rate(state: KnowledgeState, skill: int, p_init: float) -> float:
    """Observed success rate for a skill; unseen skills fall back to p_init
    (equivalently a provisional failure rate of 1 - p_init)."""
    opportunities = state.opportunities[skill]
    if opportunities == 0:
        return p_init
    return state.success_count[skill] / opportunities


def difficulty_from_occurrences(occurrences: Sequence[tuple[int, int]],
                                state: KnowledgeState, bkt: BktParams) -> float:
    """Difficulty score from precomputed (skill, occurrence-count) pairs."""
    weighted = 0.0
    total = 0
    for skill, count in occurrences:
        weighted += skill_success_rate(state, skill, bkt.p_init[skill]) * count
        total += count
    return 1.0 - weighted / total


def problem_occurrences(problem: Problem, skill_index: dict[str, int]) -> list[tuple[int, int]]:
    """Count skill occurrences across a problem's steps, with multiplicity."""
    counts: dict[int, int] = {}
    for step in problem.steps:
        for sid in step.skill_ids:
            k = skill_index[sid]
            counts[k] = counts.get(k, 0) + 1
    return sorted(counts.items())


def problem_difficulty_score(problem: Problem, state: KnowledgeState,
                             bkt: BktParams, skill_index: dict[str, int]) -> float:
    """Occurrence-weighted failure rate of the skills in a problem's steps.

    0.0 means the learner has succeeded on every occurrence-weighted skill,
    1.0 that they have failed on all of them; always in [0, 1].
    """
    return difficulty_from_occurrences(problem_occurrences(problem, skill_index), state, bkt)


@dataclass(frozen=True)
class ProblemWeighting:
    """Normalized multinomial weights over a problem pool."""

    weights: tuple[float, ...]

    def __post_init__(self):
        if not self.weights:
            raise ValueError("empty problem weighting")
        if any(w < 0 for w in self.weights):
            raise ValueError("problem weights must be non-negative")
        total = sum(self.weights)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"normalized weights must sum to 1, got {total}")


def normalize_weights(raw: Sequence[float]) -> ProblemWeighting:
    total = sum(raw)
    if total <= 0:
        raise ValueError("weights must have positive total mass")
    return ProblemWeighting(weights=tuple(w / total for w in raw))


def constraint_weighting(constraint: ProblemConstraint,
                         scores: Sequence[float]) -> ProblemWeighting:
    """Turn difficulty scores into the multinomial the constraint draws from."""
    if constraint is ProblemConstraint.PREFER_EASIER:
        raw = [(1.0 - s) + WEIGHT_EPSILON for s in scores]
    elif constraint is ProblemConstraint.PREFER_HARDER:
        raw = [s + WEIGHT_EPSILON for s in scores]
    else:
        raw = [1.0] * len(scores)
    return normalize_weights(raw)


def sample_index(weighting: ProblemWeighting, rng) -> int:
    """One multinomial draw; consumes exactly one uniform variate."""
    u = rng.random()
    acc = 0.0
    weights = weighting.weights
    for i, w in enumerate(weights):
        acc += w
        if u < acc:
            return i
    return len(weights) - 1  # guard against rounding at u ~ 1


def apply_problem_constraint(constraint: ProblemConstraint,
                             problems_for_skill: Sequence[Problem],
                             state: KnowledgeState, rng, bkt: BktParams,
                             skill_index: dict[str, int]) -> str:
    """Pick one problem id from the pool for the chosen skill."""
    if not problems_for_skill:
        raise ValueError("apply_problem_constraint requires a non-empty pool")
    if constraint is ProblemConstraint.NONE:
        return problems_for_skill[int(rng.integers(len(problems_for_skill)))].id
    scores = [problem_difficulty_score(p, state, bkt, skill_index)
              for p in problems_for_skill]
    weighting = constraint_weighting(constraint, scores)
    return problems_for_skill[sample_index(weighting, rng)].id
