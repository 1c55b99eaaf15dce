"""Overpractice computation, per-cell aggregation, and effect sizes.

Overpractice for a learner is the mean, over the skills they mastered, of the
practice opportunities that arrived after the mastery estimate first reached
the threshold. A second aggregation view pools (learner, skill) pairs instead;
both are reported because either unit is a defensible reading of "aggregated
across all skills".
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import mean
from typing import Optional, Sequence

from .domain import PolicyConfig
from .engine import LearnerResult


def overpractice(result: LearnerResult) -> float:
    """Mean post-mastery opportunities across the learner's mastered skills.

    Unmastered skills (capped runs) are excluded from both numerator and
    denominator. A learner who mastered nothing scores 0.0; summaries count
    those learners separately as a warning signal.
    """
    total = 0
    n_mastered = 0
    for opportunities, mastered_at in zip(result.opportunities, result.mastered_at):
        if mastered_at is not None:
            total += opportunities - mastered_at
            n_mastered += 1
    if n_mastered == 0:
        return 0.0
    return total / n_mastered


def sample_sd(values: Sequence[float]) -> float:
    """Sample (n-1) standard deviation; 0.0 for fewer than two values."""
    n = len(values)
    if n < 2:
        return 0.0
    m = mean(values)
    return math.sqrt(sum((v - m) ** 2 for v in values) / (n - 1))


def cohens_d(group_a: Sequence[float], group_b: Sequence[float]) -> float:
    """Standardized mean difference with pooled standard deviation.

    Returns NaN when the pooled SD is zero (undefined effect size).
    """
    n_a, n_b = len(group_a), len(group_b)
    if n_a < 2 or n_b < 2:
        raise ValueError("cohens_d requires at least two values per group")
    mean_a, mean_b = mean(group_a), mean(group_b)
    var_a = sum((v - mean_a) ** 2 for v in group_a) / (n_a - 1)
    var_b = sum((v - mean_b) ** 2 for v in group_b) / (n_b - 1)
    pooled = math.sqrt(((n_a - 1) * var_a + (n_b - 1) * var_b) / (n_a + n_b - 2))
    if pooled == 0.0:
        return math.nan
    return (mean_a - mean_b) / pooled


@dataclass(frozen=True)
class SkillSummary:
    """Per-skill practice breakdown across the learners who mastered it."""

    skill_id: str
    n_mastered: int
    mean_opportunities_to_mastery: Optional[float]
    mean_overpractice: Optional[float]


@dataclass(frozen=True)
class CellSummary:
    """Descriptive statistics for one (strategy, constraints) experiment cell."""

    policy: PolicyConfig
    n_learners: int
    completion_rate: float
    mean_overpractice: float
    sd_overpractice: float
    per_skill_overpractice: float  # pooled (learner, skill) view
    mean_problems: float
    learners_without_mastery: int
    per_skill: tuple[SkillSummary, ...]


def summarize_cell(results: Sequence[LearnerResult], policy: PolicyConfig,
                   skill_ids: Sequence[str]) -> CellSummary:
    if not results:
        raise ValueError("summarize_cell requires at least one result")
    per_learner = [overpractice(r) for r in results]
    n_skills = len(skill_ids)

    pooled_total = 0
    pooled_count = 0
    mastered_counts = [0] * n_skills
    before_totals = [0] * n_skills
    after_totals = [0] * n_skills
    without_mastery = 0
    for r in results:
        any_mastered = False
        for k in range(n_skills):
            mastered_at = r.mastered_at[k]
            if mastered_at is None:
                continue
            any_mastered = True
            extra = r.opportunities[k] - mastered_at
            pooled_total += extra
            pooled_count += 1
            mastered_counts[k] += 1
            before_totals[k] += mastered_at
            after_totals[k] += extra
        if not any_mastered:
            without_mastery += 1

    per_skill = tuple(
        SkillSummary(
            skill_id=skill_ids[k],
            n_mastered=mastered_counts[k],
            mean_opportunities_to_mastery=(
                before_totals[k] / mastered_counts[k] if mastered_counts[k] else None),
            mean_overpractice=(
                after_totals[k] / mastered_counts[k] if mastered_counts[k] else None),
        )
        for k in range(n_skills)
    )
    return CellSummary(
        policy=policy,
        n_learners=len(results),
        completion_rate=sum(r.completed for r in results) / len(results),
        mean_overpractice=mean(per_learner),
        sd_overpractice=sample_sd(per_learner),
        per_skill_overpractice=pooled_total / pooled_count if pooled_count else 0.0,
        mean_problems=mean(r.total_problems for r in results),
        learners_without_mastery=without_mastery,
        per_skill=per_skill,
    )
