"""AFM step-performance prediction and the BKT knowledge-update rule.

These are the two generative engines of the simulation: AFM samples whether a
step is answered correctly, BKT tracks the per-skill mastery estimate that
drives task selection and the mastery-learning stopping rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .domain import AfmParams, BktParams, KnowledgeState, SkillBkt


@dataclass(frozen=True)
class StepOutcome:
    """Result of one simulated step: the sampled response and the probability
    it was sampled from."""

    correct: bool
    p_correct: float


def sigmoid(x: float) -> float:
    """Numerically stable logistic function."""
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def afm_predict(afm: AfmParams, ability: float, skill_indices: Sequence[int],
                practice_counts: Sequence[int]) -> float:
    """P(correct) for a step exercising the given skills.

    sigmoid(intercept + ability + sum_k (difficulty_k + learn_slope_k * count_k))
    where count_k is the number of prior practice opportunities on skill k.
    """
    if not skill_indices:
        raise ValueError("afm_predict requires at least one skill")
    z = afm.intercept + ability
    difficulty = afm.difficulty
    slope = afm.learn_slope
    for k in skill_indices:
        z += difficulty[k] + slope[k] * practice_counts[k]
    return sigmoid(z)


def bkt_update(p_mastery: float, correct: bool, params: SkillBkt) -> float:
    """Posterior-then-learn BKT update.

    Correct:   obs = p*(1-slip) / (p*(1-slip) + (1-p)*guess)
    Incorrect: obs = p*slip / (p*slip + (1-p)*(1-guess))
    Returns obs + (1-obs)*p_learn.

    A zero Bayes denominator (possible only at degenerate parameter corners,
    e.g. p=0 with guess=0 on a correct answer) falls back to obs = p so that
    large Monte Carlo sweeps never fault.
    """
    p = p_mastery
    if correct:
        num = p * (1.0 - params.p_slip)
        den = num + (1.0 - p) * params.p_guess
    else:
        num = p * params.p_slip
        den = num + (1.0 - p) * (1.0 - params.p_guess)
    obs = num / den if den > 0.0 else p
    return obs + (1.0 - obs) * params.p_learn


def is_mastered(state: KnowledgeState, skill: int, threshold: float) -> bool:
    """Mastery comparison is >= threshold (ties count as mastered)."""
    return state.mastery[skill] >= threshold


def simulate_step(state: KnowledgeState, skill_indices: Sequence[int],
                  afm: AfmParams, ability: float, bkt: BktParams, rng,
                  threshold: float) -> StepOutcome:
    """Simulate one step: a single Bernoulli response updates every skill on it.

    The draw uses the AFM-predicted probability given practice counts *before*
    this step. Each skill on the step then gets one opportunity, a BKT update
    with the shared outcome, and a latched `mastered_at` if it newly crosses
    the threshold. Multi-skill steps deliberately produce one observation, not
    one per skill.
    """
    p_correct = afm_predict(afm, ability, skill_indices, state.opportunities)
    correct = rng.random() < p_correct
    mastery = state.mastery
    opportunities = state.opportunities
    success = state.success_count
    mastered_at = state.mastered_at
    for k in skill_indices:
        opportunities[k] += 1
        if correct:
            success[k] += 1
        mastery[k] = bkt_update(mastery[k], correct, bkt.for_skill(k))
        if mastered_at[k] is None and mastery[k] >= threshold:
            mastered_at[k] = opportunities[k]
    return StepOutcome(correct=correct, p_correct=p_correct)
