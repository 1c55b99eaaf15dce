"""The eight learner task-selection decision rules.

Every rule except Random is a deterministic function of the knowledge state,
the candidate set, the outcome projections, and a small per-learner memory.
All argmax/argmin ties break toward the lowest skill index.

The mastery-progress rules (everything except Minimize Worst Case Loss) act on
the unmastered members of the candidate set: they model learners practicing
what they have not yet mastered. The risk-averse rule considers every
candidate it is offered, mastered or not: maximizing the worst-case projected
mastery favors exactly the skills with the least left to lose, which is what
makes it produce redundant practice when the system imposes no constraint.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

from .domain import AfmParams, BktParams, KnowledgeState, Strategy
from .student import afm_predict, bkt_update

#: Strategies whose selection rule consumes outcome projections.
OUTCOME_INFORMED = frozenset({
    Strategy.MAX_USUAL_IMPROVEMENT,
    Strategy.MAX_USUAL_OUTCOME,
    Strategy.MIN_WORST_CASE_LOSS,
})


@dataclass(frozen=True)
class OutcomeProjection:
    """One-step projected mastery for a candidate skill.

    `best` / `worst` are the BKT posteriors after a hypothetical correct /
    incorrect attempt; `usual` is their expectation under the AFM-predicted
    correctness probability `p_correct`.
    """

    best: float
    worst: float
    usual: float
    p_correct: float


@dataclass
class StrategyMemory:
    """Per-learner strategy state: Blocking's current skill and Interleaving's
    round-robin cursor."""

    last_selected: Optional[int] = None
    rr_cursor: Optional[int] = None


def project_outcomes(state: KnowledgeState, skill: int, afm: AfmParams,
                     ability: float, bkt: BktParams) -> OutcomeProjection:
    """Project mastery after one virtual single-skill attempt on `skill`.

    Learners choose skills, not problems, so the projection models the
    skill-level decision with a single-skill virtual step even though real
    problems exercise several skills.
    """
    p = state.mastery[skill]
    params = bkt.for_skill(skill)
    best = bkt_update(p, True, params)
    worst = bkt_update(p, False, params)
    p_correct = afm_predict(afm, ability, (skill,), state.opportunities)
    usual = p_correct * best + (1.0 - p_correct) * worst
    return OutcomeProjection(best=best, worst=worst, usual=usual, p_correct=p_correct)


def _argmax(candidates: Sequence[int], key) -> int:
    best_k = candidates[0]
    best_v = key(best_k)
    for k in candidates[1:]:
        v = key(k)
        if v > best_v:
            best_k, best_v = k, v
    return best_k


def _argmin(candidates: Sequence[int], key) -> int:
    best_k = candidates[0]
    best_v = key(best_k)
    for k in candidates[1:]:
        v = key(k)
        if v < best_v:
            best_k, best_v = k, v
    return best_k


def select_skill(strategy: Strategy, state: KnowledgeState,
                 candidate_skills: Sequence[int],
                 projections: Optional[Mapping[int, OutcomeProjection]],
                 rng, memory: StrategyMemory, threshold: float) -> int:
    """Pick exactly one candidate skill according to the strategy.

    `candidate_skills` must be non-empty (the engine guarantees this);
    `projections` must cover every candidate for the outcome-informed
    strategies. Blocking and Interleaving update `memory` in place.
    """
    if not candidate_skills:
        raise ValueError("select_skill requires a non-empty candidate set")
    if strategy in OUTCOME_INFORMED:
        if projections is None:
            raise ValueError(f"{strategy.value} requires outcome projections")

    mastery = state.mastery
    candidates = sorted(candidate_skills)
    below = [k for k in candidates if mastery[k] < threshold]
    eligible = below if below else candidates

    if strategy is Strategy.STRENGTH_TARGETING:
        # argmax mastery among candidates below threshold; if every candidate
        # is already at/above threshold (engine edge case), argmax overall.
        return _argmax(eligible, lambda k: mastery[k])

    if strategy is Strategy.WEAKNESS_TARGETING:
        return _argmin(eligible, lambda k: mastery[k])

    if strategy is Strategy.INTERLEAVING:
        cursor = memory.rr_cursor
        pick = eligible[0]
        if cursor is not None:
            for k in eligible:
                if k > cursor:
                    pick = k
                    break
        memory.rr_cursor = pick
        return pick

    if strategy is Strategy.BLOCKING:
        last = memory.last_selected
        if last is not None and last in candidates and mastery[last] < threshold:
            return last
        pick = eligible[0]
        memory.last_selected = pick
        return pick

    if strategy is Strategy.RANDOM:
        return eligible[int(rng.integers(len(eligible)))]

    if strategy is Strategy.MAX_USUAL_IMPROVEMENT:
        return _argmax(eligible, lambda k: projections[k].usual - mastery[k])

    if strategy is Strategy.MAX_USUAL_OUTCOME:
        return _argmax(eligible, lambda k: projections[k].usual)

    if strategy is Strategy.MIN_WORST_CASE_LOSS:
        # Full candidate set on purpose: risk aversion does not rule out
        # re-practicing mastered skills.
        return _argmax(candidates, lambda k: projections[k].worst)

    raise ValueError(f"unknown strategy: {strategy!r}")
