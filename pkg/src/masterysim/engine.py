"""The repeated problem-level decision cycle, run per learner.

Each cycle: check the stopping rule, build the candidate skill pool (all
skills when no constraint is active, otherwise the constraint-filtered half of
the unmastered ones), let the strategy pick a skill, draw a problem containing
it, then simulate every step of that problem in order. The learner makes no
further choices until the whole problem is done.

Determinism: learner i draws from its own counter-based Philox stream keyed by
SplitMix64(experiment_seed, i), so results are identical whether learners run
serially or across worker processes, and reproducible across platforms.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .constraints import (
    apply_skill_constraint,
    constraint_weighting,
    difficulty_from_occurrences,
    sample_index,
)
from .domain import (
    AfmParams,
    BktParams,
    Domain,
    KnowledgeState,
    PolicyConfig,
    ProblemConstraint,
    SkillConstraint,
    validate_domain,
)
from .strategies import OUTCOME_INFORMED, StrategyMemory, project_outcomes, select_skill
from .student import simulate_step

_MASK64 = (1 << 64) - 1


def split_seed(seed: int, index: int) -> int:
    """Derive the per-learner RNG key: SplitMix64 finalizer over
    seed + (index + 1) * golden-gamma. Documented so other implementations can
    reproduce the exact learner streams."""
    z = (seed + (index + 1) * 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def learner_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=split_seed(seed, index)))


@dataclass(frozen=True)
class TraceEvent:
    """One simulated step, as written to trace output."""

    learner_id: int
    problem_seq: int
    problem_id: str
    step_index: int
    selected_skill: str
    skill_ids: tuple[str, ...]
    correct: bool
    post_mastery: tuple[float, ...]


@dataclass(frozen=True)
class LearnerResult:
    """Aggregated outcome of one learner's run."""

    learner_id: int
    ability: float
    opportunities: tuple[int, ...]
    success_count: tuple[int, ...]
    mastered_at: tuple[Optional[int], ...]
    final_mastery: tuple[float, ...]
    total_problems: int
    completed: bool


class CompiledDomain:
    """Domain flattened to dense skill indices for the simulation loop."""

    def __init__(self, domain: Domain):
        self.domain = domain
        self.skill_ids = [s.id for s in domain.skills]
        self.problem_ids = [p.id for p in domain.problems]
        index = domain.skill_index()
        self.steps: list[list[tuple[int, ...]]] = []
        self.occurrences: list[list[tuple[int, int]]] = []
        self.problems_by_skill: list[list[int]] = [[] for _ in domain.skills]
        for p_idx, problem in enumerate(domain.problems):
            steps = [tuple(index[sid] for sid in step.skill_ids) for step in problem.steps]
            self.steps.append(steps)
            counts: dict[int, int] = {}
            for step in steps:
                for k in step:
                    counts[k] = counts.get(k, 0) + 1
            self.occurrences.append(sorted(counts.items()))
            for k in counts:
                self.problems_by_skill[k].append(p_idx)

    @property
    def n_skills(self) -> int:
        return len(self.skill_ids)


def run_learner(compiled: CompiledDomain, policy: PolicyConfig, afm: AfmParams,
                bkt: BktParams, learner_id: int,
                collect_trace: bool = False) -> tuple[LearnerResult, Optional[list[TraceEvent]]]:
    """Run one learner until every skill is mastered or the problem cap hits."""
    rng = learner_rng(policy.seed, learner_id)
    ability = afm.ability_mean + afm.ability_sd * float(rng.standard_normal())
    threshold = policy.mastery_threshold
    state = KnowledgeState.initial(bkt, threshold)
    memory = StrategyMemory()
    trace: Optional[list[TraceEvent]] = [] if collect_trace else None

    n_skills = compiled.n_skills
    all_skills = list(range(n_skills))
    mastery = state.mastery
    needs_projections = policy.strategy in OUTCOME_INFORMED
    skill_constrained = policy.skill_constraint is not SkillConstraint.NONE
    problem_constrained = policy.problem_constraint is not ProblemConstraint.NONE

    total_problems = 0
    completed = False
    while True:
        unmastered = [k for k in range(n_skills) if mastery[k] < threshold]
        if not unmastered:
            completed = True
            break
        if total_problems >= policy.max_problems:
            break

        if skill_constrained:
            candidates = apply_skill_constraint(
                policy.skill_constraint, state, unmastered, threshold)
        else:
            candidates = all_skills

        projections = None
        if needs_projections:
            projections = {
                k: project_outcomes(state, k, afm, ability, bkt) for k in candidates
            }
        chosen = select_skill(policy.strategy, state, candidates, projections,
                              rng, memory, threshold)

        pool = compiled.problems_by_skill[chosen]
        if not pool:
            raise RuntimeError(
                f"no problems contain skill {compiled.skill_ids[chosen]}; "
                "domain should have been rejected by validate_domain")
        if problem_constrained:
            scores = [difficulty_from_occurrences(compiled.occurrences[p], state, bkt)
                      for p in pool]
            weighting = constraint_weighting(policy.problem_constraint, scores)
            p_idx = pool[sample_index(weighting, rng)]
        else:
            p_idx = pool[int(rng.integers(len(pool)))]

        for step_index, step in enumerate(compiled.steps[p_idx]):
            outcome = simulate_step(state, step, afm, ability, bkt, rng, threshold)
            if trace is not None:
                trace.append(TraceEvent(
                    learner_id=learner_id,
                    problem_seq=total_problems,
                    problem_id=compiled.problem_ids[p_idx],
                    step_index=step_index,
                    selected_skill=compiled.skill_ids[chosen],
                    skill_ids=tuple(compiled.skill_ids[k] for k in step),
                    correct=outcome.correct,
                    post_mastery=tuple(mastery[k] for k in step),
                ))
        total_problems += 1

    result = LearnerResult(
        learner_id=learner_id,
        ability=ability,
        opportunities=tuple(state.opportunities),
        success_count=tuple(state.success_count),
        mastered_at=tuple(state.mastered_at),
        final_mastery=tuple(mastery),
        total_problems=total_problems,
        completed=completed,
    )
    return result, trace


def _run_range(domain: Domain, policy: PolicyConfig, afm: AfmParams, bkt: BktParams,
               lo: int, hi: int, collect_trace: bool):
    compiled = CompiledDomain(domain)
    out = []
    for i in range(lo, hi):
        out.append(run_learner(compiled, policy, afm, bkt, i, collect_trace))
    return out


def run_experiment(domain: Domain, policy: PolicyConfig, afm: AfmParams,
                   bkt: BktParams, workers: int = 1,
                   trace_collector: Optional[list] = None) -> list[LearnerResult]:
    """Run policy.n_learners independent learners.

    Results are returned in learner-id order and are identical for any worker
    count. Pass a list as `trace_collector` to receive every TraceEvent, also
    in learner order.
    """
    violations = validate_domain(domain)
    if violations:
        raise ValueError("invalid domain: " + "; ".join(violations))
    if afm.n_skills != domain.n_skills or bkt.n_skills != domain.n_skills:
        raise ValueError("parameter vectors do not match the domain's skill count")

    n = policy.n_learners
    collect = trace_collector is not None
    if workers <= 1 or n == 1:
        pairs = _run_range(domain, policy, afm, bkt, 0, n, collect)
    else:
        chunk = max(1, -(-n // workers))
        ranges = [(lo, min(lo + chunk, n)) for lo in range(0, n, chunk)]
        pairs = []
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_run_range, domain, policy, afm, bkt, lo, hi, collect)
                for lo, hi in ranges
            ]
            for fut in futures:
                pairs.extend(fut.result())
    pairs.sort(key=lambda pair: pair[0].learner_id)
    if collect:
        for _, events in pairs:
            trace_collector.extend(events)
    return [result for result, _ in pairs]
