"""Core vocabulary shared across the simulator: skills, problems, domains,
model parameters, policies, and per-learner knowledge state.

Skills carry both an opaque string id (external identity) and a dense integer
index assigned at load time, so the simulation loop can use flat per-skill
vectors instead of dict lookups.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple, Optional, Sequence

DOMAIN_SCHEMA_VERSION = 1
PARAMS_SCHEMA_VERSION = 1

# TutorShop default BKT parameter values.
DEFAULT_P_INIT = 0.25
DEFAULT_P_LEARN = 0.22
DEFAULT_P_GUESS = 0.20
DEFAULT_P_SLIP = 0.10

DEFAULT_MASTERY_THRESHOLD = 0.95
DEFAULT_N_LEARNERS = 1000
DEFAULT_MAX_PROBLEMS = 2000


class Strategy(str, Enum):
    """Learner task-selection decision rules (stable config-file spellings)."""

    STRENGTH_TARGETING = "strength_targeting"
    WEAKNESS_TARGETING = "weakness_targeting"
    INTERLEAVING = "interleaving"
    BLOCKING = "blocking"
    RANDOM = "random"
    MAX_USUAL_IMPROVEMENT = "max_usual_improvement"
    MAX_USUAL_OUTCOME = "max_usual_outcome"
    MIN_WORST_CASE_LOSS = "min_worst_case_loss"


class SkillConstraint(str, Enum):
    """System-side restriction of the learner's selectable skill set."""

    NONE = "none"
    CLOSER_TO_MASTERY = "closer_to_mastery"
    FURTHER_FROM_MASTERY = "further_from_mastery"


class ProblemConstraint(str, Enum):
    """System-side bias over which problem is served for a chosen skill."""

    NONE = "none"
    PREFER_EASIER = "prefer_easier"
    PREFER_HARDER = "prefer_harder"


@dataclass(frozen=True)
class Skill:
    id: str
    index: int


@dataclass(frozen=True)
class Step:
    """One step of a problem's typical solution path; exercises >= 1 skill."""

    skill_ids: tuple[str, ...]


@dataclass(frozen=True)
class Problem:
    id: str
    steps: tuple[Step, ...]


@dataclass(frozen=True)
class Domain:
    """A skill catalog plus a problem catalog with typical solution paths."""

    name: str
    skills: tuple[Skill, ...]
    problems: tuple[Problem, ...]

    @property
    def n_skills(self) -> int:
        return len(self.skills)

    def skill_index(self) -> dict[str, int]:
        return {s.id: s.index for s in self.skills}


def make_domain(name: str, skill_ids: Sequence[str],
                problems: Sequence[tuple[str, Sequence[Sequence[str]]]]) -> Domain:
    """Build a Domain from plain ids, assigning dense skill indices by position."""
    skills = tuple(Skill(id=sid, index=i) for i, sid in enumerate(skill_ids))
    probs = tuple(
        Problem(id=pid, steps=tuple(Step(skill_ids=tuple(step)) for step in steps))
        for pid, steps in problems
    )
    return Domain(name=name, skills=skills, problems=probs)


def validate_domain(domain: Domain) -> list[str]:
    """Check all Domain invariants; returns one message per violation.

    Violations are data, not failures: an empty list means the domain is valid.
    """
    violations: list[str] = []
    seen_ids: set[str] = set()
    for skill in domain.skills:
        if skill.id in seen_ids:
            violations.append(f"duplicate skill id {skill.id}")
        seen_ids.add(skill.id)
    indices = sorted(s.index for s in domain.skills)
    if indices != list(range(len(domain.skills))):
        violations.append("skill indices are not a bijection onto 0..K-1")

    known = {s.id for s in domain.skills}
    used: set[str] = set()
    seen_pids: set[str] = set()
    for problem in domain.problems:
        if problem.id in seen_pids:
            violations.append(f"duplicate problem id {problem.id}")
        seen_pids.add(problem.id)
        if not problem.steps:
            violations.append(f"problem {problem.id} has no steps")
        for i, step in enumerate(problem.steps):
            if not step.skill_ids:
                violations.append(f"problem {problem.id} step {i} has no skills")
            for sid in step.skill_ids:
                if sid not in known:
                    violations.append(
                        f"problem {problem.id} step {i} references unknown skill {sid}")
                used.add(sid)
    for skill in domain.skills:
        if skill.id not in used:
            violations.append(f"unused skill {skill.id}")
    return violations


def domain_to_dict(domain: Domain) -> dict:
    return {
        "schema_version": DOMAIN_SCHEMA_VERSION,
        "name": domain.name,
        "skills": [s.id for s in domain.skills],
        "problems": [
            {"id": p.id, "steps": [list(step.skill_ids) for step in p.steps]}
            for p in domain.problems
        ],
    }


def domain_from_dict(data: dict) -> Domain:
    version = data.get("schema_version")
    if version != DOMAIN_SCHEMA_VERSION:
        raise ValueError(f"unsupported domain schema_version: {version!r}")
    return make_domain(
        name=data["name"],
        skill_ids=data["skills"],
        problems=[(p["id"], p["steps"]) for p in data["problems"]],
    )


def save_domain(domain: Domain, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(domain_to_dict(domain), fh, indent=1)
        fh.write("\n")


def load_domain(path) -> Domain:
    with open(path, encoding="utf-8") as fh:
        return domain_from_dict(json.load(fh))


class SkillBkt(NamedTuple):
    """BKT parameter quadruple for a single skill."""

    p_init: float
    p_learn: float
    p_guess: float
    p_slip: float


def _check_prob(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must be in [0,1], got {value}")


@dataclass(frozen=True)
class BktParams:
    """Per-skill BKT parameters; a single shared quadruple is the common case."""

    p_init: tuple[float, ...]
    p_learn: tuple[float, ...]
    p_guess: tuple[float, ...]
    p_slip: tuple[float, ...]

    def __post_init__(self):
        n = len(self.p_init)
        if not (len(self.p_learn) == len(self.p_guess) == len(self.p_slip) == n):
            raise ValueError("BKT parameter vectors must have equal length")
        for k in range(n):
            _check_prob("p_init", self.p_init[k])
            _check_prob("p_learn", self.p_learn[k])
            _check_prob("p_guess", self.p_guess[k])
            _check_prob("p_slip", self.p_slip[k])
            # identifiability guard
            if self.p_guess[k] + self.p_slip[k] >= 1.0:
                raise ValueError(
                    f"p_guess + p_slip must be < 1 (skill {k}: "
                    f"{self.p_guess[k]} + {self.p_slip[k]})")

    @classmethod
    def uniform(cls, n_skills: int, p_init: float = DEFAULT_P_INIT,
                p_learn: float = DEFAULT_P_LEARN, p_guess: float = DEFAULT_P_GUESS,
                p_slip: float = DEFAULT_P_SLIP) -> "BktParams":
        return cls(
            p_init=(p_init,) * n_skills,
            p_learn=(p_learn,) * n_skills,
            p_guess=(p_guess,) * n_skills,
            p_slip=(p_slip,) * n_skills,
        )

    def for_skill(self, k: int) -> SkillBkt:
        return SkillBkt(self.p_init[k], self.p_learn[k], self.p_guess[k], self.p_slip[k])

    @property
    def n_skills(self) -> int:
        return len(self.p_init)


@dataclass(frozen=True)
class AfmParams:
    """AFM logistic-model parameters.

    `difficulty` and `learn_slope` are per-skill (dense index order). Simulated
    learners draw their ability from Normal(ability_mean, ability_sd).
    """

    intercept: float
    difficulty: tuple[float, ...]
    learn_slope: tuple[float, ...]
    ability_mean: float = 0.0
    ability_sd: float = 1.0

    def __post_init__(self):
        if len(self.difficulty) != len(self.learn_slope):
            raise ValueError("difficulty and learn_slope must have equal length")
        for k, slope in enumerate(self.learn_slope):
            if slope < 0:
                raise ValueError(f"learn_slope must be >= 0 (skill {k}: {slope})")
        if self.ability_sd < 0:
            raise ValueError(f"ability_sd must be >= 0, got {self.ability_sd}")

    @property
    def n_skills(self) -> int:
        return len(self.difficulty)


def afm_params_to_dict(params: AfmParams, domain: Domain) -> dict:
    return {
        "schema_version": PARAMS_SCHEMA_VERSION,
        "intercept": params.intercept,
        "ability_mean": params.ability_mean,
        "ability_sd": params.ability_sd,
        "difficulty": {s.id: params.difficulty[s.index] for s in domain.skills},
        "learn_slope": {s.id: params.learn_slope[s.index] for s in domain.skills},
    }


def afm_params_from_dict(data: dict, domain: Domain) -> AfmParams:
    version = data.get("schema_version")
    if version != PARAMS_SCHEMA_VERSION:
        raise ValueError(f"unsupported params schema_version: {version!r}")
    difficulty = [0.0] * domain.n_skills
    slope = [0.0] * domain.n_skills
    for skill in domain.skills:
        difficulty[skill.index] = float(data["difficulty"][skill.id])
        slope[skill.index] = float(data["learn_slope"][skill.id])
    return AfmParams(
        intercept=float(data["intercept"]),
        difficulty=tuple(difficulty),
        learn_slope=tuple(slope),
        ability_mean=float(data.get("ability_mean", 0.0)),
        ability_sd=float(data.get("ability_sd", 1.0)),
    )


def save_afm_params(params: AfmParams, domain: Domain, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(afm_params_to_dict(params, domain), fh, indent=1)
        fh.write("\n")


def load_afm_params(path, domain: Domain) -> AfmParams:
    with open(path, encoding="utf-8") as fh:
        return afm_params_from_dict(json.load(fh), domain)


@dataclass(frozen=True)
class PolicyConfig:
    """One experimental cell: a strategy plus the system constraints in force."""

    strategy: Strategy
    skill_constraint: SkillConstraint = SkillConstraint.NONE
    problem_constraint: ProblemConstraint = ProblemConstraint.NONE
    mastery_threshold: float = DEFAULT_MASTERY_THRESHOLD
    n_learners: int = DEFAULT_N_LEARNERS
    max_problems: int = DEFAULT_MAX_PROBLEMS
    seed: int = 0

    def __post_init__(self):
        if not 0.5 < self.mastery_threshold < 1.0:
            raise ValueError(
                f"mastery_threshold must be in (0.5, 1), got {self.mastery_threshold}")
        if self.n_learners < 1:
            raise ValueError(f"n_learners must be >= 1, got {self.n_learners}")
        if self.max_problems < 1:
            raise ValueError(f"max_problems must be >= 1, got {self.max_problems}")


@dataclass
class KnowledgeState:
    """Per-learner, per-skill mastery estimates and practice tallies.

    `mastered_at[k]` latches the opportunity count at which mastery first
    reached the threshold; once set it is never cleared, even if mastery
    later dips below the threshold again.
    """

    mastery: list[float]
    opportunities: list[int]
    success_count: list[int]
    mastered_at: list[Optional[int]]

    @classmethod
    def initial(cls, bkt: BktParams, threshold: float) -> "KnowledgeState":
        n = bkt.n_skills
        mastery = [bkt.p_init[k] for k in range(n)]
        mastered_at: list[Optional[int]] = [
            0 if mastery[k] >= threshold else None for k in range(n)
        ]
        return cls(
            mastery=mastery,
            opportunities=[0] * n,
            success_count=[0] * n,
            mastered_at=mastered_at,
        )

    @property
    def n_skills(self) -> int:
        return len(self.mastery)
