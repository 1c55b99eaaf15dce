"""Bundled synthetic domain presets and their default simulation parameters.

Two presets mirror the shape statistics of the two supported mathematical
domains: "equation" (58 problems, 10 skills, 5.67 +/- 2.47 skills per problem)
and "graph" (31 problems, 13 skills, 8.57 +/- 8.41 skills per problem). Their
AFM defaults are artifact constants chosen so the reference experiment grid
produces the documented qualitative behavior out of the box.
"""

from __future__ import annotations

from .domain import AfmParams, BktParams, Domain
from .ingestion import SyntheticSpec, generate_synthetic

EQUATION = "equation"
GRAPH = "graph"

PRESET_ALIASES = {
    "equation": EQUATION,
    "equation-solving-like": EQUATION,
    "graph": GRAPH,
    "graph-interpretation-like": GRAPH,
}

PRESET_SPECS: dict[str, SyntheticSpec] = {
    EQUATION: SyntheticSpec(
        n_skills=10,
        n_problems=58,
        skills_per_problem_mean=5.67,
        skills_per_problem_sd=2.47,
        seed=522,
        skill_weight_decay=0.55,
        mean_skill_repeats=1.75,
        name="equation-solving-like",
    ),
    GRAPH: SyntheticSpec(
        n_skills=13,
        n_problems=31,
        skills_per_problem_mean=8.57,
        skills_per_problem_sd=8.41,
        seed=937,
        skill_weight_decay=0.55,
        mean_skill_repeats=1.3,
        name="graph-interpretation-like",
    ),
}

# Default AFM constants per preset. Difficulty runs linearly from the most
# common skill (beta_common) to the rarest (beta_rare): frequent skills are
# the easy ones, mirroring how often-exercised knowledge components behave.
_AFM_DEFAULTS = {
    EQUATION: dict(intercept=0.0, beta_common=-0.1, beta_rare=-1.3,
                   gamma=0.2, ability_mean=0.0, ability_sd=1.0),
    GRAPH: dict(intercept=0.0, beta_common=-0.1, beta_rare=-1.3,
                gamma=0.2, ability_mean=0.0, ability_sd=1.0),
}


def resolve_preset(name: str) -> str:
    key = PRESET_ALIASES.get(name.strip().lower())
    if key is None:
        raise KeyError(f"unknown preset {name!r}; expected one of "
                       f"{sorted(set(PRESET_ALIASES))}")
    return key


def preset_domain(name: str) -> Domain:
    return generate_synthetic(PRESET_SPECS[resolve_preset(name)])


def preset_afm(name: str, domain: Domain) -> AfmParams:
    cfg = _AFM_DEFAULTS[resolve_preset(name)]
    n = domain.n_skills
    common, rare = cfg["beta_common"], cfg["beta_rare"]
    if n > 1:
        difficulty = tuple(common + (rare - common) * k / (n - 1) for k in range(n))
    else:
        difficulty = (common,)
    return AfmParams(
        intercept=cfg["intercept"],
        difficulty=difficulty,
        learn_slope=(cfg["gamma"],) * n,
        ability_mean=cfg["ability_mean"],
        ability_sd=cfg["ability_sd"],
    )


def preset_bkt(domain: Domain) -> BktParams:
    return BktParams.uniform(domain.n_skills)
