"""Sweep candidate AFM constants for the bundled presets and report the
statistics the reference experiment grid must satisfy.

Usage:
    python scripts/calibrate_presets.py --sweep          # coarse grid search
    python scripts/calibrate_presets.py                  # evaluate preset defaults
    python scripts/calibrate_presets.py --gamma 0.1 ...  # evaluate one combo
"""

from __future__ import annotations

import argparse
import itertools
import statistics
import time

from dataclasses import replace

from masterysim.domain import (
    AfmParams, PolicyConfig, ProblemConstraint, SkillConstraint, Strategy,
)
from masterysim.engine import run_experiment
from masterysim.ingestion import generate_synthetic
from masterysim.metrics import cohens_d, overpractice
from masterysim.presets import PRESET_SPECS, preset_bkt, preset_domain

S, P = SkillConstraint, ProblemConstraint


def afm_for(domain, intercept, beta_common, beta_rare, gamma, ability_sd):
    n = domain.n_skills
    if n > 1:
        difficulty = tuple(beta_common + (beta_rare - beta_common) * k / (n - 1)
                           for k in range(n))
    else:
        difficulty = (beta_common,)
    return AfmParams(intercept=intercept, difficulty=difficulty,
                     learn_slope=(gamma,) * n, ability_mean=0.0, ability_sd=ability_sd)


def cell_ops(domain, afm, bkt, strategy, skill_c, problem_c, n_learners, seed=42):
    policy = PolicyConfig(strategy=strategy, skill_constraint=skill_c,
                          problem_constraint=problem_c, n_learners=n_learners, seed=seed)
    results = run_experiment(domain, policy, afm, bkt)
    ops = [overpractice(r) for r in results]
    completion = sum(r.completed for r in results) / len(results)
    problems = statistics.mean(r.total_problems for r in results)
    return ops, completion, problems


def evaluate(preset, params, n_learners, verbose=True, decay=None, repeats=None):
    spec = PRESET_SPECS[preset]
    if decay is not None:
        spec = replace(spec, skill_weight_decay=decay)
    if repeats is not None:
        spec = replace(spec, mean_skill_repeats=repeats)
    domain = generate_synthetic(spec)
    bkt = preset_bkt(domain)
    afm = afm_for(domain, **params)
    t0 = time.time()
    mwl = Strategy.MIN_WORST_CASE_LOSS

    means, completions, problems = {}, {}, {}
    for strategy in Strategy:
        ops, comp, nprob = cell_ops(domain, afm, bkt, strategy, S.NONE, P.NONE, n_learners)
        means[strategy.value] = statistics.mean(ops)
        completions[strategy.value] = comp
        problems[strategy.value] = nprob
        if strategy is mwl:
            mwl_none_ops = ops

    mwl_ctm_ops, _, _ = cell_ops(domain, afm, bkt, mwl, S.CLOSER_TO_MASTERY, P.NONE, n_learners)
    mwl_ffm_ops, _, _ = cell_ops(domain, afm, bkt, mwl, S.FURTHER_FROM_MASTERY, P.NONE, n_learners)
    mwl_hard_ops, _, _ = cell_ops(domain, afm, bkt, mwl, S.NONE, P.PREFER_HARDER, n_learners)
    m_none = means[mwl.value]
    m_ctm = statistics.mean(mwl_ctm_ops)
    m_ffm = statistics.mean(mwl_ffm_ops)
    m_hard = statistics.mean(mwl_hard_ops)

    others = [means[s.value] for s in Strategy if s is not mwl]
    ratio = m_none / statistics.mean(others)

    stability = {}
    for strategy in (Strategy.WEAKNESS_TARGETING, Strategy.INTERLEAVING):
        vals = []
        for sc, pc in itertools.product(S, P):
            if sc is S.NONE and pc is P.NONE:
                vals.append(means[strategy.value])
                continue
            ops, _, _ = cell_ops(domain, afm, bkt, strategy, sc, pc, n_learners)
            vals.append(statistics.mean(ops))
        base = means[strategy.value]
        stability[strategy.value] = max(abs(v - base) / base for v in vals) if base else 9.9

    ranked = sorted(means.items(), key=lambda kv: kv[1])
    bottom3 = [name for name, _ in ranked[:3]]
    checks = {
        "ratio>=5": ratio >= 5.0,
        "ctm_cut>=80": m_ctm <= 0.2 * m_none,
        "d>1": cohens_d(mwl_none_ops, mwl_ctm_ops) > 1.0,
        "hard_cut>=80": m_hard <= 0.2 * m_none,
        "ffm_between": m_ctm < m_ffm < m_none,
        "wk_stable<30": stability["weakness_targeting"] < 0.30,
        "il_stable<30": stability["interleaving"] < 0.30,
        "bottom3": ("weakness_targeting" in bottom3
                    and "max_usual_improvement" in bottom3),
        "completion": min(completions.values()) >= 0.99,
    }
    n_pass = sum(checks.values())
    line = (f"[{n_pass}/9] {preset} {params} decay={decay} rep={repeats} "
            f"ratio={ratio:.2f} "
            f"none={m_none:.1f} ctm={m_ctm:.2f} ffm={m_ffm:.2f} hard={m_hard:.2f} "
            f"wk={means['weakness_targeting']:.2f}({100 * stability['weakness_targeting']:.0f}%) "
            f"il={means['interleaving']:.2f}({100 * stability['interleaving']:.0f}%) "
            f"fails={[k for k, v in checks.items() if not v]} "
            f"({time.time() - t0:.0f}s)")
    print(line, flush=True)
    if verbose:
        for name, value in ranked:
            print(f"    {name:24s} {value:8.3f} completion={completions[name]:.3f} "
                  f"problems={problems[name]:.1f}")
    return n_pass, checks


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n-learners", type=int, default=120)
    ap.add_argument("--preset", default="equation", choices=list(PRESET_SPECS))
    ap.add_argument("--sweep", action="store_true")
    ap.add_argument("--intercept", type=float, default=0.0)
    ap.add_argument("--beta-common", type=float, default=-0.1)
    ap.add_argument("--beta-rare", type=float, default=-1.3)
    ap.add_argument("--gamma", type=float, default=0.2)
    ap.add_argument("--ability-sd", type=float, default=1.0)
    args = ap.parse_args()

    if args.sweep:
        grid = itertools.product(
            (0.08, 0.15, 0.25),      # gamma
            (0.0, 0.3),              # beta_common
            (-1.4, -2.0),            # beta_rare
            (1.0, 1.5),              # ability_sd
            (0.45, 0.6),             # skill_weight_decay
            (1.5, 2.0),              # mean_skill_repeats
        )
        for gamma, bc, br, sd, decay, rep in grid:
            params = dict(intercept=0.0, beta_common=bc, beta_rare=br,
                          gamma=gamma, ability_sd=sd)
            evaluate(args.preset, params, args.n_learners, verbose=False,
                     decay=decay, repeats=rep)
    else:
        params = dict(intercept=args.intercept, beta_common=args.beta_common,
                      beta_rare=args.beta_rare, gamma=args.gamma,
                      ability_sd=args.ability_sd)
        evaluate(args.preset, params, args.n_learners)


if __name__ == "__main__":
    main()
