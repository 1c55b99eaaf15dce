"""Shared acceptance-oriented evaluation used by the calibration scripts:
runs the reference cells for one candidate parameterization and reports the
nine checks the bundled presets must satisfy."""

from __future__ import annotations

import itertools
import statistics
from dataclasses import replace

from masterysim.domain import (
    AfmParams, PolicyConfig, ProblemConstraint, SkillConstraint, Strategy,
)
from masterysim.engine import run_experiment
from masterysim.ingestion import generate_synthetic
from masterysim.metrics import cohens_d, overpractice
from masterysim.presets import PRESET_SPECS, preset_bkt

S, P = SkillConstraint, ProblemConstraint


def build_afm(n, intercept, beta_common, beta_rare, shape, gamma, sd):
    betas = tuple(beta_rare + (beta_common - beta_rare) * (1 - k / (n - 1)) ** shape
                  for k in range(n))
    return AfmParams(intercept=intercept, difficulty=betas, learn_slope=(gamma,) * n,
                     ability_mean=0.0, ability_sd=sd)


def tier_layout(n):
    """(commons, mids, rares) sizes: roughly 30% / 40% / 30% of the catalog."""
    n_commons = max(1, round(0.3 * n))
    n_rares = max(1, round(0.3 * n))
    return n_commons, n - n_commons - n_rares, n_rares


def tier_weights(n, w_mid, w_rare):
    n_c, n_m, n_r = tier_layout(n)
    return tuple([1.0] * n_c + [w_mid] * n_m + [w_rare] * n_r)


def tier_afm(n, beta_c, beta_m, beta_r, gamma, sd, intercept=0.0):
    n_c, n_m, n_r = tier_layout(n)
    betas = tuple([beta_c] * n_c + [beta_m] * n_m + [beta_r] * n_r)
    return AfmParams(intercept=intercept, difficulty=betas, learn_slope=(gamma,) * n,
                     ability_mean=0.0, ability_sd=sd)


def evaluate(preset, afm_params=None, n_learners=80, label="", seed=42, decay=None,
             repeats=None, clusters=None, weights=None, afm=None, verbose=False):
    spec = PRESET_SPECS[preset]
    if decay is not None:
        spec = replace(spec, skill_weight_decay=decay)
    if repeats is not None:
        spec = replace(spec, mean_skill_repeats=repeats)
    if clusters is not None:
        spec = replace(spec, n_clusters=clusters)
    if weights is not None:
        spec = replace(spec, skill_weights=weights)
    domain = generate_synthetic(spec)
    n = domain.n_skills
    bkt = preset_bkt(domain)
    if afm is None:
        afm = build_afm(n, **afm_params)

    cache = {}

    def cell(strategy, sc, pc):
        key = (strategy, sc, pc)
        if key not in cache:
            policy = PolicyConfig(strategy=strategy, skill_constraint=sc,
                                  problem_constraint=pc, n_learners=n_learners,
                                  seed=seed)
            res = run_experiment(domain, policy, afm, bkt)
            cache[key] = ([overpractice(r) for r in res],
                          statistics.mean(r.total_problems for r in res),
                          sum(r.completed for r in res) / len(res))
        return cache[key]

    means, mincomp = {}, 1.0
    for strat in Strategy:
        ops, probs, compl = cell(strat, S.NONE, P.NONE)
        means[strat.value] = statistics.mean(ops)
        mincomp = min(mincomp, compl)
    mwl = Strategy.MIN_WORST_CASE_LOSS
    none_ops, none_probs, _ = cell(mwl, S.NONE, P.NONE)
    ctm_ops, _, _ = cell(mwl, S.CLOSER_TO_MASTERY, P.NONE)
    ffm_ops, _, _ = cell(mwl, S.FURTHER_FROM_MASTERY, P.NONE)
    hard_ops, hard_probs, _ = cell(mwl, S.NONE, P.PREFER_HARDER)
    m_none, m_ctm, m_ffm, m_hard = (statistics.mean(o) for o in
                                    (none_ops, ctm_ops, ffm_ops, hard_ops))
    others = statistics.mean(v for k, v in means.items() if k != mwl.value)

    wk_vals, il_vals = [], []
    for sc, pc in itertools.product(S, P):
        ops, _, _ = cell(Strategy.WEAKNESS_TARGETING, sc, pc)
        wk_vals.append(statistics.mean(ops))
        ops, _, _ = cell(Strategy.INTERLEAVING, sc, pc)
        il_vals.append(statistics.mean(ops))
    wk_base = means["weakness_targeting"]
    il_base = means["interleaving"]
    wk_rel = max(abs(v - wk_base) / wk_base for v in wk_vals)
    il_rel = max(abs(v - il_base) / il_base for v in il_vals)
    ranked = sorted(means.items(), key=lambda kv: kv[1])
    bottom3 = [k for k, _ in ranked[:3]]
    ok = dict(
        ratio=m_none / others >= 5,
        ctm=m_ctm <= 0.2 * m_none,
        d=cohens_d(none_ops, ctm_ops) > 1,
        hard=m_hard <= 0.2 * m_none,
        ffm=m_ctm < m_ffm < m_none,
        wk=wk_rel < 0.3,
        il=il_rel < 0.3,
        b3=("weakness_targeting" in bottom3 and "max_usual_improvement" in bottom3),
        comp=mincomp >= 0.99,
    )
    print(f"{label} [{sum(ok.values())}/9] ratio={m_none / others:.2f} "
          f"none={m_none:.1f}({none_probs:.0f}p) ctm={m_ctm:.2f} ffm={m_ffm:.2f} "
          f"hard={m_hard:.2f}({hard_probs:.0f}p) "
          f"wk={wk_base:.2f}({100 * wk_rel:.0f}%) il={il_base:.2f}({100 * il_rel:.0f}%) "
          f"cuts: ctm={100 * (1 - m_ctm / m_none):.0f}% hard={100 * (1 - m_hard / m_none):.0f}% "
          f"comp={mincomp:.2f} fails={[k for k, v in ok.items() if not v]}", flush=True)
    if verbose:
        for name, value in ranked:
            print(f"    {name:24s} {value:8.3f}")
        print(f"    wk cells: {[round(v, 2) for v in wk_vals]}")
        print(f"    il cells: {[round(v, 2) for v in il_vals]}")
    return ok, means
