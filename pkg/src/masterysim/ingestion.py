"""Transaction-log ingestion: parsing, preprocessing, typical-path extraction,
AFM parameter fitting, and synthetic domain generation.

The parser targets DataShop-style step-level exports (one row per transaction,
tab- or comma-delimited, multi-skill cells joined with "~~"). Real datasets
are not bundled; the synthetic generator reproduces their shape statistics.
"""

from __future__ import annotations

import csv
import io
import math
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional, Sequence

import numpy as np

from .domain import AfmParams, Domain, make_domain, validate_domain
from .student import sigmoid


class Outcome(str, Enum):
    CORRECT = "correct"
    INCORRECT = "incorrect"
    HINT = "hint"


#: Case-insensitive outcome labels accepted by the parser.
OUTCOME_LABELS = {
    "correct": Outcome.CORRECT,
    "ok": Outcome.CORRECT,
    "right": Outcome.CORRECT,
    "incorrect": Outcome.INCORRECT,
    "error": Outcome.INCORRECT,
    "bug": Outcome.INCORRECT,
    "wrong": Outcome.INCORRECT,
    "hint": Outcome.HINT,
    "help": Outcome.HINT,
}

#: Default column names, matching DataShop transaction exports.
DEFAULT_COLUMN_MAP = {
    "student": "Anon Student Id",
    "problem": "Problem Name",
    "step": "Step Name",
    "outcome": "Outcome",
    "attempt": "Attempt At Step",
    "skills": "KC (Default)",
}

#: Separator for multiple knowledge components inside one cell.
SKILL_SEPARATOR = "~~"


@dataclass(frozen=True)
class Transaction:
    student_id: str
    problem_id: str
    step_id: str
    skill_ids: tuple[str, ...]
    outcome: Outcome
    attempt_number: int
    row_index: int


@dataclass
class ParseReport:
    n_rows: int = 0
    n_parsed: int = 0
    skipped: list[tuple[int, str]] = field(default_factory=list)


def _sniff_delimiter(header_line: str) -> str:
    return "\t" if "\t" in header_line else ","


def parse_transactions(source, column_map: Optional[dict] = None,
                       delimiter: Optional[str] = None,
                       skill_separator: str = SKILL_SEPARATOR) -> tuple[list[Transaction], ParseReport]:
    """Parse a delimited transaction export into Transactions.

    `source` is a text file path or file-like object. Missing required columns
    are fatal; malformed rows (bad outcome label, bad attempt number, empty
    skill cell) are skipped and listed in the report.
    """
    colmap = dict(DEFAULT_COLUMN_MAP)
    if column_map:
        colmap.update(column_map)

    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, encoding="utf-8") as fh:
            text = fh.read()
    if not text.strip():
        raise ValueError("transaction input is empty (no header row)")

    first_line = text.splitlines()[0]
    delim = delimiter or _sniff_delimiter(first_line)
    reader = csv.DictReader(io.StringIO(text), delimiter=delim)
    header = reader.fieldnames or []
    for role, column in colmap.items():
        if column not in header:
            raise ValueError(f"missing required column {column!r} (role: {role})")

    report = ParseReport()
    transactions: list[Transaction] = []
    for row_index, row in enumerate(reader):
        report.n_rows += 1
        skill_cell = (row.get(colmap["skills"]) or "").strip()
        if not skill_cell:
            report.skipped.append((row_index, "no skill label"))
            continue
        outcome_label = (row.get(colmap["outcome"]) or "").strip().lower()
        outcome = OUTCOME_LABELS.get(outcome_label)
        if outcome is None:
            report.skipped.append((row_index, f"unknown outcome {outcome_label!r}"))
            continue
        try:
            attempt = int(row.get(colmap["attempt"]) or "")
        except ValueError:
            report.skipped.append((row_index, "bad attempt number"))
            continue
        if attempt < 1:
            report.skipped.append((row_index, f"attempt number {attempt} < 1"))
            continue
        skills = tuple(s.strip() for s in skill_cell.split(skill_separator) if s.strip())
        transactions.append(Transaction(
            student_id=row[colmap["student"]].strip(),
            problem_id=row[colmap["problem"]].strip(),
            step_id=row[colmap["step"]].strip(),
            skill_ids=skills,
            outcome=outcome,
            attempt_number=attempt,
            row_index=row_index,
        ))
        report.n_parsed += 1
    return transactions, report


def preprocess(transactions: Sequence[Transaction]) -> list[Transaction]:
    """Keep only first attempts and treat hint-first steps as incorrect.

    One transaction survives per (student, problem, step): the attempt-1 row
    with the lowest source row index. Idempotent.
    """
    out: list[Transaction] = []
    seen: set[tuple[str, str, str]] = set()
    for txn in sorted(transactions, key=lambda t: t.row_index):
        if txn.attempt_number != 1:
            continue
        key = (txn.student_id, txn.problem_id, txn.step_id)
        if key in seen:
            continue
        seen.add(key)
        if txn.outcome is Outcome.HINT:
            txn = Transaction(
                student_id=txn.student_id, problem_id=txn.problem_id,
                step_id=txn.step_id, skill_ids=txn.skill_ids,
                outcome=Outcome.INCORRECT, attempt_number=txn.attempt_number,
                row_index=txn.row_index)
        out.append(txn)
    return out


def extract_paths(transactions: Sequence[Transaction],
                  domain_name: str = "fitted") -> tuple[Domain, list[str]]:
    """Build a Domain whose problems carry their modal solution path.

    Per problem, each student's step sequence (ordered by row index, skills
    sorted within a step) is one observed path; the most frequent path wins,
    ties going to the path of the lexicographically smallest student id that
    exhibits it. Also returns notes about dropped problems.
    """
    by_problem: dict[str, dict[str, list[Transaction]]] = defaultdict(lambda: defaultdict(list))
    for txn in transactions:
        by_problem[txn.problem_id][txn.student_id].append(txn)

    notes: list[str] = []
    problems: list[tuple[str, list[tuple[str, ...]]]] = []
    for problem_id in sorted(by_problem):
        sequences: dict[tuple, list[str]] = defaultdict(list)
        for student_id, txns in by_problem[problem_id].items():
            txns.sort(key=lambda t: t.row_index)
            seq = tuple(tuple(sorted(t.skill_ids)) for t in txns)
            sequences[seq].append(student_id)
        if not sequences:
            notes.append(f"problem {problem_id} dropped: no retained transactions")
            continue
        best_seq = min(
            sequences.items(),
            key=lambda item: (-len(item[1]), min(item[1])),
        )[0]
        problems.append((problem_id, [list(step) for step in best_seq]))

    skill_ids = sorted({sid for _, steps in problems for step in steps for sid in step})
    domain = make_domain(domain_name, skill_ids, problems)
    return domain, notes


# ---------------------------------------------------------------------------
# AFM fitting
# ---------------------------------------------------------------------------

@dataclass
class AfmDesign:
    """Flattened design arrays for the AFM likelihood.

    Transaction t touches skills via the flat triples
    (txn_of[j], skill_of[j], count_of[j]) for j in the t-th slice.
    """

    y: np.ndarray            # (N,) 0/1 outcomes
    student_of: np.ndarray   # (N,) student indices
    txn_of: np.ndarray       # (M,) flat transaction index per skill slot
    skill_of: np.ndarray     # (M,) flat skill index per slot
    count_of: np.ndarray     # (M,) prior practice count per slot
    n_students: int
    n_skills: int
    student_ids: list[str]


def build_afm_design(transactions: Sequence[Transaction], domain: Domain) -> AfmDesign:
    """Assemble design arrays; practice counts replay the per-student history
    in row-index order, incrementing every skill on each step once."""
    skill_index = domain.skill_index()
    student_ids = sorted({t.student_id for t in transactions})
    student_index = {sid: i for i, sid in enumerate(student_ids)}

    ordered = sorted(transactions, key=lambda t: (t.student_id, t.row_index))
    counts: dict[tuple[int, int], int] = defaultdict(int)
    y, student_of = [], []
    txn_of, skill_of, count_of = [], [], []
    for t_idx, txn in enumerate(ordered):
        y.append(1.0 if txn.outcome is Outcome.CORRECT else 0.0)
        s = student_index[txn.student_id]
        student_of.append(s)
        for sid in txn.skill_ids:
            k = skill_index[sid]
            txn_of.append(t_idx)
            skill_of.append(k)
            count_of.append(counts[(s, k)])
            counts[(s, k)] += 1
    return AfmDesign(
        y=np.asarray(y, dtype=np.float64),
        student_of=np.asarray(student_of, dtype=np.intp),
        txn_of=np.asarray(txn_of, dtype=np.intp),
        skill_of=np.asarray(skill_of, dtype=np.intp),
        count_of=np.asarray(count_of, dtype=np.float64),
        n_students=len(student_ids),
        n_skills=domain.n_skills,
        student_ids=student_ids,
    )


def unpack_params(w: np.ndarray, design: AfmDesign):
    s, k = design.n_students, design.n_skills
    intercept = w[0]
    theta = w[1:1 + s]
    beta = w[1 + s:1 + s + k]
    gamma = w[1 + s + k:1 + s + 2 * k]
    return intercept, theta, beta, gamma


def afm_objective_and_grad(w: np.ndarray, design: AfmDesign,
                           l2: float = 1.0) -> tuple[float, np.ndarray]:
    """L2-penalized Bernoulli log-likelihood of the AFM model and its gradient.

    The penalty (l2/2)*||coef||^2 covers every coefficient except the global
    intercept.
    """
    intercept, theta, beta, gamma = unpack_params(w, design)
    z = np.full(design.y.shape, intercept)
    z += theta[design.student_of]
    contrib = beta[design.skill_of] + gamma[design.skill_of] * design.count_of
    np.add.at(z, design.txn_of, contrib)

    # log-likelihood via the numerically stable log(1 + exp(.))
    ll = float(np.sum(design.y * z - np.logaddexp(0.0, z)))
    ll -= 0.5 * l2 * (float(theta @ theta) + float(beta @ beta) + float(gamma @ gamma))

    p = 1.0 / (1.0 + np.exp(-z))
    residual = design.y - p

    grad = np.zeros_like(w)
    grad[0] = float(np.sum(residual))
    g_theta = np.zeros(design.n_students)
    np.add.at(g_theta, design.student_of, residual)
    slot_res = residual[design.txn_of]
    g_beta = np.zeros(design.n_skills)
    np.add.at(g_beta, design.skill_of, slot_res)
    g_gamma = np.zeros(design.n_skills)
    np.add.at(g_gamma, design.skill_of, slot_res * design.count_of)

    s = design.n_students
    k = design.n_skills
    grad[1:1 + s] = g_theta - l2 * theta
    grad[1 + s:1 + s + k] = g_beta - l2 * beta
    grad[1 + s + k:] = g_gamma - l2 * gamma
    return ll, grad


def _project(w: np.ndarray, design: AfmDesign) -> np.ndarray:
    """Clamp the learn-slope block to gamma >= 0."""
    out = w.copy()
    out[1 + design.n_students + design.n_skills:] = np.maximum(
        out[1 + design.n_students + design.n_skills:], 0.0)
    return out


@dataclass
class FitReport:
    converged: bool
    iterations: int
    log_likelihood: float
    penalized_objective: float
    n_transactions: int
    n_students: int
    n_skills: int
    separation: bool
    ability_mean: float
    ability_sd: float
    flags: list[str] = field(default_factory=list)

    def to_text(self) -> str:
        lines = [
            f"converged: {self.converged}",
            f"iterations: {self.iterations}",
            f"log_likelihood: {self.log_likelihood:.6f}",
            f"penalized_objective: {self.penalized_objective:.6f}",
            f"n_transactions: {self.n_transactions}",
            f"n_students: {self.n_students}",
            f"n_skills: {self.n_skills}",
            f"ability_mean: {self.ability_mean:.6f}",
            f"ability_sd: {self.ability_sd:.6f}",
        ]
        if self.separation:
            lines.append("flag: separation")
        lines.extend(f"flag: {f}" for f in self.flags)
        return "\n".join(lines) + "\n"


def fit_afm(transactions: Sequence[Transaction], domain: Domain, l2: float = 1.0,
            max_iter: int = 5000, tol: float = 1e-5) -> tuple[AfmParams, FitReport]:
    """Fit AFM by projected gradient ascent with step-halving line search.

    Maximizes the L2-penalized log-likelihood over (intercept, per-student
    ability, per-skill difficulty, per-skill learn slope >= 0). Converged when
    the projected-gradient max-norm drops below `tol`; otherwise returns the
    best iterate flagged as non-converged.
    """
    if not transactions:
        raise ValueError("fit_afm requires at least one transaction")
    design = build_afm_design(transactions, domain)
    per_skill_obs = np.bincount(design.skill_of, minlength=design.n_skills)
    if np.any(per_skill_obs == 0):
        missing = [domain.skills[k].id for k in np.where(per_skill_obs == 0)[0]]
        raise ValueError(f"no transactions observed for skills: {missing}")

    n_params = 1 + design.n_students + 2 * design.n_skills
    w = np.zeros(n_params)
    obj, grad = afm_objective_and_grad(w, design, l2)
    step = 1.0 / max(1, len(design.y))
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        # projected gradient: gamma components pinned at 0 with negative
        # gradient cannot move, so they do not count against convergence
        proj_grad = grad.copy()
        gamma_lo = 1 + design.n_students + design.n_skills
        gamma = w[gamma_lo:]
        pinned = (gamma <= 0.0) & (proj_grad[gamma_lo:] < 0.0)
        proj_grad[gamma_lo:][pinned] = 0.0
        if float(np.max(np.abs(proj_grad))) < tol:
            converged = True
            break

        improved = False
        trial_step = step
        for _ in range(40):
            w_new = _project(w + trial_step * grad, design)
            obj_new, grad_new = afm_objective_and_grad(w_new, design, l2)
            if obj_new > obj:
                improved = True
                break
            trial_step *= 0.5
        if not improved:
            break
        w, obj, grad = w_new, obj_new, grad_new
        step = trial_step * 1.5

    intercept, theta, beta, gamma = unpack_params(w, design)
    raw_ll = obj + 0.5 * l2 * (float(theta @ theta) + float(beta @ beta)
                               + float(gamma @ gamma))
    ability_mean = float(np.mean(theta))
    ability_sd = float(np.std(theta, ddof=1)) if design.n_students > 1 else 0.0
    outcomes = set(design.y.tolist())
    report = FitReport(
        converged=converged,
        iterations=iterations,
        log_likelihood=raw_ll,
        penalized_objective=obj,
        n_transactions=len(design.y),
        n_students=design.n_students,
        n_skills=design.n_skills,
        separation=len(outcomes) < 2,
        ability_mean=ability_mean,
        ability_sd=ability_sd,
    )
    params = AfmParams(
        intercept=float(intercept),
        difficulty=tuple(float(b) for b in beta),
        learn_slope=tuple(max(0.0, float(g)) for g in gamma),
        ability_mean=ability_mean,
        ability_sd=ability_sd,
    )
    return params, report


# ---------------------------------------------------------------------------
# Synthetic domains
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SyntheticSpec:
    """Shape parameters for a synthetic domain.

    Skills-per-problem counts are drawn from a normal clamped to
    [1, n_skills]; skills are arranged into steps of at most
    `max_skills_per_step` each.

    The generated curriculum mirrors how real tutoring domains organize
    content. Skills are split round-robin into `n_clusters` topical clusters,
    each headed by a very common skill, with the remaining members
    progressively rarer (geometric inclusion weights decay^rank within the
    cluster). Problems whose drawn skill count fits inside one cluster are
    cluster problems: they exercise one topic, repeating their specialized
    skills across steps (recursive multi-step structure, scaled by
    `mean_skill_repeats`); the smallest of them are focused drills pairing
    one rare skill with the cluster head. Problems whose drawn count exceeds
    the cluster size become cross-cluster bridges that touch each sampled
    skill about once. The skills-per-problem count distribution is drawn
    once from the clamped normal and preserved exactly; only which skills
    fill each problem depends on its kind.
    """

    n_skills: int
    n_problems: int
    skills_per_problem_mean: float
    skills_per_problem_sd: float
    seed: int
    max_skills_per_step: int = 2
    skill_weight_decay: float = 0.65
    skill_weights: Optional[tuple[float, ...]] = None
    mean_skill_repeats: float = 1.0
    n_clusters: int = 2
    name: str = "synthetic"

    def __post_init__(self):
        if self.n_skills < 1:
            raise ValueError("n_skills must be >= 1")
        if self.n_problems < self.n_skills:
            raise ValueError("n_problems must be >= n_skills (coverage guarantee)")
        if self.max_skills_per_step < 1:
            raise ValueError("max_skills_per_step must be >= 1")
        if not 0.0 < self.skill_weight_decay <= 1.0:
            raise ValueError("skill_weight_decay must be in (0, 1]")
        if self.mean_skill_repeats < 1.0:
            raise ValueError("mean_skill_repeats must be >= 1")
        if not 1 <= self.n_clusters <= self.n_skills:
            raise ValueError("n_clusters must be in [1, n_skills]")
        if self.skill_weights is not None:
            if len(self.skill_weights) != self.n_skills:
                raise ValueError("skill_weights must have one entry per skill")
            if any(w <= 0 for w in self.skill_weights):
                raise ValueError("skill_weights must be positive")


def generate_synthetic(spec: SyntheticSpec) -> Domain:
    """Generate a Domain matching the spec's shape statistics.

    Deterministic in spec.seed. A post-hoc repair appends a one-skill step to
    a random problem for any skill that ended up unused, so the result always
    passes validate_domain.
    """
    from .engine import split_seed  # local import to avoid a cycle

    rng = np.random.Generator(np.random.Philox(key=split_seed(spec.seed, 0)))
    n_skills = spec.n_skills
    width = len(str(max(n_skills - 1, spec.n_problems - 1, 1)))
    skill_ids = [f"s{k:0{width}d}" for k in range(n_skills)]

    # skill k belongs to cluster k % n_clusters; within a cluster, members are
    # ranked by index (rank 0 = the cluster head, the commonest skill)
    clusters = [[k for k in range(n_skills) if k % spec.n_clusters == c]
                for c in range(spec.n_clusters)]
    if spec.skill_weights is not None:
        global_weights = np.asarray(spec.skill_weights, dtype=float)
    else:
        within = {k: k // spec.n_clusters for k in range(n_skills)}
        global_weights = np.array([spec.skill_weight_decay ** within[k]
                                   for k in range(n_skills)])
    common_order = sorted(range(n_skills), key=lambda k: (-global_weights[k], k))
    rank = {k: i for i, k in enumerate(common_order)}

    counts = [
        int(min(max(round(rng.normal(spec.skills_per_problem_mean,
                                     spec.skills_per_problem_sd)), 1), n_skills))
        for _ in range(spec.n_problems)
    ]
    max_cluster = max(len(c) for c in clusters)
    cluster_problems = [p for p in range(spec.n_problems) if counts[p] <= max_cluster]
    # the smallest cluster problems become focused drills, cycling through
    # the rarer half of the skill catalog, rarest first
    small = [p for p in sorted(cluster_problems, key=lambda p: (counts[p], p))
             if 2 <= counts[p] <= 3]
    drill_rotation = [k for k in reversed(common_order)][:(n_skills + 1) // 2]
    focus_of = {p: drill_rotation[i % len(drill_rotation)]
                for i, p in enumerate(small[:2 * len(drill_rotation)])}

    def weighted_sample(members: list[int], size: int) -> list[int]:
        # weighted sampling without replacement (Efraimidis-Spirakis keys)
        w = np.array([global_weights[k] for k in members])
        keys = rng.random(len(members)) ** (1.0 / w)
        order = np.argsort(-keys)[:size]
        return [members[int(i)] for i in order]

    def repeats_for(k: int, drill: bool) -> int:
        # drills rehearse their focus skill heavily; broad problems revisit
        # a skill in rough proportion to how specialized it is
        if rank[k] == 0 or spec.mean_skill_repeats <= 1.0:
            return 1
        scale = 2.0 if drill else 0.6 * rank[k] / max(1, n_skills - 1)
        return 1 + int(rng.poisson(scale * (spec.mean_skill_repeats - 1.0)))

    problems_steps: list[list[list[str]]] = []
    next_cluster = 0
    for p in range(spec.n_problems):
        count = counts[p]
        placements: list[int] = []
        if p in focus_of:
            # focused drill: one rare skill repeated, plus common companions
            # (skipping the two commonest skills, which live in broad problems)
            focus = focus_of[p]
            companions = common_order[2:] if n_skills > 3 else common_order
            fillers = [k for k in companions if k != focus][:count - 1]
            placements = [focus] * repeats_for(focus, drill=True) + fillers
        elif count <= max_cluster and len(clusters[next_cluster]) >= count:
            # single-topic problem: skills from one cluster, rare ones repeated
            members = clusters[next_cluster]
            next_cluster = (next_cluster + 1) % spec.n_clusters
            for k in weighted_sample(members, count):
                placements.extend([k] * repeats_for(k, drill=False))
        else:
            # cross-cluster bridge: broad integrative problem, each skill once
            placements = weighted_sample(list(range(n_skills)), count)
        order = [int(k) for k in rng.permutation(placements)]
        steps: list[list[str]] = []
        i = 0
        while i < len(order):
            size = int(rng.integers(1, spec.max_skills_per_step + 1))
            size = min(size, len(order) - i)
            # never repeat a skill within a single step
            if size == 2 and order[i] == order[i + 1]:
                size = 1
            steps.append([skill_ids[k] for k in order[i:i + size]])
            i += size
        problems_steps.append(steps)

    problems = [(f"p{p:0{width}d}", problems_steps[p]) for p in range(spec.n_problems)]

    used = {sid for _, steps in problems for step in steps for sid in step}
    for k, sid in enumerate(skill_ids):
        if sid not in used:
            target = int(rng.integers(spec.n_problems))
            problems[target][1].append([sid])

    domain = make_domain(spec.name, skill_ids, problems)
    violations = validate_domain(domain)
    if violations:  # repair guarantees this never triggers
        raise RuntimeError(f"synthetic generator produced invalid domain: {violations}")
    return domain
