"""Command-line surface: simulate, fit, compare, generate-domain, validate.

Experiment runs are reproducible records: the config (INI format) plus a seed
fully determine every output byte. All config keys can be overridden by flags
(flags win), and --dump-config writes back the effective configuration.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import gzip
import hashlib
import io
import os
import statistics
import sys
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

from . import __version__
from .domain import (
    AfmParams,
    BktParams,
    Domain,
    PolicyConfig,
    ProblemConstraint,
    SkillConstraint,
    Strategy,
    load_afm_params,
    load_domain,
    save_afm_params,
    save_domain,
    validate_domain,
)
from .engine import run_experiment
from .ingestion import (
    SyntheticSpec,
    extract_paths,
    fit_afm,
    generate_synthetic,
    parse_transactions,
    preprocess,
)
from .metrics import CellSummary, cohens_d, overpractice, sample_sd, summarize_cell
from .presets import PRESET_ALIASES, PRESET_SPECS, preset_afm, preset_bkt, resolve_preset

STRATEGY_ALIASES = {
    "strength": Strategy.STRENGTH_TARGETING,
    "strength_targeting": Strategy.STRENGTH_TARGETING,
    "weakness": Strategy.WEAKNESS_TARGETING,
    "weakness_targeting": Strategy.WEAKNESS_TARGETING,
    "interleaving": Strategy.INTERLEAVING,
    "blocking": Strategy.BLOCKING,
    "random": Strategy.RANDOM,
    "max_usual_improvement": Strategy.MAX_USUAL_IMPROVEMENT,
    "max_usual": Strategy.MAX_USUAL_IMPROVEMENT,
    "max_usual_outcome": Strategy.MAX_USUAL_OUTCOME,
    "high_usual": Strategy.MAX_USUAL_OUTCOME,
    "min_worst_case_loss": Strategy.MIN_WORST_CASE_LOSS,
    "mwl": Strategy.MIN_WORST_CASE_LOSS,
}

SUMMARY_COLUMNS = [
    "strategy", "skill_constraint", "problem_constraint", "n_learners",
    "completion_rate", "overpractice_mean", "overpractice_sd",
    "overpractice_per_skill_mean", "problems_mean", "learners_without_mastery",
]

LEARNER_COLUMNS = ["learner_id", "completed", "total_problems", "overpractice",
                   "n_mastered"]

TRACE_COLUMNS = ["learner_id", "problem_seq", "problem_id", "step_index",
                 "selected_skill", "skill_ids", "correct", "post_mastery"]


class CliError(Exception):
    """Invalid configuration or input; maps to exit status 2."""


def parse_strategy(name: str) -> Strategy:
    key = name.strip().lower()
    if key not in STRATEGY_ALIASES:
        raise CliError(f"unknown strategy {name!r}; choose from "
                       f"{sorted(STRATEGY_ALIASES)}")
    return STRATEGY_ALIASES[key]


def parse_skill_constraint(name: str) -> SkillConstraint:
    try:
        return SkillConstraint(name.strip().lower())
    except ValueError:
        raise CliError(f"unknown skill constraint {name!r}; choose from "
                       f"{[c.value for c in SkillConstraint]}") from None


def parse_problem_constraint(name: str) -> ProblemConstraint:
    try:
        return ProblemConstraint(name.strip().lower())
    except ValueError:
        raise CliError(f"unknown problem constraint {name!r}; choose from "
                       f"{[c.value for c in ProblemConstraint]}") from None


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce one `simulate` invocation."""

    preset: Optional[str] = "equation"
    domain_file: Optional[str] = None
    params_file: Optional[str] = None
    strategies: tuple[Strategy, ...] = tuple(Strategy)
    skill_constraints: tuple[SkillConstraint, ...] = tuple(SkillConstraint)
    problem_constraints: tuple[ProblemConstraint, ...] = tuple(ProblemConstraint)
    n_learners: int = 1000
    mastery_threshold: float = 0.95
    max_problems: int = 2000
    seed: int = 42
    workers: int = 1
    out_dir: str = "out"
    per_learner: bool = True
    trace: bool = False

    def validate(self) -> None:
        if not self.strategies or not self.skill_constraints or not self.problem_constraints:
            raise CliError("experiment grid must be non-empty")
        if self.preset is None and self.domain_file is None:
            raise CliError("either a preset or a domain file is required")
        if self.n_learners < 1:
            raise CliError("n_learners must be >= 1")
        if self.max_problems < 1:
            raise CliError("max_problems must be >= 1")
        if not 0.5 < self.mastery_threshold < 1.0:
            raise CliError("mastery_threshold must be in (0.5, 1)")
        if self.workers < 1:
            raise CliError("workers must be >= 1")


def config_to_ini(config: ExperimentConfig) -> str:
    cp = configparser.ConfigParser()
    cp["domain"] = {}
    if config.preset is not None:
        cp["domain"]["preset"] = config.preset
    if config.domain_file is not None:
        cp["domain"]["file"] = config.domain_file
    if config.params_file is not None:
        cp["domain"]["params_file"] = config.params_file
    cp["grid"] = {
        "strategies": ", ".join(s.value for s in config.strategies),
        "skill_constraints": ", ".join(c.value for c in config.skill_constraints),
        "problem_constraints": ", ".join(c.value for c in config.problem_constraints),
    }
    cp["run"] = {
        "n_learners": str(config.n_learners),
        "mastery_threshold": repr(config.mastery_threshold),
        "max_problems": str(config.max_problems),
        "seed": str(config.seed),
        "workers": str(config.workers),
    }
    cp["output"] = {
        "dir": config.out_dir,
        "per_learner": str(config.per_learner).lower(),
        "trace": str(config.trace).lower(),
    }
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def config_from_ini(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise CliError(f"bad config file: {exc}") from None
    config = ExperimentConfig()
    if cp.has_section("domain"):
        config.preset = cp["domain"].get("preset") or None
        config.domain_file = cp["domain"].get("file") or None
        config.params_file = cp["domain"].get("params_file") or None
        if config.domain_file:
            config.preset = cp["domain"].get("preset") or None
    if cp.has_section("grid"):
        grid = cp["grid"]
        if "strategies" in grid:
            config.strategies = tuple(
                parse_strategy(s) for s in grid["strategies"].split(",") if s.strip())
        if "skill_constraints" in grid:
            config.skill_constraints = tuple(
                parse_skill_constraint(s) for s in grid["skill_constraints"].split(",")
                if s.strip())
        if "problem_constraints" in grid:
            config.problem_constraints = tuple(
                parse_problem_constraint(s) for s in grid["problem_constraints"].split(",")
                if s.strip())
    if cp.has_section("run"):
        run = cp["run"]
        try:
            config.n_learners = run.getint("n_learners", config.n_learners)
            config.mastery_threshold = run.getfloat(
                "mastery_threshold", config.mastery_threshold)
            config.max_problems = run.getint("max_problems", config.max_problems)
            config.seed = run.getint("seed", config.seed)
            config.workers = run.getint("workers", config.workers)
        except ValueError as exc:
            raise CliError(f"bad [run] value: {exc}") from None
    if cp.has_section("output"):
        out = cp["output"]
        config.out_dir = out.get("dir", config.out_dir)
        try:
            config.per_learner = out.getboolean("per_learner", config.per_learner)
            config.trace = out.getboolean("trace", config.trace)
        except ValueError as exc:
            raise CliError(f"bad [output] value: {exc}") from None
    return config


def config_hash(config: ExperimentConfig) -> str:
    return hashlib.sha256(config_to_ini(config).encode()).hexdigest()[:16]


def provenance_lines(config: ExperimentConfig) -> list[str]:
    return [
        f"# masterysim {__version__}",
        f"# seed: {config.seed}",
        f"# config-sha256: {config_hash(config)}",
    ]


def cell_slug(policy: PolicyConfig) -> str:
    return (f"{policy.strategy.value}__{policy.skill_constraint.value}"
            f"__{policy.problem_constraint.value}")


def load_inputs(config: ExperimentConfig) -> tuple[Domain, AfmParams, BktParams]:
    if config.domain_file:
        try:
            domain = load_domain(config.domain_file)
        except (OSError, ValueError, KeyError) as exc:
            raise CliError(f"cannot load domain {config.domain_file!r}: {exc}") from None
    else:
        try:
            domain = generate_synthetic(PRESET_SPECS[resolve_preset(config.preset)])
        except KeyError as exc:
            raise CliError(str(exc)) from None
    violations = validate_domain(domain)
    if violations:
        raise CliError("invalid domain: " + "; ".join(violations))
    if config.params_file:
        try:
            afm = load_afm_params(config.params_file, domain)
        except (OSError, ValueError, KeyError) as exc:
            raise CliError(f"cannot load params {config.params_file!r}: {exc}") from None
    elif config.preset:
        afm = preset_afm(config.preset, domain)
    else:
        raise CliError("a params file is required when simulating a custom domain")
    bkt = preset_bkt(domain)
    return domain, afm, bkt


def format_float(x: float) -> str:
    return f"{x:.6f}"


def write_summary_csv(path, summaries: Sequence[CellSummary],
                      config: ExperimentConfig) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for line in provenance_lines(config):
            fh.write(line + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SUMMARY_COLUMNS)
        for cell in summaries:
            writer.writerow([
                cell.policy.strategy.value,
                cell.policy.skill_constraint.value,
                cell.policy.problem_constraint.value,
                cell.n_learners,
                f"{cell.completion_rate:.4f}",
                format_float(cell.mean_overpractice),
                format_float(cell.sd_overpractice),
                format_float(cell.per_skill_overpractice),
                format_float(cell.mean_problems),
                cell.learners_without_mastery,
            ])


def write_skills_csv(path, cell: CellSummary, config: ExperimentConfig) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for line in provenance_lines(config):
            fh.write(line + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["skill_id", "n_mastered", "mean_opportunities_to_mastery",
                         "mean_overpractice"])
        for s in cell.per_skill:
            writer.writerow([
                s.skill_id,
                s.n_mastered,
                "" if s.mean_opportunities_to_mastery is None
                else format_float(s.mean_opportunities_to_mastery),
                "" if s.mean_overpractice is None else format_float(s.mean_overpractice),
            ])


def write_learners_csv(path, results, config: ExperimentConfig) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for line in provenance_lines(config):
            fh.write(line + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(LEARNER_COLUMNS)
        for r in results:
            writer.writerow([
                r.learner_id,
                int(r.completed),
                r.total_problems,
                format_float(overpractice(r)),
                sum(1 for m in r.mastered_at if m is not None),
            ])


def write_trace(path, events, config: ExperimentConfig) -> None:
    opener = gzip.open if str(path).endswith(".gz") else open
    with opener(path, "wt", encoding="utf-8", newline="") as fh:
        for line in provenance_lines(config):
            fh.write(line + "\n")
        fh.write("\t".join(TRACE_COLUMNS) + "\n")
        for e in events:
            fh.write("\t".join([
                str(e.learner_id),
                str(e.problem_seq),
                e.problem_id,
                str(e.step_index),
                e.selected_skill,
                ";".join(e.skill_ids),
                str(int(e.correct)),
                ";".join(format_float(m) for m in e.post_mastery),
            ]) + "\n")


def print_summary_table(summaries: Sequence[CellSummary], out=sys.stdout) -> None:
    header = (f"{'strategy':<24} {'skill_constraint':<21} {'problem_constraint':<19} "
              f"{'mean':>9} {'sd':>9} {'completion':>11}")
    print(header, file=out)
    print("-" * len(header), file=out)
    for cell in summaries:
        print(f"{cell.policy.strategy.value:<24} "
              f"{cell.policy.skill_constraint.value:<21} "
              f"{cell.policy.problem_constraint.value:<19} "
              f"{cell.mean_overpractice:>9.3f} {cell.sd_overpractice:>9.3f} "
              f"{cell.completion_rate:>11.3f}", file=out)


def cmd_simulate(args) -> int:
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                config = config_from_ini(fh.read())
        except OSError as exc:
            raise CliError(f"cannot read config: {exc}") from None
    else:
        config = ExperimentConfig()

    if args.preset is not None:
        config.preset = args.preset
        config.domain_file = None
    if args.domain is not None:
        config.domain_file = args.domain
    if args.params is not None:
        config.params_file = args.params
    if args.strategies is not None:
        config.strategies = tuple(parse_strategy(s) for s in args.strategies.split(","))
    if args.skill_constraints is not None:
        config.skill_constraints = tuple(
            parse_skill_constraint(s) for s in args.skill_constraints.split(","))
    if args.problem_constraints is not None:
        config.problem_constraints = tuple(
            parse_problem_constraint(s) for s in args.problem_constraints.split(","))
    if args.n_learners is not None:
        config.n_learners = args.n_learners
    if args.threshold is not None:
        config.mastery_threshold = args.threshold
    if args.max_problems is not None:
        config.max_problems = args.max_problems
    if args.seed is not None:
        config.seed = args.seed
    if args.workers is not None:
        config.workers = args.workers
    if args.out is not None:
        config.out_dir = args.out
    if args.per_learner is not None:
        config.per_learner = args.per_learner
    if args.trace:
        config.trace = True
    config.validate()

    if args.dump_config:
        sys.stdout.write(config_to_ini(config))
        return 0

    domain, afm, bkt = load_inputs(config)
    os.makedirs(config.out_dir, exist_ok=True)

    summaries = []
    skill_ids = [s.id for s in domain.skills]
    for strategy in config.strategies:
        for skill_c in config.skill_constraints:
            for problem_c in config.problem_constraints:
                policy = PolicyConfig(
                    strategy=strategy,
                    skill_constraint=skill_c,
                    problem_constraint=problem_c,
                    mastery_threshold=config.mastery_threshold,
                    n_learners=config.n_learners,
                    max_problems=config.max_problems,
                    seed=config.seed,
                )
                traces = [] if config.trace else None
                try:
                    results = run_experiment(domain, policy, afm, bkt,
                                             workers=config.workers,
                                             trace_collector=traces)
                except (ValueError, RuntimeError) as exc:
                    print(f"error: cell {cell_slug(policy)}: {exc}", file=sys.stderr)
                    return 1
                cell = summarize_cell(results, policy, skill_ids)
                summaries.append(cell)

                cell_dir = os.path.join(config.out_dir, "cells", cell_slug(policy))
                os.makedirs(cell_dir, exist_ok=True)
                write_skills_csv(os.path.join(cell_dir, "skills.csv"), cell, config)
                if config.per_learner:
                    write_learners_csv(os.path.join(cell_dir, "learners.csv"),
                                       results, config)
                if config.trace:
                    write_trace(os.path.join(cell_dir, "trace.tsv.gz"), traces, config)

    write_summary_csv(os.path.join(config.out_dir, "summary.csv"), summaries, config)
    print_summary_table(summaries)
    return 0


def read_learner_overpractice(path) -> list[float]:
    try:
        with open(path, encoding="utf-8") as fh:
            rows = [line for line in fh if not line.startswith("#")]
    except OSError as exc:
        raise CliError(f"cannot read results file {path!r}: {exc}") from None
    reader = csv.DictReader(rows)
    if reader.fieldnames is None or "overpractice" not in reader.fieldnames:
        raise CliError(f"{path!r} is not a per-learner results file")
    return [float(row["overpractice"]) for row in reader]


def cmd_compare(args) -> int:
    group_a = read_learner_overpractice(args.results_a)
    group_b = read_learner_overpractice(args.results_b)
    if len(group_a) < 2 or len(group_b) < 2:
        raise CliError("each cell needs at least two learners to compare")
    mean_a, mean_b = statistics.mean(group_a), statistics.mean(group_b)
    sd_a, sd_b = sample_sd(group_a), sample_sd(group_b)
    d = cohens_d(group_a, group_b)
    print(f"cell A: n={len(group_a)} mean={mean_a:.4f} sd={sd_a:.4f}")
    print(f"cell B: n={len(group_b)} mean={mean_b:.4f} sd={sd_b:.4f}")
    if d != d:  # NaN: zero pooled variance
        print("cohens_d: undefined (zero pooled variance)")
    else:
        print(f"cohens_d: {d:.4f}")
    return 0


def cmd_fit(args) -> int:
    try:
        transactions, report = parse_transactions(
            args.input, delimiter=args.delimiter, skill_separator=args.skill_separator)
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot parse {args.input!r}: {exc}") from None
    retained = preprocess(transactions)
    if not retained:
        raise CliError("no transactions retained after preprocessing")
    domain, notes = extract_paths(retained, domain_name=args.domain_name)
    violations = validate_domain(domain)
    if violations:
        raise CliError("extracted domain is invalid: " + "; ".join(violations))
    params, fit_report = fit_afm(retained, domain)

    save_domain(domain, args.domain_out)
    save_afm_params(params, domain, args.params_out)
    with open(args.report_out, "w", encoding="utf-8") as fh:
        fh.write(fit_report.to_text())
        for row_index, reason in report.skipped:
            fh.write(f"skipped row {row_index}: {reason}\n")
        for note in notes:
            fh.write(note + "\n")
    print(f"domain: {len(domain.problems)} problems, {domain.n_skills} skills "
          f"-> {args.domain_out}")
    print(f"params: converged={fit_report.converged} "
          f"iterations={fit_report.iterations} -> {args.params_out}")
    return 0


def cmd_generate_domain(args) -> int:
    if args.preset:
        try:
            spec = PRESET_SPECS[resolve_preset(args.preset)]
        except KeyError as exc:
            raise CliError(str(exc)) from None
    else:
        if args.skills is None or args.problems is None:
            raise CliError("either --preset or --skills/--problems is required")
        try:
            spec = SyntheticSpec(
                n_skills=args.skills,
                n_problems=args.problems,
                skills_per_problem_mean=args.mean,
                skills_per_problem_sd=args.sd,
                seed=args.seed,
                name=args.name,
            )
        except ValueError as exc:
            raise CliError(str(exc)) from None
    domain = generate_synthetic(spec)
    save_domain(domain, args.out)
    print(f"wrote {args.out}: {len(domain.problems)} problems, {domain.n_skills} skills")
    return 0


def cmd_validate(args) -> int:
    try:
        domain = load_domain(args.domain)
    except (OSError, ValueError, KeyError) as exc:
        raise CliError(f"cannot load domain: {exc}") from None
    violations = validate_domain(domain)
    if violations:
        for v in violations:
            print(v)
        return 1
    print(f"{args.domain}: valid ({domain.n_skills} skills, "
          f"{len(domain.problems)} problems)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="masterysim",
        description="Simulate learner task-selection strategies and system "
                    "constraints in mastery-based tutoring.")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run an experiment grid")
    sim.add_argument("--config", help="INI config file")
    sim.add_argument("--preset", help="bundled domain preset (equation | graph)")
    sim.add_argument("--domain", help="domain JSON file")
    sim.add_argument("--params", help="AFM params JSON file")
    sim.add_argument("--strategies", help="comma-separated strategy names")
    sim.add_argument("--skill-constraints", help="comma-separated constraint names")
    sim.add_argument("--problem-constraints", help="comma-separated constraint names")
    sim.add_argument("--n-learners", type=int)
    sim.add_argument("--threshold", type=float, help="mastery threshold")
    sim.add_argument("--max-problems", type=int)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--workers", type=int)
    sim.add_argument("--out", help="output directory")
    sim.add_argument("--per-learner", action=argparse.BooleanOptionalAction,
                     default=None, help="write per-learner results tables")
    sim.add_argument("--trace", action="store_true", help="write step-level traces")
    sim.add_argument("--dump-config", action="store_true",
                     help="print the effective config and exit")
    sim.set_defaults(func=cmd_simulate)

    fit = sub.add_parser("fit", help="fit AFM params from a transaction log")
    fit.add_argument("input", help="transaction export (tab- or comma-delimited)")
    fit.add_argument("--domain-out", default="domain.json")
    fit.add_argument("--params-out", default="afm_params.json")
    fit.add_argument("--report-out", default="fit_report.txt")
    fit.add_argument("--domain-name", default="fitted")
    fit.add_argument("--delimiter", help="override the sniffed delimiter")
    fit.add_argument("--skill-separator", default="~~",
                     help="separator for multi-skill cells")
    fit.set_defaults(func=cmd_fit)

    cmp_ = sub.add_parser("compare", help="effect size between two cells")
    cmp_.add_argument("results_a", help="per-learner results CSV for cell A")
    cmp_.add_argument("results_b", help="per-learner results CSV for cell B")
    cmp_.set_defaults(func=cmd_compare)

    gen = sub.add_parser("generate-domain", help="write a synthetic domain file")
    gen.add_argument("--preset", help="bundled preset name")
    gen.add_argument("--skills", type=int)
    gen.add_argument("--problems", type=int)
    gen.add_argument("--mean", type=float, default=5.67,
                     help="mean distinct skills per problem")
    gen.add_argument("--sd", type=float, default=2.47,
                     help="sd of distinct skills per problem")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--name", default="synthetic")
    gen.add_argument("--out", default="domain.json")
    gen.set_defaults(func=cmd_generate_domain)

    val = sub.add_parser("validate", help="check a domain file's invariants")
    val.add_argument("domain")
    val.set_defaults(func=cmd_validate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
