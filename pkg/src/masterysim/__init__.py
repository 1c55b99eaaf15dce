"""masterysim: simulation of learner task-selection strategies and system
constraints in mastery-based tutoring."""

from .domain import (
    AfmParams,
    BktParams,
    Domain,
    KnowledgeState,
    PolicyConfig,
    Problem,
    ProblemConstraint,
    Skill,
    SkillConstraint,
    Step,
    Strategy,
    load_domain,
    make_domain,
    save_domain,
    validate_domain,
)
from .engine import LearnerResult, TraceEvent, run_experiment, run_learner, split_seed
from .ingestion import SyntheticSpec, generate_synthetic
from .metrics import CellSummary, cohens_d, overpractice, summarize_cell
from .strategies import OutcomeProjection, StrategyMemory, project_outcomes, select_skill
from .student import StepOutcome, afm_predict, bkt_update, is_mastered, simulate_step

__version__ = "0.1.0"
