"""Hierarchical plan induction toolkit for Lightbot-style gridworlds."""

from .canon import CanonReport, canonicalize, trace_equivalent
from .errors import (
    BudgetError,
    CapacityError,
    DomainError,
    EmptyCorpusError,
    HiplanError,
    MissingProgramError,
    NotSolvedError,
    OptimizationError,
    ParseError,
    StructureError,
    SupportMismatchError,
    UncalledSubroutineError,
    ValidationError,
)
from .fitting import (
    Dataset,
    FitResult,
    Record,
    bic,
    dataset_loglik,
    fit_model,
    js_divergence,
    lr_test,
    variability_report,
)
from .gen import (
    CandidateSub,
    Corpus,
    CorpusEntry,
    GenConfig,
    build_corpus,
    candidate_subroutines,
    postgoal_variants,
    recursive_variants,
    rewrite_with,
)
from .priors import (
    GrammarParams,
    ModelKind,
    ModelSpec,
    PosteriorTable,
    dp_call_logprob,
    grammar_logprior,
    mdl_logprior,
    model_logscore,
    posterior_over_corpus,
    sample_program,
    step_cost_logprior,
)
from .program import (
    Budget,
    Call,
    ExecutionResult,
    Outcome,
    Program,
    execute,
    parse_program,
    program_length,
    serialize_program,
)
from .render import render_tree
from .search import (
    HeuristicTable,
    SearchConfig,
    TraceSet,
    compute_heuristic,
    is_redundant,
    search_traces,
)
from .task import (
    Action,
    Cell,
    Dir,
    StateIndex,
    TaskSpec,
    WorldState,
    apply_action,
    enumerate_states,
    initial_state,
    is_goal,
    load_task,
)

__version__ = "0.1.0"
