"""Program priors: step cost, description length, and grammar induction.

The grammar-induction prior is a generative model: bodies have
geometrically distributed lengths, each instruction is a subroutine call
with probability p_call (else a uniform action), and call targets follow a
Dirichlet process, so often-used subroutines become more likely. Scoring
walks a program in first-use-expansion order and accumulates exactly the
probability that the sampler produces it.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import (
    BudgetError,
    DomainError,
    EmptyCorpusError,
    StructureError,
    UncalledSubroutineError,
)
from .gen import Corpus
from .program import Call, Program, program_length, require_solved
from .task import Action, TaskSpec

N_ACTIONS = len(Action)


@dataclass(frozen=True)
class GrammarParams:
    alpha: float
    p_call: float
    p_end: float

    def __post_init__(self) -> None:
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        for name in ("p_call", "p_end"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ValueError(f"{name} must lie in (0, 1)")


def step_cost_logprior(p: Program, task: TaskSpec) -> float:
    """Unnormalized log prior -|trace|; requires a goal-reaching program."""
    return -float(require_solved(task, p).steps)


def mdl_logprior(p: Program) -> float:
    """Unnormalized log prior -|program|, blind to hierarchical structure."""
    return -float(program_length(p))


def dp_call_logprob(
    counts: Mapping[int, int], n: int, choice: int | None, alpha: float
) -> float:
    """Log probability of the next call target under the Dirichlet process.

    `choice` is an existing subroutine index, or None for a new subroutine.
    """
    if n != sum(counts.values()):
        raise DomainError(f"n={n} does not match the count total {sum(counts.values())}")
    if choice is None:
        return math.log(alpha / (n + alpha))
    if counts.get(choice, 0) < 1:
        raise DomainError(f"subroutine {choice} has never been called")
    return math.log(counts[choice] / (n + alpha))


@dataclass(frozen=True)
class GrammarStats:
    """Structural summary sufficient to score a program in closed form.

    The Dirichlet process is exchangeable, so the call-target probability
    depends only on how many calls each subroutine receives:

        log p = n_bodies*log(p_end) + (length - n_bodies)*log(1 - p_end)
              + n_primitives*log((1 - p_call)/5) + n_calls*log(p_call)
              + n_subs*log(alpha) + sum_k log((m_k - 1)!)
              - [lgamma(alpha + n_calls) - lgamma(alpha)]
    """

    length: int
    n_bodies: int
    n_primitives: int
    n_calls: int
    n_subs: int
    sum_log_reuse: float


def grammar_stats(p: Program) -> GrammarStats:
    """Validate reachability and summarize a program for scoring.

    Walks main in first-use-expansion order: a call to an unseen subroutine
    descends into its body before continuing, with the callee registered
    first so self-recursive calls inside the body count as reuse.
    """
    counts: dict[int, int] = {}

    def visit(body) -> None:
        for ins in body:
            if isinstance(ins, Call):
                if ins.k > len(p.subs) or not p.subs[ins.k - 1]:
                    raise StructureError(f"call to empty subroutine p{ins.k}")
                if ins.k in counts:
                    counts[ins.k] += 1
                else:
                    counts[ins.k] = 1
                    visit(p.subs[ins.k - 1])

    visit(p.main)
    for k in range(1, len(p.subs) + 1):
        if p.subs[k - 1] and k not in counts:
            raise UncalledSubroutineError(f"subroutine p{k} is defined but never called")
    bodies = [p.main] + [p.subs[k - 1] for k in counts]
    n_calls = sum(counts.values())
    length = sum(len(b) for b in bodies)
    return GrammarStats(
        length=length,
        n_bodies=len(bodies),
        n_primitives=length - n_calls,
        n_calls=n_calls,
        n_subs=len(counts),
        sum_log_reuse=sum(math.lgamma(m) for m in counts.values()),
    )


def grammar_logprob_from_stats(stats: GrammarStats, g: GrammarParams) -> float:
    if stats.length == 0:
        return -math.inf
    return (
        stats.n_bodies * math.log(g.p_end)
        + (stats.length - stats.n_bodies) * math.log(1 - g.p_end)
        + stats.n_primitives * math.log((1 - g.p_call) / N_ACTIONS)
        + stats.n_calls * math.log(g.p_call)
        + stats.n_subs * math.log(g.alpha)
        + stats.sum_log_reuse
        - (math.lgamma(g.alpha + stats.n_calls) - math.lgamma(g.alpha))
    )


def grammar_logprior(p: Program, g: GrammarParams) -> float:
    """Exact log probability that the generative sampler produces p."""
    if not p.main:
        return -math.inf
    return grammar_logprob_from_stats(grammar_stats(p), g)


def sample_program(
    g: GrammarParams, seed: int, max_instructions: int = 10_000
) -> Program:
    """Draw one program from the grammar-induction prior.

    Subroutine count is unbounded here; draws with more than four
    subroutines cannot be serialized to the DSL but score normally.
    """
    rng = random.Random(seed)
    counts: list[int] = []  # calls per subroutine, index k-1
    bodies: list[list] = []
    budget = [max_instructions]

    def instruction():
        if budget[0] <= 0:
            raise BudgetError(f"sample exceeded {max_instructions} instructions")
        budget[0] -= 1
        if rng.random() < g.p_call:
            n = sum(counts)
            r = rng.random() * (n + g.alpha)
            acc = 0.0
            k = None
            for j, c in enumerate(counts):
                acc += c
                if r < acc:
                    k = j + 1
                    break
            if k is None:
                counts.append(1)
                bodies.append([])
                k = len(counts)
                bodies[k - 1] = subroutine()
            else:
                counts[k - 1] += 1
            return Call(k)
        return Action(rng.randrange(N_ACTIONS))

    def subroutine() -> list:
        body = [instruction()]
        while not rng.random() < g.p_end:
            body.append(instruction())
        return body

    main = subroutine()
    return Program(main=tuple(main), subs=tuple(tuple(b) for b in bodies))


def structure_key(p: Program) -> tuple:
    """Hashable identity for sampled programs, robust to any sub count."""
    return (tuple(p.main), tuple(tuple(b) for b in p.subs if b))


class ModelKind(Enum):
    RANDOM_CHOICE = "random_choice"
    STEP_COST = "step_cost"
    MDL = "mdl"
    GRAMMAR_INDUCTION = "grammar_induction"
    MDL_STEP_COST = "mdl_step_cost"
    GRAMMAR_STEP_COST = "grammar_step_cost"

    @property
    def uses_grammar(self) -> bool:
        return self in (ModelKind.GRAMMAR_INDUCTION, ModelKind.GRAMMAR_STEP_COST)

    @property
    def uses_step_cost(self) -> bool:
        return self in (
            ModelKind.STEP_COST,
            ModelKind.MDL_STEP_COST,
            ModelKind.GRAMMAR_STEP_COST,
        )

    @property
    def uses_mdl(self) -> bool:
        return self in (ModelKind.MDL, ModelKind.MDL_STEP_COST)

    @property
    def n_parameters(self) -> int:
        k = 0
        if self.uses_step_cost:
            k += 1  # beta_step_cost
        if self.uses_mdl:
            k += 1  # beta_mdl
        if self.uses_grammar:
            k += 3  # alpha, beta_grammar, p_call
        return k


@dataclass(frozen=True)
class ModelSpec:
    kind: ModelKind
    weights: dict = field(default_factory=dict)
    grammar: GrammarParams | None = None

    def __post_init__(self) -> None:
        for name, value in self.weights.items():
            if value < 0:
                raise ValueError(f"weight {name} must be nonnegative")
        if self.kind.uses_grammar and self.grammar is None:
            raise ValueError(f"model {self.kind.value} needs grammar parameters")

    def weight(self, name: str) -> float:
        return self.weights.get(name, 1.0)


def model_logscore(p: Program, task: TaskSpec, m: ModelSpec) -> float:
    """Weighted log prior of one program under a model configuration."""
    score = 0.0
    if m.kind.uses_step_cost:
        score += m.weight("step_cost") * step_cost_logprior(p, task)
    if m.kind.uses_mdl:
        score += m.weight("mdl") * mdl_logprior(p)
    if m.kind.uses_grammar:
        score += m.weight("grammar") * grammar_logprior(p, m.grammar)
    return score


@dataclass(frozen=True)
class CorpusFeatures:
    """Per-entry measures of a corpus as arrays, for vectorized scoring."""

    keys: tuple[str, ...]
    lengths: np.ndarray
    steps: np.ndarray
    n_bodies: np.ndarray
    n_primitives: np.ndarray
    n_calls: np.ndarray
    n_subs: np.ndarray
    sum_log_reuse: np.ndarray


def corpus_features(corpus: Corpus) -> CorpusFeatures:
    cached = getattr(corpus, "_features", None)
    if cached is not None:
        return cached
    stats = [grammar_stats(e.program) for e in corpus.entries]
    features = CorpusFeatures(
        keys=tuple(e.key for e in corpus.entries),
        lengths=np.array([e.length for e in corpus.entries], dtype=float),
        steps=np.array([e.steps for e in corpus.entries], dtype=float),
        n_bodies=np.array([s.n_bodies for s in stats], dtype=float),
        n_primitives=np.array([s.n_primitives for s in stats], dtype=float),
        n_calls=np.array([s.n_calls for s in stats], dtype=float),
        n_subs=np.array([s.n_subs for s in stats], dtype=float),
        sum_log_reuse=np.array([s.sum_log_reuse for s in stats], dtype=float),
    )
    object.__setattr__(corpus, "_features", features)
    return features


def grammar_scores(f: CorpusFeatures, g: GrammarParams) -> np.ndarray:
    return (
        f.n_bodies * math.log(g.p_end)
        + (f.lengths - f.n_bodies) * math.log(1 - g.p_end)
        + f.n_primitives * math.log((1 - g.p_call) / N_ACTIONS)
        + f.n_calls * math.log(g.p_call)
        + f.n_subs * math.log(g.alpha)
        + f.sum_log_reuse
        - (gammaln(g.alpha + f.n_calls) - gammaln(g.alpha))
    )


def model_scores(f: CorpusFeatures, m: ModelSpec) -> np.ndarray:
    """Vectorized model_logscore over a whole corpus."""
    scores = np.zeros(len(f.keys))
    if m.kind.uses_step_cost:
        scores += m.weight("step_cost") * -f.steps
    if m.kind.uses_mdl:
        scores += m.weight("mdl") * -f.lengths
    if m.kind.uses_grammar:
        scores += m.weight("grammar") * grammar_scores(f, m.grammar)
    return scores


@dataclass(frozen=True)
class PosteriorTable:
    keys: tuple[str, ...]
    log_scores: np.ndarray
    log_normalizer: float
    probs: np.ndarray

    def __post_init__(self) -> None:
        total = float(self.probs.sum())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"posterior sums to {total}, not 1")


def posterior_over_corpus(corpus: Corpus, m: ModelSpec) -> PosteriorTable:
    """Softmax of model scores over the corpus, computed in log space."""
    if len(corpus) == 0:
        raise EmptyCorpusError(f"corpus for task {corpus.task_id!r} is empty")
    f = corpus_features(corpus)
    scores = model_scores(f, m)
    log_z = float(logsumexp(scores))
    return PosteriorTable(
        keys=f.keys,
        log_scores=scores,
        log_normalizer=log_z,
        probs=np.exp(scores - log_z),
    )
