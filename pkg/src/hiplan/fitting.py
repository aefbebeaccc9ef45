"""Maximum-likelihood fitting of priors to observed program datasets.

Weights and the DP concentration are optimized on log scale and call
probability on logit scale with Nelder-Mead, restarted once from defaults
and repeatedly from sampled starts. The grammar models treat the body
termination probability as a nuisance marginalized over a fixed grid.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.optimize import minimize
from scipy.special import logsumexp
from scipy.stats import chi2

from .errors import MissingProgramError, OptimizationError, SupportMismatchError
from .gen import Corpus
from .priors import (
    CorpusFeatures,
    GrammarParams,
    ModelKind,
    ModelSpec,
    corpus_features,
    model_scores,
)
from .program import Program
from .util import rng_stream

log = logging.getLogger(__name__)

PEND_GRID = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
DEFAULT_RESTARTS = 51


@dataclass(frozen=True)
class Record:
    participant: str
    task: str
    program: Program
    key: str
    rt_seconds: float | None = None
    n_evals: int | None = None


@dataclass(frozen=True)
class Dataset:
    """Observed programs, already canonicalized against their tasks."""

    records: tuple[Record, ...]

    @cached_property
    def counts(self) -> dict[str, dict[str, int]]:
        """task id -> canonical program key -> number of observations."""
        out: dict[str, dict[str, int]] = {}
        for r in self.records:
            out.setdefault(r.task, {})
            out[r.task][r.key] = out[r.task].get(r.key, 0) + 1
        return out

    @property
    def n_observations(self) -> int:
        return len(self.records)


@dataclass(frozen=True)
class FitResult:
    model: ModelSpec
    loglik: float
    bic: float
    k: int
    n: int
    restarts_run: int
    best_restart: int


def bic(loglik: float, k: int, n: int) -> float:
    """Bayesian information criterion: k*ln(n) - 2*loglik (lower is better)."""
    return k * math.log(n) - 2.0 * loglik


def lr_test(loglik_null: float, loglik_alt: float, df: int) -> tuple[float, float]:
    """Likelihood-ratio statistic and chi-square upper-tail p-value."""
    stat = max(0.0, 2.0 * (loglik_alt - loglik_null))
    return stat, float(chi2.sf(stat, df))


def js_divergence(p: np.ndarray, q: np.ndarray) -> float:
    """Jensen-Shannon divergence (natural log) over a shared support."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise SupportMismatchError(f"supports differ: {p.shape} vs {q.shape}")
    for name, dist in (("p", p), ("q", q)):
        if abs(dist.sum() - 1.0) > 1e-6:
            raise SupportMismatchError(f"{name} sums to {dist.sum()}, not 1")
    m = 0.5 * (p + q)

    def kl(a: np.ndarray) -> float:
        mask = a > 0
        return float(np.sum(a[mask] * np.log(a[mask] / m[mask])))

    return 0.5 * (kl(p) + kl(q))


def _observation_arrays(
    data: Dataset, corpora: dict[str, Corpus]
) -> dict[str, tuple[CorpusFeatures, np.ndarray, np.ndarray]]:
    """Per task: corpus features, observed entry indices, observed counts."""
    out = {}
    for task_id, counts in sorted(data.counts.items()):
        corpus = corpora.get(task_id)
        if corpus is None:
            raise MissingProgramError(f"no corpus for task {task_id!r}")
        features = corpus_features(corpus)
        idx = []
        n_obs = []
        for key, count in sorted(counts.items()):
            pos = corpus.by_key.get(key)
            if pos is None:
                raise MissingProgramError(
                    f"observed program missing from corpus for task {task_id!r}:\n{key}"
                )
            idx.append(pos)
            n_obs.append(count)
        out[task_id] = (features, np.array(idx), np.array(n_obs, dtype=float))
    return out


def _loglik_at(obs, m: ModelSpec) -> float:
    total = 0.0
    for features, idx, n_obs in obs.values():
        scores = model_scores(features, m)
        log_z = logsumexp(scores)
        total += float(np.dot(n_obs, scores[idx] - log_z))
    return total


def _marginalized_loglik(obs, m: ModelSpec, pend_grid) -> float:
    per_grid = []
    for p_end in pend_grid:
        g = GrammarParams(alpha=m.grammar.alpha, p_call=m.grammar.p_call, p_end=p_end)
        per_grid.append(_loglik_at(obs, ModelSpec(m.kind, m.weights, g)))
    return float(logsumexp(per_grid) - math.log(len(pend_grid)))


def dataset_loglik(
    data: Dataset,
    corpora: dict[str, Corpus],
    m: ModelSpec,
    pend_grid: tuple[float, ...] = PEND_GRID,
) -> float:
    """Total log likelihood of the observations under the model.

    Grammar models marginalize the body-termination nuisance: the whole
    dataset likelihood is averaged over the grid in probability space.
    """
    obs = _observation_arrays(data, corpora)
    if m.kind.uses_grammar:
        return _marginalized_loglik(obs, m, pend_grid)
    return _loglik_at(obs, m)


def _param_names(kind: ModelKind) -> list[str]:
    names = []
    if kind.uses_grammar:
        names += ["alpha", "beta_grammar", "p_call"]
    if kind.uses_mdl:
        names += ["beta_mdl"]
    if kind.uses_step_cost:
        names += ["beta_step_cost"]
    return names


_PROB_PARAMS = {"p_call"}


def _spec_from_values(kind: ModelKind, values: dict[str, float]) -> ModelSpec:
    weights = {}
    if kind.uses_step_cost:
        weights["step_cost"] = values["beta_step_cost"]
    if kind.uses_mdl:
        weights["mdl"] = values["beta_mdl"]
    grammar = None
    if kind.uses_grammar:
        weights["grammar"] = values["beta_grammar"]
        grammar = GrammarParams(alpha=values["alpha"], p_call=values["p_call"], p_end=0.5)
    return ModelSpec(kind=kind, weights=weights, grammar=grammar)


def _to_internal(name: str, value: float) -> float:
    if name in _PROB_PARAMS:
        return math.log(value / (1 - value))
    return math.log(value)


def _from_internal(name: str, theta: float) -> float:
    if name in _PROB_PARAMS:
        return 1.0 / (1.0 + math.exp(-theta))
    return math.exp(theta)


def fit_model(
    kind: ModelKind,
    data: Dataset,
    corpora: dict[str, Corpus],
    restarts: int = DEFAULT_RESTARTS,
    seed: int = 0,
    pend_grid: tuple[float, ...] = PEND_GRID,
    maxiter: int = 2000,
) -> FitResult:
    """Maximize the dataset log likelihood over the model's free parameters.

    Restart 0 starts from defaults (positives at 1, probabilities at 1/2);
    the rest start from Exponential(rate 2) and Uniform(0,1) samples.
    Deterministic given the seed.
    """
    if not data.records:
        raise OptimizationError("empty dataset")
    obs = _observation_arrays(data, corpora)
    names = _param_names(kind)
    n = data.n_observations
    k = kind.n_parameters

    def loglik_of(values: dict[str, float]) -> float:
        m = _spec_from_values(kind, values)
        if kind.uses_grammar:
            return _marginalized_loglik(obs, m, pend_grid)
        return _loglik_at(obs, m)

    if not names:
        ll = loglik_of({})
        return FitResult(
            model=_spec_from_values(kind, {}),
            loglik=ll,
            bic=bic(ll, 0, n),
            k=0,
            n=n,
            restarts_run=1,
            best_restart=0,
        )

    def objective(theta: np.ndarray) -> float:
        values = {name: _from_internal(name, t) for name, t in zip(names, theta)}
        try:
            return -loglik_of(values)
        except (OverflowError, ValueError):
            return math.inf

    best: tuple[float, int, np.ndarray] | None = None
    for restart in range(restarts):
        if restart == 0:
            start = {name: (0.5 if name in _PROB_PARAMS else 1.0) for name in names}
        else:
            rng = rng_stream(seed, f"fit/restart/{restart}")
            start = {
                name: (
                    float(rng.uniform())
                    if name in _PROB_PARAMS
                    else float(rng.exponential(scale=0.5))
                )
                for name in names
            }
        x0 = np.array([_to_internal(name, v) for name, v in start.items()])
        f0 = objective(x0)
        if not math.isfinite(f0):
            continue
        res = minimize(
            objective,
            x0,
            method="Nelder-Mead",
            options={
                "maxiter": maxiter,
                "fatol": 1e-8 * max(1.0, abs(f0)),
                "xatol": 1e-6,
            },
        )
        if not math.isfinite(res.fun):
            continue
        if best is None or res.fun < best[0]:
            best = (float(res.fun), restart, res.x.copy())
    if best is None:
        raise OptimizationError(f"all {restarts} restarts failed for {kind.value}")
    fun, best_restart, x = best
    values = {name: _from_internal(name, t) for name, t in zip(names, x)}
    ll = -fun
    return FitResult(
        model=_spec_from_values(kind, values),
        loglik=ll,
        bic=bic(ll, k, n),
        k=k,
        n=n,
        restarts_run=restarts,
        best_restart=best_restart,
    )


def per_task_loglik(
    data: Dataset,
    corpora: dict[str, Corpus],
    m: ModelSpec,
    pend_grid: tuple[float, ...] = PEND_GRID,
) -> dict[str, float]:
    """Log likelihood decomposed by task, at the model's fitted parameters."""
    out = {}
    for task_id in sorted(data.counts):
        subset = Dataset(records=tuple(r for r in data.records if r.task == task_id))
        out[task_id] = dataset_loglik(subset, corpora, m, pend_grid)
    return out


def posterior_mixture(
    corpus: Corpus, m: ModelSpec, pend_grid: tuple[float, ...] = PEND_GRID
) -> np.ndarray:
    """Posterior probabilities over a corpus, averaging grammar models
    uniformly over the nuisance grid."""
    features = corpus_features(corpus)
    if not m.kind.uses_grammar:
        scores = model_scores(features, m)
        return np.exp(scores - logsumexp(scores))
    probs = np.zeros(len(features.keys))
    for p_end in pend_grid:
        g = GrammarParams(alpha=m.grammar.alpha, p_call=m.grammar.p_call, p_end=p_end)
        scores = model_scores(features, ModelSpec(m.kind, m.weights, g))
        probs += np.exp(scores - logsumexp(scores))
    return probs / len(pend_grid)


@dataclass(frozen=True)
class TaskVariability:
    task: str
    n_observations: int
    unique_programs: int
    modal_count: int
    modal_share: float
    js_grammar_vs_step_cost: float


def variability_report(
    data: Dataset,
    corpora: dict[str, Corpus],
    grammar_fit: FitResult | None = None,
    step_cost_fit: FitResult | None = None,
    restarts: int = DEFAULT_RESTARTS,
    seed: int = 0,
    pend_grid: tuple[float, ...] = PEND_GRID,
) -> list[TaskVariability]:
    """Per-task solution-variability summary.

    Reports the number of distinct canonical programs, the modal program's
    share, and the JS divergence between the fitted grammar-induction and
    step-cost posteriors over the task's corpus. Pass in existing fits to
    avoid refitting.
    """
    if grammar_fit is None:
        grammar_fit = fit_model(
            ModelKind.GRAMMAR_INDUCTION, data, corpora, restarts, seed, pend_grid
        )
    if step_cost_fit is None:
        step_cost_fit = fit_model(
            ModelKind.STEP_COST, data, corpora, restarts, seed, pend_grid
        )
    rows = []
    for task_id, counts in sorted(data.counts.items()):
        corpus = corpora[task_id]
        p = posterior_mixture(corpus, grammar_fit.model, pend_grid)
        q = posterior_mixture(corpus, step_cost_fit.model, pend_grid)
        total = sum(counts.values())
        modal = max(counts.values())
        rows.append(
            TaskVariability(
                task=task_id,
                n_observations=total,
                unique_programs=len(counts),
                modal_count=modal,
                modal_share=modal / total,
                js_grammar_vs_step_cost=js_divergence(p, q),
            )
        )
    return rows
