"""On-disk formats: task dirs, trace files, corpus files, datasets, reports."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from .canon import canonicalize
from .errors import ParseError
from .fitting import Dataset, FitResult, Record, TaskVariability
from .gen import Corpus, CorpusEntry
from .program import Program, parse_program, program_length, require_solved, serialize_program
from .search import TraceSet
from .task import Action, TaskSpec, load_task


def atomic_write(path: Path, text: str) -> None:
    """Write via a temp file and rename, so failures never corrupt output."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_task_file(path: Path) -> TaskSpec:
    return load_task(path.read_text())


def load_task_dir(path: Path) -> dict[str, TaskSpec]:
    """All *.json tasks in a directory, keyed by task id."""
    tasks = {}
    for file in sorted(path.glob("*.json")):
        task = load_task_file(file)
        if task.id in tasks:
            raise ParseError(f"duplicate task id {task.id!r} in {file}")
        tasks[task.id] = task
    return tasks


def trace_file_text(traces: TraceSet) -> str:
    header = f"# task={traces.task_id} max_cost={traces.max_cost} count={len(traces.traces)}"
    if traces.exhausted:
        header += " exhausted=1"
    lines = [header]
    lines += [" ".join(a.token for a in t) for t in traces.traces]
    return "\n".join(lines) + "\n"


def parse_trace_file(text: str) -> TraceSet:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# task="):
        raise ParseError("trace file must start with '# task=...' header")
    fields = dict(part.split("=", 1) for part in lines[0][2:].split())
    traces = tuple(
        tuple(Action.from_token(tok) for tok in line.split())
        for line in lines[1:]
        if line.strip()
    )
    return TraceSet(
        task_id=fields["task"],
        traces=traces,
        exhausted=fields.get("exhausted") == "1",
    )


def corpus_file_text(corpus: Corpus) -> str:
    parts = [f"# task={corpus.task_id} n={len(corpus)}"]
    for e in corpus.entries:
        header = f"## length={e.length} steps={e.steps}"
        if e.kind == "union":
            header += " unioned=1"
        parts.append(f"{header}\n{e.key.rstrip()}")
    return "\n\n".join(parts) + "\n"


def parse_corpus_file(text: str, task: TaskSpec) -> Corpus:
    blocks = [b for b in text.split("\n\n") if b.strip()]
    header = blocks[0].strip()
    if not header.startswith("# task="):
        raise ParseError("corpus file must start with '# task=...' header")
    fields = dict(part.split("=", 1) for part in header[2:].split())
    if fields["task"] != task.id:
        raise ParseError(f"corpus file is for task {fields['task']!r}, not {task.id!r}")
    entries = []
    for block in blocks[1:]:
        lines = block.splitlines()
        if not lines[0].startswith("## "):
            raise ParseError("corpus record must start with '## length=...'")
        meta = dict(part.split("=", 1) for part in lines[0][3:].split())
        program = parse_program("\n".join(lines[1:]))
        entries.append(
            CorpusEntry(
                program=program,
                key=serialize_program(program),
                length=int(meta["length"]),
                steps=int(meta["steps"]),
                kind="union" if meta.get("unioned") == "1" else "rewrite",
            )
        )
    entries.sort(key=lambda e: (e.length, e.steps, e.key))
    return Corpus(task_id=task.id, entries=tuple(entries))


def parse_dataset(text: str, tasks: dict[str, TaskSpec]) -> Dataset:
    """Parse JSON-lines observations, canonicalizing every program."""
    records = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as e:
            raise ParseError(f"dataset line {line_no}: invalid JSON ({e})") from None
        try:
            task = tasks[raw["task"]]
        except KeyError:
            raise ParseError(f"dataset line {line_no}: unknown task {raw.get('task')!r}") from None
        body_lines = [f"main: {' '.join(raw['program']['main'])}"]
        for k in range(1, 5):
            tokens = raw["program"].get(f"p{k}")
            if tokens:
                body_lines.append(f"p{k}: {' '.join(tokens)}")
        program = parse_program("\n".join(body_lines))
        require_solved(task, program)
        canonical, _ = canonicalize(task, program)
        records.append(
            Record(
                participant=str(raw["participant"]),
                task=task.id,
                program=canonical,
                key=serialize_program(canonical),
                rt_seconds=raw.get("rt_seconds"),
                n_evals=raw.get("n_evals"),
            )
        )
    return Dataset(records=tuple(records))


def dataset_line(
    participant: str,
    task_id: str,
    program: Program,
    rt_seconds: float | None = None,
    n_evals: int | None = None,
) -> str:
    body: dict = {"main": [_token(i) for i in program.main]}
    for k in range(1, 5):
        if program.subs[k - 1]:
            body[f"p{k}"] = [_token(i) for i in program.subs[k - 1]]
    return json.dumps(
        {
            "participant": participant,
            "task": task_id,
            "program": body,
            "rt_seconds": rt_seconds,
            "n_evals": n_evals,
        },
        sort_keys=True,
    )


def _token(ins) -> str:
    return ins.token if isinstance(ins, Action) else f"p{ins.k}"


def _fmt_params(fit: FitResult) -> str:
    parts = []
    if fit.model.kind.uses_grammar:
        g = fit.model.grammar
        parts.append(f"alpha={g.alpha!r}")
        parts.append(f"beta_grammar={fit.model.weight('grammar')!r}")
        parts.append(f"p_call={g.p_call!r}")
    if fit.model.kind.uses_mdl:
        parts.append(f"beta_mdl={fit.model.weight('mdl')!r}")
    if fit.model.kind.uses_step_cost:
        parts.append(f"beta_step_cost={fit.model.weight('step_cost')!r}")
    return " ".join(parts)


def fit_report_csv(fits: list[FitResult]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["model", "loglik", "bic", "k", "n", "parameters"])
    for fit in fits:
        writer.writerow(
            [fit.model.kind.value, repr(fit.loglik), repr(fit.bic), fit.k, fit.n, _fmt_params(fit)]
        )
    return buf.getvalue()


def per_task_bic_csv(rows: list[tuple[str, str, int, float, float]]) -> str:
    """Rows of (task, model, n, loglik, bic)."""
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["task", "model", "n", "loglik", "bic"])
    for task, model, n, ll, b in rows:
        writer.writerow([task, model, n, repr(ll), repr(b)])
    return buf.getvalue()


def variability_csv(rows: list[TaskVariability]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(
        ["task", "n_observations", "unique_programs", "modal_count", "modal_share",
         "js_grammar_vs_step_cost"]
    )
    for r in rows:
        writer.writerow(
            [r.task, r.n_observations, r.unique_programs, r.modal_count,
             repr(r.modal_share), repr(r.js_grammar_vs_step_cost)]
        )
    return buf.getvalue()


def program_hash(key: str) -> str:
    return hashlib.sha256(key.encode()).hexdigest()[:12]


def scores_csv(corpora: dict[str, Corpus], fits: list[FitResult]) -> str:
    """Per-program log scores and posterior probabilities per fitted model.

    Grammar models marginalize the termination nuisance uniformly over the
    grid, both for the score and for the posterior mixture.
    """
    from .fitting import PEND_GRID, posterior_mixture
    from .priors import GrammarParams, ModelSpec, corpus_features, model_scores

    buf = io.StringIO()
    writer = csv.writer(buf)
    header = ["task", "program_hash", "length", "steps"]
    for fit in fits:
        header += [f"{fit.model.kind.value}_logscore", f"{fit.model.kind.value}_posterior"]
    writer.writerow(header)
    for task_id in sorted(corpora):
        corpus = corpora[task_id]
        features = corpus_features(corpus)
        columns = []
        for fit in fits:
            m = fit.model
            if m.kind.uses_grammar:
                per_grid = []
                for p_end in PEND_GRID:
                    g = GrammarParams(m.grammar.alpha, m.grammar.p_call, p_end)
                    per_grid.append(model_scores(features, ModelSpec(m.kind, m.weights, g)))
                scores = logsumexp(np.stack(per_grid), axis=0) - math.log(len(PEND_GRID))
            else:
                scores = model_scores(features, m)
            columns.append((scores, posterior_mixture(corpus, m, PEND_GRID)))
        for i, e in enumerate(corpus.entries):
            row = [task_id, program_hash(e.key), e.length, e.steps]
            for scores, probs in columns:
                row += [repr(float(scores[i])), repr(float(probs[i]))]
            writer.writerow(row)
    return buf.getvalue()
