"""Command-line pipeline: search -> corpus -> fit, plus render and canon.

Stages hand off through files in the output directory so desk-scale
experiments can re-run any stage independently. Exit codes: 0 success,
2 validation error, 3 capacity or search exhaustion, 4 fit failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import files
from .canon import canonicalize
from .errors import (
    CapacityError,
    HiplanError,
    MissingProgramError,
    NotSolvedError,
    OptimizationError,
    ParseError,
    ValidationError,
)
from .fitting import (
    DEFAULT_RESTARTS,
    PEND_GRID,
    bic,
    fit_model,
    per_task_loglik,
    variability_report,
)
from .gen import GenConfig, build_corpus
from .priors import ModelKind
from .program import parse_program, program_length, serialize_program
from .render import render_tree
from .search import SearchConfig, compute_heuristic, search_traces
from .task import TaskSpec
from .util import configure_logging

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_CAPACITY = 3
EXIT_FIT = 4

ALL_MODELS = tuple(k.value for k in ModelKind)


@dataclass
class PipelineConfig:
    task_dir: Path
    out_dir: Path
    data_file: Path | None = None
    min_traces: int = 1000
    max_subroutines: int = 4
    pend_grid: tuple[float, ...] = PEND_GRID
    restarts: int = DEFAULT_RESTARTS
    seed: int = 0
    models: tuple[str, ...] = ALL_MODELS
    jobs: int = 1

    def __post_init__(self) -> None:
        for v in self.pend_grid:
            if not 0 < v < 1:
                raise ValidationError(f"pend grid value {v} outside (0, 1)")
        if not self.models:
            raise ValidationError("at least one model kind is required")
        for m in self.models:
            if m not in ALL_MODELS:
                raise ValidationError(f"unknown model {m!r}; known: {', '.join(ALL_MODELS)}")


def _load_tasks(cfg: PipelineConfig) -> dict[str, TaskSpec]:
    tasks = files.load_task_dir(cfg.task_dir)
    if not tasks:
        raise ValidationError(f"no task files in {cfg.task_dir}")
    return tasks


def _search_one(task: TaskSpec, min_traces: int) -> tuple[str, str, bool]:
    heur = compute_heuristic(task)
    traces = search_traces(task, heur, SearchConfig(min_traces=min_traces))
    return task.id, files.trace_file_text(traces), traces.exhausted


def cmd_search(cfg: PipelineConfig) -> int:
    tasks = _load_tasks(cfg)
    exit_code = EXIT_OK
    items = sorted(tasks.values(), key=lambda t: t.id)
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_search_one, items, [cfg.min_traces] * len(items)))
    else:
        results = []
        for task in items:
            try:
                results.append(_search_one(task, cfg.min_traces))
            except CapacityError as e:
                log.error("task %s: %s", task.id, e)
                exit_code = EXIT_CAPACITY
    for task_id, text, exhausted in results:
        path = cfg.out_dir / "traces" / f"{task_id}.traces"
        files.atomic_write(path, text)
        header = text.splitlines()[0]
        print(f"{task_id}: {header[2:]}")
        if exhausted:
            log.warning("task %s: search exhausted before min_traces", task_id)
            exit_code = EXIT_CAPACITY
    return exit_code


def cmd_corpus(cfg: PipelineConfig) -> int:
    tasks = _load_tasks(cfg)
    gen_cfg = GenConfig(max_subroutines=cfg.max_subroutines)
    dataset = None
    if cfg.data_file is not None:
        dataset = files.parse_dataset(cfg.data_file.read_text(), tasks)
    exit_code = EXIT_OK
    for task_id in sorted(tasks):
        trace_path = cfg.out_dir / "traces" / f"{task_id}.traces"
        if not trace_path.exists():
            raise ValidationError(f"missing trace file {trace_path}; run 'search' first")
        traces = files.parse_trace_file(trace_path.read_text())
        try:
            corpus = build_corpus(tasks[task_id], traces, gen_cfg)
        except CapacityError as e:
            log.error("task %s: %s", task_id, e)
            exit_code = EXIT_CAPACITY
            continue
        generated = len(corpus)
        if dataset is not None:
            observed = [r.program for r in dataset.records if r.task == task_id]
            keys = {r.key for r in dataset.records if r.task == task_id}
            covered = sum(1 for k in keys if k in corpus.by_key)
            corpus = corpus.union(tasks[task_id], observed)
            unioned = len(corpus) - generated
            share = 100.0 * covered / len(keys) if keys else 100.0
            print(
                f"{task_id}: n={len(corpus)} generated={generated} "
                f"unioned={unioned} coverage={share:.1f}%"
            )
        else:
            print(f"{task_id}: n={generated}")
        files.atomic_write(
            cfg.out_dir / "corpora" / f"{task_id}.corpus", files.corpus_file_text(corpus)
        )
    return exit_code


def cmd_fit(cfg: PipelineConfig) -> int:
    tasks = _load_tasks(cfg)
    if cfg.data_file is None:
        raise ValidationError("fit requires --data")
    dataset = files.parse_dataset(cfg.data_file.read_text(), tasks)
    corpora = {}
    observed_tasks = {r.task for r in dataset.records}
    for task_id in sorted(observed_tasks):
        path = cfg.out_dir / "corpora" / f"{task_id}.corpus"
        if not path.exists():
            raise ValidationError(f"missing corpus file {path}; run 'corpus' first")
        corpus = files.parse_corpus_file(path.read_text(), tasks[task_id])
        observed = [r.program for r in dataset.records if r.task == task_id]
        corpora[task_id] = corpus.union(tasks[task_id], observed)

    fits = []
    for name in cfg.models:
        kind = ModelKind(name)
        try:
            fit = fit_model(
                kind, dataset, corpora,
                restarts=cfg.restarts, seed=cfg.seed, pend_grid=cfg.pend_grid,
            )
        except (OptimizationError, MissingProgramError) as e:
            log.error("fit %s failed: %s", name, e)
            return EXIT_FIT
        fits.append(fit)
        print(f"{name}: loglik={fit.loglik:.1f} bic={fit.bic:.1f} k={fit.k}")

    per_task_rows = []
    counts = dataset.counts
    for fit in fits:
        lls = per_task_loglik(dataset, corpora, fit.model, cfg.pend_grid)
        for task_id, ll in sorted(lls.items()):
            n_task = sum(counts[task_id].values())
            per_task_rows.append(
                (task_id, fit.model.kind.value, n_task, ll, bic(ll, fit.k, n_task))
            )

    by_kind = {f.model.kind: f for f in fits}
    rows = variability_report(
        dataset,
        corpora,
        grammar_fit=by_kind.get(ModelKind.GRAMMAR_INDUCTION),
        step_cost_fit=by_kind.get(ModelKind.STEP_COST),
        restarts=cfg.restarts,
        seed=cfg.seed,
        pend_grid=cfg.pend_grid,
    )

    files.atomic_write(cfg.out_dir / "fits.csv", files.fit_report_csv(fits))
    files.atomic_write(cfg.out_dir / "per_task_bic.csv", files.per_task_bic_csv(per_task_rows))
    files.atomic_write(cfg.out_dir / "variability.csv", files.variability_csv(rows))
    files.atomic_write(cfg.out_dir / "scores.csv", files.scores_csv(corpora, fits))
    return EXIT_OK


def cmd_render(cfg: PipelineConfig, program_file: Path, task_id: str) -> int:
    tasks = _load_tasks(cfg)
    if task_id not in tasks:
        raise ValidationError(
            f"unknown task {task_id!r}; known tasks: {', '.join(sorted(tasks))}"
        )
    program = parse_program(program_file.read_text())
    dot = render_tree(program, tasks[task_id])
    out = cfg.out_dir / f"render_{task_id}.dot"
    files.atomic_write(out, dot)
    print(out)
    return EXIT_OK


def cmd_canon(cfg: PipelineConfig, program_file: Path, task_id: str) -> int:
    tasks = _load_tasks(cfg)
    if task_id not in tasks:
        raise ValidationError(
            f"unknown task {task_id!r}; known tasks: {', '.join(sorted(tasks))}"
        )
    program = parse_program(program_file.read_text())
    canonical, report = canonicalize(tasks[task_id], program)
    sys.stdout.write(serialize_program(canonical))
    flags = " ".join(
        f"pass{i}={'1' if m else '0'}" for i, m in enumerate(report.modified, start=1)
    )
    print(
        f"# {flags} original_length={report.original_length} "
        f"canonical_length={report.canonical_length}"
    )
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hiplan",
        description="Hierarchical plan induction pipeline for Lightbot-style tasks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--tasks", type=Path, required=True, help="task directory")
        p.add_argument("--out", type=Path, required=True, help="output directory")
        p.add_argument("--data", type=Path, default=None, help="dataset JSONL file")
        p.add_argument("--min-traces", type=int, default=1000)
        p.add_argument("--restarts", type=int, default=DEFAULT_RESTARTS)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument(
            "--models", type=str, default=",".join(ALL_MODELS),
            help="comma-separated model kinds",
        )
        p.add_argument(
            "--pend-grid", type=str, default=",".join(str(v) for v in PEND_GRID),
            help="comma-separated termination-probability grid",
        )

    for name in ("search", "corpus", "fit"):
        add_common(sub.add_parser(name))
    for name in ("render", "canon"):
        p = sub.add_parser(name)
        add_common(p)
        p.add_argument("--program", type=Path, required=True, help="program DSL file")
        p.add_argument("--task", type=str, required=True, help="task id")
    return parser


def _config_from_args(args: argparse.Namespace) -> PipelineConfig:
    return PipelineConfig(
        task_dir=args.tasks,
        out_dir=args.out,
        data_file=args.data,
        min_traces=args.min_traces,
        restarts=args.restarts,
        seed=args.seed,
        jobs=args.jobs,
        models=tuple(m.strip() for m in args.models.split(",") if m.strip()),
        pend_grid=tuple(float(v) for v in args.pend_grid.split(",") if v.strip()),
    )


def main(argv: list[str] | None = None) -> int:
    configure_logging()
    args = _build_parser().parse_args(argv)
    try:
        cfg = _config_from_args(args)
        if args.command == "search":
            return cmd_search(cfg)
        if args.command == "corpus":
            return cmd_corpus(cfg)
        if args.command == "fit":
            return cmd_fit(cfg)
        if args.command == "render":
            return cmd_render(cfg, args.program, args.task)
        if args.command == "canon":
            return cmd_canon(cfg, args.program, args.task)
        raise AssertionError(args.command)
    except (ParseError, ValidationError, NotSolvedError) as e:
        log.error("%s", e)
        return EXIT_VALIDATION
    except CapacityError as e:
        log.error("%s", e)
        return EXIT_CAPACITY
    except (OptimizationError, MissingProgramError) as e:
        log.error("%s", e)
        return EXIT_FIT
    except HiplanError as e:
        log.error("%s", e)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
