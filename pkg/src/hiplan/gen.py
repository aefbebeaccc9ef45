"""Expansion of traces into hierarchical program corpora.

Each trace is rewritten under every viable combination of candidate
subroutines (repeated runs of at least two actions), greedily and longest
first; recursive and post-goal variants are added, everything is
canonicalized, and duplicates are dropped.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, NamedTuple

from .canon import canonicalize
from .errors import CapacityError
from .program import (
    Call,
    Instruction,
    Program,
    execute,
    program_length,
    require_solved,
    serialize_program,
)
from .search import TraceSet
from .task import Action, TaskSpec

Trace = tuple[Action, ...]


class CandidateSub(NamedTuple):
    body: Trace
    first_pos: int


def _greedy_occurrences(trace: Trace, body: Trace) -> list[int]:
    """Left-to-right non-overlapping occurrence positions of body in trace."""
    positions = []
    i, n, m = 0, len(trace), len(body)
    while i + m <= n:
        if trace[i : i + m] == body:
            positions.append(i)
            i += m
        else:
            i += 1
    return positions


def candidate_subroutines(trace: Trace) -> list[CandidateSub]:
    """All repeated runs: length >= 2 with >= 2 non-overlapping occurrences.

    Sorted longest first, then by earliest occurrence, then by body.
    """
    seen: dict[Trace, int] = {}
    n = len(trace)
    for i in range(n - 1):
        for j in range(i + 2, n + 1):
            body = trace[i:j]
            if body in seen:
                continue
            occ = _greedy_occurrences(trace, body)
            if len(occ) >= 2:
                seen[body] = occ[0]
    subs = [CandidateSub(body, pos) for body, pos in seen.items()]
    subs.sort(key=lambda s: (-len(s.body), s.first_pos, s.body))
    return subs


def _replace_in_body(
    body: list[Instruction], pattern: Trace, call: Call
) -> tuple[list[Instruction], int]:
    out: list[Instruction] = []
    hits = 0
    i, n, m = 0, len(body), len(pattern)
    while i < n:
        if i + m <= n and tuple(body[i : i + m]) == pattern:
            out.append(call)
            hits += 1
            i += m
        else:
            out.append(body[i])
            i += 1
    return out, hits


def _assemble(main: list[Instruction], sub_bodies: list[list[Instruction]]) -> Program:
    """Renumber subroutines by first execution order and build the Program.

    Bodies only ever call later-created bodies, so expansion terminates.
    """
    order: list[int] = []

    def visit(body: list[Instruction]) -> None:
        for ins in body:
            if isinstance(ins, Call) and ins.k not in order:
                order.append(ins.k)
                visit(sub_bodies[ins.k - 1])

    visit(main)
    mapping = {old: new + 1 for new, old in enumerate(order)}

    def remap(body: list[Instruction]) -> tuple[Instruction, ...]:
        return tuple(Call(mapping[x.k]) if isinstance(x, Call) else x for x in body)

    subs: list[tuple[Instruction, ...]] = [() for _ in range(max(len(order), 4))]
    for old in order:
        subs[mapping[old] - 1] = remap(sub_bodies[old - 1])
    return Program(main=remap(main), subs=tuple(subs))


def rewrite_with(trace: Trace, chosen: Iterable[CandidateSub]) -> Program | None:
    """Greedily rewrite a trace with the chosen subroutines, or reject.

    Callers pass `chosen` longest first (ties by first occurrence, then
    body). Each subroutine's pattern is replaced in the main body and in
    every earlier-created subroutine body, producing nesting. Returns None
    when any chosen subroutine ends with fewer than two call sites or more
    than four subroutines would be needed.
    """
    chosen = list(chosen)
    if len(chosen) > 4:
        return None
    main: list[Instruction] = list(trace)
    sub_bodies: list[list[Instruction]] = []
    for idx, cand in enumerate(chosen):
        call = Call(idx + 1)
        hits = 0
        main, h = _replace_in_body(main, cand.body, call)
        hits += h
        for j in range(len(sub_bodies)):
            sub_bodies[j], h = _replace_in_body(sub_bodies[j], cand.body, call)
            hits += h
        if hits < 2:
            return None
        sub_bodies.append(list(cand.body))
    return _assemble(main, sub_bodies)


def recursive_variants(trace: Trace, task: TaskSpec) -> list[Program]:
    """Programs whose tail is a subroutine calling itself until the goal.

    For every suffix that is a (possibly partially completed) repetition of
    its first few actions, the repeating unit plus a self-call becomes the
    subroutine. Only programs that still solve the task with the original
    final state are kept; the goal halt guarantees termination.
    """
    reference = require_solved(task, Program(main=trace))
    out = []
    n = len(trace)
    for k in range(n):
        suffix = trace[k:]
        # A period must repeat at least partially, so the whole suffix as
        # its own "period" does not count.
        for period in range(1, len(suffix)):
            if any(suffix[i] != suffix[i % period] for i in range(len(suffix))):
                continue
            sub = suffix[:period] + (Call(1),)
            program = Program(main=trace[:k] + (Call(1),), subs=(sub,))
            result = execute(task, program)
            if result.solved and result.final_state == reference.final_state:
                out.append(program)
    return out


def postgoal_variants(
    trace: Trace, candidates: Iterable[CandidateSub], task: TaskSpec
) -> list[Program]:
    """Programs whose final subroutine call runs past the goal.

    When a proper prefix of a candidate's body ends the trace, the trace is
    extended to complete that occurrence and rewritten with the candidate;
    execution halts at the goal mid-call, leaving the completion as dead
    text. (Recursive post-goal programs arise from the partial final
    repetition in recursive_variants and need no separate construction.)
    """
    reference = require_solved(task, Program(main=trace))
    out = []
    for cand in candidates:
        for cut in range(1, len(cand.body)):
            prefix = cand.body[:cut]
            if trace[len(trace) - cut :] != prefix:
                continue
            extended = trace + cand.body[cut:]
            program = rewrite_with(extended, [cand])
            if program is None:
                continue
            result = execute(task, program)
            if result.solved and result.final_state == reference.final_state:
                out.append(program)
    return out


@dataclass(frozen=True)
class GenConfig:
    max_subroutines: int = 4
    max_programs_per_trace: int = 20_000


@dataclass(frozen=True)
class CorpusEntry:
    program: Program
    key: str
    length: int
    steps: int
    kind: str  # "rewrite" | "recursive" | "postgoal" | "union"
    source_trace: Trace | None = None


@dataclass(frozen=True)
class Corpus:
    task_id: str
    entries: tuple[CorpusEntry, ...]

    def __len__(self) -> int:
        return len(self.entries)

    @cached_property
    def by_key(self) -> dict[str, int]:
        return {e.key: i for i, e in enumerate(self.entries)}

    def union(self, task: TaskSpec, programs: Iterable[Program]) -> "Corpus":
        """Add canonicalized outside programs that generation missed."""
        extra = []
        known = set(self.by_key)
        for p in programs:
            canonical, _ = canonicalize(task, p)
            key = serialize_program(canonical)
            if key in known:
                continue
            known.add(key)
            result = require_solved(task, canonical)
            extra.append(
                CorpusEntry(
                    program=canonical,
                    key=key,
                    length=program_length(canonical),
                    steps=result.steps,
                    kind="union",
                )
            )
        if not extra:
            return self
        entries = tuple(
            sorted(self.entries + tuple(extra), key=lambda e: (e.length, e.steps, e.key))
        )
        return Corpus(task_id=self.task_id, entries=entries)


def _expand_trace(
    trace: Trace, task: TaskSpec, cfg: GenConfig
) -> list[tuple[Program, str]]:
    """All (program, kind) pairs for one trace, before canonicalization.

    Subsets of candidates are explored depth-first in canonical order; a
    rejected subset prunes its whole subtree, which is sound because adding
    a later (shorter) candidate can never add call sites for an earlier one.
    """
    candidates = candidate_subroutines(trace)
    results: list[tuple[Program, str]] = [(Program(main=trace), "rewrite")]

    def extend(chosen: list[CandidateSub], start: int) -> None:
        if len(chosen) >= cfg.max_subroutines:
            return
        for i in range(start, len(candidates)):
            attempt = chosen + [candidates[i]]
            program = rewrite_with(trace, attempt)
            if program is None:
                continue
            results.append((program, "rewrite"))
            if len(results) > cfg.max_programs_per_trace:
                raise CapacityError(
                    f"task {task.id!r}: more than {cfg.max_programs_per_trace} "
                    f"programs for one trace"
                )
            extend(attempt, i + 1)

    extend([], 0)
    results.extend((p, "recursive") for p in recursive_variants(trace, task))
    results.extend((p, "postgoal") for p in postgoal_variants(trace, candidates, task))
    return results


def build_corpus(task: TaskSpec, traces: TraceSet, cfg: GenConfig = GenConfig()) -> Corpus:
    """Expand every trace, canonicalize, and deduplicate into a corpus."""
    entries: dict[str, CorpusEntry] = {}
    for trace in traces.traces:
        for program, kind in _expand_trace(trace, task, cfg):
            canonical, _ = canonicalize(task, program)
            key = serialize_program(canonical)
            if key in entries:
                continue
            result = require_solved(task, canonical)
            entries[key] = CorpusEntry(
                program=canonical,
                key=key,
                length=program_length(canonical),
                steps=result.steps,
                kind=kind,
                source_trace=trace,
            )
    ordered = sorted(entries.values(), key=lambda e: (e.length, e.steps, e.key))
    return Corpus(task_id=task.id, entries=tuple(ordered))
