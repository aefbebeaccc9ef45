"""Seven-pass normalization of goal-reaching programs.

The passes, applied in order: (1) maximize subroutine use, (2) drop
instructions that never execute or never have an effect, (3) drop uncalled
subroutines, (4) inline single-call subroutines, (5) inline
single-instruction subroutines, (6) move lights before adjacent turns,
(7) renumber subroutines by first execution. The pipeline repeats until a
full sweep changes nothing (bounded at 5 sweeps), so the result is a
fixpoint and re-canonicalizing is a no-op.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from .errors import NotSolvedError
from .program import (
    Budget,
    DEFAULT_BUDGET,
    Call,
    ExecRecord,
    Instruction,
    Program,
    execute_traced,
    program_length,
    require_solved,
)
from .task import Action, TaskSpec

MAX_SWEEPS = 5

_Bodies = list[list[Instruction]]


@dataclass(frozen=True)
class CanonReport:
    """Which passes changed the program on the first sweep, plus lengths."""

    modified: tuple[bool, bool, bool, bool, bool, bool, bool]
    original_length: int
    canonical_length: int


def _to_bodies(p: Program) -> _Bodies:
    return [list(p.main)] + [list(b) for b in p.subs]


def _to_program(bodies: _Bodies) -> Program:
    return Program(main=tuple(bodies[0]), subs=tuple(tuple(b) for b in bodies[1:]))


def _call_sites(bodies: _Bodies) -> Counter:
    sites: Counter = Counter()
    for body in bodies:
        for ins in body:
            if isinstance(ins, Call):
                sites[ins.k] += 1
    return sites


def _pass1_maximize_use(bodies: _Bodies) -> bool:
    """Replace every primitive run matching a subroutine body with a call.

    At each position the longest matching body wins (ties broken by lower
    index); matches never overlap and a body is never matched against
    itself.
    """
    modified = False
    for b_idx in range(len(bodies)):
        body = bodies[b_idx]
        out: list[Instruction] = []
        i = 0
        while i < len(body):
            hit = None
            candidates = sorted(
                (k for k in range(1, len(bodies)) if k != b_idx and len(bodies[k]) >= 2),
                key=lambda k: (-len(bodies[k]), k),
            )
            for k in candidates:
                pat = bodies[k]
                if body[i : i + len(pat)] == pat:
                    hit = k
                    break
            if hit is None:
                out.append(body[i])
                i += 1
            else:
                out.append(Call(hit))
                i += len(bodies[hit])
                modified = True
        bodies[b_idx] = out
    return modified


def _pass2_drop_dead(bodies: _Bodies, record: ExecRecord) -> bool:
    """Drop never-executed instructions and always-ineffective primitives.

    Bodies of subroutines with no call site at all are left for pass 3.
    Calls to subroutines whose bodies become empty are dead as well and are
    removed, cascading until stable.
    """
    sites = _call_sites(bodies)
    domain = {0} | {k for k in range(1, len(bodies)) if sites[k] > 0}
    modified = False
    for b_idx in domain:
        kept: list[Instruction] = []
        for pos, ins in enumerate(bodies[b_idx]):
            key = (b_idx, pos)
            executed = record.executed.get(key, 0)
            if executed == 0:
                modified = True
                continue
            if not isinstance(ins, Call) and record.effective.get(key, 0) == 0:
                modified = True
                continue
            kept.append(ins)
        bodies[b_idx] = kept
    while True:
        empty = {k for k in range(1, len(bodies)) if not bodies[k]}
        dropped = False
        for b_idx in range(len(bodies)):
            kept = [ins for ins in bodies[b_idx] if not (isinstance(ins, Call) and ins.k in empty)]
            if len(kept) != len(bodies[b_idx]):
                bodies[b_idx] = kept
                dropped = modified = True
        if not dropped:
            return modified


def _pass3_drop_uncalled(bodies: _Bodies) -> bool:
    sites = _call_sites(bodies)
    modified = False
    for k in range(1, len(bodies)):
        if bodies[k] and sites[k] == 0:
            bodies[k] = []
            modified = True
    return modified


def _pass4_inline_single_call(bodies: _Bodies) -> bool:
    modified = False
    while True:
        sites = _call_sites(bodies)
        target = None
        for k in range(1, len(bodies)):
            if bodies[k] and sites[k] == 1:
                loc = next(
                    (b, i)
                    for b in range(len(bodies))
                    for i, ins in enumerate(bodies[b])
                    if isinstance(ins, Call) and ins.k == k
                )
                if loc[0] != k:  # a pure self-call cannot be inlined
                    target = (k, loc)
                    break
        if target is None:
            return modified
        k, (b, i) = target
        bodies[b][i : i + 1] = bodies[k]
        bodies[k] = []
        modified = True


def _pass5_inline_single_instruction(bodies: _Bodies) -> bool:
    modified = False
    while True:
        target = None
        for k in range(1, len(bodies)):
            if len(bodies[k]) == 1 and bodies[k][0] != Call(k):
                target = k
                break
        if target is None:
            return modified
        ins = bodies[target][0]
        for b in range(len(bodies)):
            bodies[b] = [ins if x == Call(target) else x for x in bodies[b]]
        bodies[target] = []
        modified = True


_TURNS = (Action.LEFT, Action.RIGHT)


def _pass6_order_lights(bodies: _Bodies, record: ExecRecord) -> bool:
    """Swap adjacent (turn, light) pairs to (light, turn) until fixpoint.

    The pair whose light is the halting action is left alone: swapping it
    would halt execution one step earlier and change the final state.
    """
    halt = record.halt_pos
    modified = False
    for b_idx in range(len(bodies)):
        body = bodies[b_idx]
        changed = True
        while changed:
            changed = False
            for i in range(len(body) - 1):
                if (
                    body[i] in _TURNS
                    and body[i + 1] is Action.LIGHT
                    and (b_idx, i + 1) != halt
                ):
                    body[i], body[i + 1] = body[i + 1], body[i]
                    changed = modified = True
    return modified


def _pass7_renumber(bodies: _Bodies, record: ExecRecord) -> bool:
    nonempty = [k for k in range(1, len(bodies)) if bodies[k]]
    order = [k for k in record.first_entry if bodies[k]]
    order += [k for k in nonempty if k not in order]
    mapping = {k: i + 1 for i, k in enumerate(order)}
    if all(mapping[k] == k for k in nonempty):
        return False

    def remap(body: list[Instruction]) -> list[Instruction]:
        return [Call(mapping[x.k]) if isinstance(x, Call) else x for x in body]

    new_bodies: _Bodies = [remap(bodies[0])] + [[] for _ in range(len(bodies) - 1)]
    for k in nonempty:
        new_bodies[mapping[k]] = remap(bodies[k])
    bodies[:] = new_bodies
    return True


def _record_for(task: TaskSpec, bodies: _Bodies, budget: Budget) -> ExecRecord:
    record = ExecRecord()
    execute_traced(task, _to_program(bodies), budget, record)
    return record


def _sweep(
    task: TaskSpec, p: Program, budget: Budget, record: ExecRecord | None
) -> tuple[Program, tuple[bool, ...]]:
    """One ordered application of the seven passes.

    Instrumented runs are shared between passes while the program is
    unchanged; a pass that mutates invalidates the record for later ones.
    Pass 7 only needs the first-execution order of subroutines, which the
    swaps of pass 6 cannot change, so it reuses pass 6's record.
    """
    bodies = _to_bodies(p)
    f1 = _pass1_maximize_use(bodies)
    if f1 or record is None:
        record = _record_for(task, bodies, budget)
    f2 = _pass2_drop_dead(bodies, record)
    f3 = _pass3_drop_uncalled(bodies)
    f4 = _pass4_inline_single_call(bodies)
    f5 = _pass5_inline_single_instruction(bodies)
    if f2 or f3 or f4 or f5:
        record = _record_for(task, bodies, budget)
    f6 = _pass6_order_lights(bodies, record)
    f7 = _pass7_renumber(bodies, record)
    return _to_program(bodies), (f1, f2, f3, f4, f5, f6, f7)


def canonicalize(
    task: TaskSpec, p: Program, budget: Budget = DEFAULT_BUDGET
) -> tuple[Program, CanonReport]:
    """Normalize a goal-reaching program; raises NotSolvedError otherwise."""
    first_record = ExecRecord()
    original = execute_traced(task, p, budget, first_record)
    if not original.solved:
        raise NotSolvedError(
            f"program does not solve task {task.id!r} ({original.outcome.value})"
        )
    current = p
    first_flags: tuple[bool, ...] | None = None
    record: ExecRecord | None = first_record
    for _ in range(MAX_SWEEPS):
        current, flags = _sweep(task, current, budget, record)
        record = None
        if first_flags is None:
            first_flags = flags
        if not any(flags):
            break
    assert first_flags is not None
    if any(first_flags):
        result = require_solved(task, current, budget)
        assert result.final_state == original.final_state
    return current, CanonReport(
        modified=first_flags,
        original_length=program_length(p),
        canonical_length=program_length(current),
    )


def trace_equivalent(
    task: TaskSpec, p: Program, q: Program, budget: Budget = DEFAULT_BUDGET
) -> bool:
    """True iff both programs solve the task and reach the same final state."""
    rp = require_solved(task, p, budget)
    rq = require_solved(task, q, budget)
    return rp.final_state == rq.final_state
