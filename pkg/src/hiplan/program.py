"""Hierarchical program DSL: data model, text format, and execution.

A program is a main instruction sequence plus up to four callable
subroutines. Execution applies primitives left to right, recurses into
calls, and halts the instant a primitive action produces a goal state
(the halting action is included in the trace).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, NamedTuple, Sequence

from .errors import NotSolvedError, ParseError, ValidationError
from .task import Action, TaskSpec, WorldState, apply_action, initial_state, is_goal

N_SUB_SLOTS = 4


class Call(NamedTuple):
    k: int


Instruction = Action | Call
Body = tuple[Instruction, ...]


def _coerce_body(body: Sequence[Instruction]) -> Body:
    out = []
    for ins in body:
        if isinstance(ins, Call):
            if not 1 <= ins.k:
                raise ValidationError(f"call index {ins.k} out of range")
            out.append(ins)
        else:
            out.append(Action(ins))
    return tuple(out)


@dataclass(frozen=True)
class Program:
    """An immutable program value.

    `subs` is padded to at least four slots so p1..p4 always exist (an
    empty body means the slot is unused). Generative sampling may produce
    more than four subroutines; such programs cannot be serialized to the
    DSL and are rejected by the corpus builder, but execute and score fine.
    """

    main: Body = ()
    subs: tuple[Body, ...] = ()

    def __post_init__(self) -> None:
        subs = tuple(_coerce_body(b) for b in self.subs)
        if len(subs) < N_SUB_SLOTS:
            subs = subs + ((),) * (N_SUB_SLOTS - len(subs))
        object.__setattr__(self, "main", _coerce_body(self.main))
        object.__setattr__(self, "subs", subs)

    def body(self, i: int) -> Body:
        """Body 0 is main; bodies 1.. are subroutines."""
        return self.main if i == 0 else self.subs[i - 1]

    @property
    def n_bodies(self) -> int:
        return 1 + len(self.subs)

    def defined_subs(self) -> tuple[int, ...]:
        return tuple(k for k in range(1, len(self.subs) + 1) if self.subs[k - 1])

    def instructions(self) -> Iterator[Instruction]:
        yield from self.main
        for b in self.subs:
            yield from b


def program_length(p: Program) -> int:
    """Total instruction count over main and all subroutines (calls count 1)."""
    return len(p.main) + sum(len(b) for b in p.subs)


_CALL_TOKENS = {f"p{k}": k for k in range(1, N_SUB_SLOTS + 1)}


def _parse_tokens(tokens: list[str], line_no: int) -> list[Instruction]:
    out: list[Instruction] = []
    for tok in tokens:
        if tok in _CALL_TOKENS:
            out.append(Call(_CALL_TOKENS[tok]))
        else:
            try:
                out.append(Action.from_token(tok))
            except ParseError:
                raise ParseError(f"line {line_no}: unknown token {tok!r}") from None
    return out


def parse_program(text: str) -> Program:
    """Parse DSL text: a "main:" line plus optional "p1:".."p4:" lines."""
    main: list[Instruction] | None = None
    subs: dict[int, list[Instruction]] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if ":" not in line:
            raise ParseError(f"line {line_no}: expected '<name>: <tokens>'")
        name, _, rest = line.partition(":")
        name = name.strip()
        tokens = rest.split()
        if name == "main":
            if main is not None:
                raise ParseError(f"line {line_no}: duplicate 'main:' line")
            main = _parse_tokens(tokens, line_no)
        elif name in _CALL_TOKENS:
            k = _CALL_TOKENS[name]
            if k in subs:
                raise ParseError(f"line {line_no}: duplicate '{name}:' line")
            subs[k] = _parse_tokens(tokens, line_no)
        else:
            raise ParseError(f"line {line_no}: unknown subroutine name {name!r}")
    if main is None:
        raise ParseError("missing 'main:' line")
    bodies = tuple(tuple(subs.get(k, [])) for k in range(1, N_SUB_SLOTS + 1))
    return Program(main=tuple(main), subs=bodies)


def _body_text(body: Body) -> str:
    return " ".join(ins.token if isinstance(ins, Action) else f"p{ins.k}" for ins in body)


def serialize_program(p: Program) -> str:
    """Canonical DSL text; empty subroutines are omitted. Round-trips parse."""
    if len(p.subs) > N_SUB_SLOTS and any(b for b in p.subs[N_SUB_SLOTS:]):
        raise ValidationError("program uses more than four subroutines")
    lines = [f"main: {_body_text(p.main)}".rstrip()]
    for k in range(1, N_SUB_SLOTS + 1):
        if p.subs[k - 1]:
            lines.append(f"p{k}: {_body_text(p.subs[k - 1])}")
    return "\n".join(lines) + "\n"


class Outcome(Enum):
    SOLVED = "solved"
    NOT_SOLVED = "not_solved"
    NON_HALTING = "non_halting"


@dataclass(frozen=True)
class Budget:
    max_steps: int = 10_000
    max_depth: int = 64


DEFAULT_BUDGET = Budget()


@dataclass(frozen=True)
class ExecutionResult:
    outcome: Outcome
    trace: tuple[Action, ...]
    final_state: WorldState

    @property
    def steps(self) -> int:
        return len(self.trace)

    @property
    def solved(self) -> bool:
        return self.outcome is Outcome.SOLVED


@dataclass
class ExecRecord:
    """Per-position execution bookkeeping gathered during one run.

    Keys are (body_index, position) with body 0 = main. `call_tree` is the
    execution tree: ("call", k, children) nodes and ("action", a) leaves of
    the root main node.
    """

    executed: dict[tuple[int, int], int] = field(default_factory=dict)
    effective: dict[tuple[int, int], int] = field(default_factory=dict)
    first_entry: list[int] = field(default_factory=list)
    halt_pos: tuple[int, int] | None = None
    call_tree: list = field(default_factory=list)


class _Halt(Exception):
    pass


class _BudgetExceeded(Exception):
    pass


def _run_body(
    task: TaskSpec,
    p: Program,
    body_idx: int,
    state: list[WorldState],
    trace: list[Action],
    budget: Budget,
    depth: int,
    record: ExecRecord | None,
    tree: list | None,
) -> None:
    if depth > budget.max_depth:
        raise _BudgetExceeded
    body = p.body(body_idx)
    for pos, ins in enumerate(body):
        if isinstance(ins, Call):
            if record is not None:
                record.executed[(body_idx, pos)] = record.executed.get((body_idx, pos), 0) + 1
                if ins.k not in record.first_entry:
                    record.first_entry.append(ins.k)
            child: list | None = None
            if tree is not None:
                node = ("call", ins.k, [])
                tree.append(node)
                child = node[2]
            _run_body(task, p, ins.k, state, trace, budget, depth + 1, record, child)
        else:
            if len(trace) >= budget.max_steps:
                raise _BudgetExceeded
            before = state[0]
            after = apply_action(task, before, ins)
            state[0] = after
            trace.append(ins)
            if record is not None:
                key = (body_idx, pos)
                record.executed[key] = record.executed.get(key, 0) + 1
                if after != before:
                    record.effective[key] = record.effective.get(key, 0) + 1
            if tree is not None:
                tree.append(("action", ins))
            if is_goal(task, after):
                if record is not None:
                    record.halt_pos = (body_idx, pos)
                raise _Halt


def execute_traced(
    task: TaskSpec,
    p: Program,
    budget: Budget = DEFAULT_BUDGET,
    record: ExecRecord | None = None,
) -> ExecutionResult:
    """Run a program, optionally filling an ExecRecord for analysis passes."""
    state = [initial_state(task)]
    trace: list[Action] = []
    tree = record.call_tree if record is not None else None
    try:
        _run_body(task, p, 0, state, trace, budget, 0, record, tree)
        outcome = Outcome.NOT_SOLVED
    except _Halt:
        outcome = Outcome.SOLVED
    except _BudgetExceeded:
        outcome = Outcome.NON_HALTING
    return ExecutionResult(outcome=outcome, trace=tuple(trace), final_state=state[0])


def execute(task: TaskSpec, p: Program, budget: Budget = DEFAULT_BUDGET) -> ExecutionResult:
    return execute_traced(task, p, budget)


def require_solved(task: TaskSpec, p: Program, budget: Budget = DEFAULT_BUDGET) -> ExecutionResult:
    result = execute(task, p, budget)
    if not result.solved:
        raise NotSolvedError(f"program does not solve task {task.id!r} ({result.outcome.value})")
    return result
