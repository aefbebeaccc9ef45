"""Lightbot-style gridworld tasks as deterministic MDPs.

A task is a finite grid of cells with integer heights, some of which are
lights. The agent has a position and orientation; the goal is the set of
states where every light has been activated. All transitions are pure and
deterministic, and goal states are absorbing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import IntEnum
from functools import cached_property
from typing import NamedTuple

from .errors import CapacityError, ParseError, ValidationError

MAX_LIGHTS = 16
DEFAULT_STATE_LIMIT = 1 << 24


class Action(IntEnum):
    """The five primitive actions. Integer order is the canonical sort order."""

    WALK = 0
    JUMP = 1
    LEFT = 2
    RIGHT = 3
    LIGHT = 4

    @property
    def token(self) -> str:
        return self.name.lower()

    @classmethod
    def from_token(cls, token: str) -> "Action":
        try:
            return cls[token.upper()]
        except KeyError:
            raise ParseError(f"unknown action token {token!r}") from None


class Dir(IntEnum):
    N = 0
    E = 1
    S = 2
    W = 3

    @property
    def token(self) -> str:
        return self.name

    def left(self) -> "Dir":
        return Dir((self - 1) % 4)

    def right(self) -> "Dir":
        return Dir((self + 1) % 4)


# Forward unit step per orientation; y grows southward, x grows eastward.
_DELTA = {Dir.N: (0, -1), Dir.E: (1, 0), Dir.S: (0, 1), Dir.W: (-1, 0)}


class Cell(NamedTuple):
    x: int
    y: int
    height: int
    light: bool


class WorldState(NamedTuple):
    x: int
    y: int
    dir: Dir
    lit: int


@dataclass(frozen=True)
class TaskSpec:
    """A validated task: cells, start pose, and derived light indexing.

    Cells are kept sorted by (y, x); light bit i belongs to the i-th light
    cell in that order. This ordering is a file-format contract relied on
    by state indexing and heuristic tables.
    """

    id: str
    cells: tuple[Cell, ...]
    start: tuple[int, int, Dir]

    def __post_init__(self) -> None:
        cells = tuple(sorted((Cell(*c) for c in self.cells), key=lambda c: (c.y, c.x)))
        object.__setattr__(self, "cells", cells)
        seen = set()
        for c in cells:
            if (c.x, c.y) in seen:
                raise ValidationError(f"task {self.id!r}: duplicate cell at {(c.x, c.y)}")
            seen.add((c.x, c.y))
            if c.height < 0:
                raise ValidationError(f"task {self.id!r}: negative height at {(c.x, c.y)}")
        sx, sy, sdir = self.start
        object.__setattr__(self, "start", (sx, sy, Dir(sdir)))
        if (sx, sy) not in seen:
            raise ValidationError(f"task {self.id!r}: start {(sx, sy)} is not a cell")
        n_lights = sum(1 for c in cells if c.light)
        if n_lights == 0:
            raise ValidationError(f"task {self.id!r}: no light cells")
        if n_lights > MAX_LIGHTS:
            raise ValidationError(
                f"task {self.id!r}: {n_lights} lights exceeds the limit of {MAX_LIGHTS}"
            )

    @cached_property
    def cell_at(self) -> dict[tuple[int, int], Cell]:
        return {(c.x, c.y): c for c in self.cells}

    @cached_property
    def lights(self) -> tuple[Cell, ...]:
        return tuple(c for c in self.cells if c.light)

    @cached_property
    def light_bit(self) -> dict[tuple[int, int], int]:
        return {(c.x, c.y): i for i, c in enumerate(self.lights)}

    @property
    def n_lights(self) -> int:
        return len(self.lights)

    @property
    def full_mask(self) -> int:
        return (1 << self.n_lights) - 1


def load_task(text: str) -> TaskSpec:
    """Parse a task-file JSON object into a validated TaskSpec."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid JSON: {e}") from None
    if not isinstance(raw, dict):
        raise ParseError("task file must contain a JSON object")
    try:
        task_id = raw["id"]
        cells = tuple(
            Cell(int(c["x"]), int(c["y"]), int(c["height"]), bool(c["light"]))
            for c in raw["cells"]
        )
        start_raw = raw["start"]
        sdir = Dir[start_raw["dir"]]
        start = (int(start_raw["x"]), int(start_raw["y"]), sdir)
    except (KeyError, TypeError, ValueError) as e:
        raise ParseError(f"malformed task file: {e!r}") from None
    if not isinstance(task_id, str):
        raise ParseError("task id must be a string")
    return TaskSpec(id=task_id, cells=cells, start=start)


def initial_state(task: TaskSpec) -> WorldState:
    x, y, d = task.start
    return WorldState(x, y, d, 0)


def is_goal(task: TaskSpec, s: WorldState) -> bool:
    return s.lit == task.full_mask


def apply_action(task: TaskSpec, s: WorldState, a: Action) -> WorldState:
    """Deterministic transition function; invalid uses are no-ops.

    Goal states are absorbing: every action maps them to themselves.
    """
    if s.lit == task.full_mask:
        return s
    if a is Action.LEFT:
        return WorldState(s.x, s.y, s.dir.left(), s.lit)
    if a is Action.RIGHT:
        return WorldState(s.x, s.y, s.dir.right(), s.lit)
    if a is Action.LIGHT:
        bit = task.light_bit.get((s.x, s.y))
        if bit is None:
            return s
        return WorldState(s.x, s.y, s.dir, s.lit | (1 << bit))
    dx, dy = _DELTA[s.dir]
    target = task.cell_at.get((s.x + dx, s.y + dy))
    if target is None:
        return s
    here = task.cell_at[(s.x, s.y)].height
    if a is Action.WALK:
        ok = target.height == here
    else:  # JUMP
        ok = target.height == here + 1 or target.height < here
    if not ok:
        return s
    return WorldState(target.x, target.y, s.dir, s.lit)


@dataclass(frozen=True)
class StateIndex:
    """Bijection between WorldState values and dense integers 0..N-1.

    Layout: ((cell_index * 4) + dir) * 2**n_lights + lit, with cells in the
    task's (y, x) order.
    """

    task: TaskSpec

    @cached_property
    def _cell_index(self) -> dict[tuple[int, int], int]:
        return {(c.x, c.y): i for i, c in enumerate(self.task.cells)}

    @property
    def n_lit(self) -> int:
        return 1 << self.task.n_lights

    @property
    def n_states(self) -> int:
        return len(self.task.cells) * 4 * self.n_lit

    def encode(self, s: WorldState) -> int:
        ci = self._cell_index[(s.x, s.y)]
        return (ci * 4 + s.dir) * self.n_lit + s.lit

    def decode(self, idx: int) -> WorldState:
        lit = idx % self.n_lit
        rest = idx // self.n_lit
        d = Dir(rest % 4)
        cell = self.task.cells[rest // 4]
        return WorldState(cell.x, cell.y, d, lit)


def enumerate_states(task: TaskSpec, limit: int = DEFAULT_STATE_LIMIT) -> StateIndex:
    """Build the dense state index, guarding against oversized state spaces."""
    n = len(task.cells) * 4 * (1 << task.n_lights)
    if n > limit:
        raise CapacityError(
            f"task {task.id!r}: {n} states exceeds the limit of {limit}"
        )
    return StateIndex(task)
