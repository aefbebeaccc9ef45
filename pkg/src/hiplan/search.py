"""Heuristic precompute and tie-exhaustive best-first trace search.

The heuristic is the exact shortest-path length (in effective actions)
from every state to any goal state, computed over the full state space.
Search expands partial traces best-first with f = g + h, skipping
no-effect actions and redundant turn/light patterns, and keeps collecting
finished traces until all traces tied with the m-th cheapest are found.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import CapacityError
from .task import (
    Action,
    DEFAULT_STATE_LIMIT,
    StateIndex,
    TaskSpec,
    WorldState,
    enumerate_states,
    initial_state,
)

UNREACHABLE = np.iinfo(np.int32).max


def transition_table(index: StateIndex) -> np.ndarray:
    """Dense next-state table of shape (n_states, 5), goal states absorbing."""
    task = index.task
    cells = task.cells
    n_cells = len(cells)
    n_lit = index.n_lit
    cell_index = {(c.x, c.y): i for i, c in enumerate(cells)}

    # Per (cell, dir) movement targets; -1 where the move is invalid.
    walk_to = np.full((n_cells, 4), -1, dtype=np.int64)
    jump_to = np.full((n_cells, 4), -1, dtype=np.int64)
    light_bit = np.full(n_cells, -1, dtype=np.int64)
    deltas = [(0, -1), (1, 0), (0, 1), (-1, 0)]
    for ci, c in enumerate(cells):
        bit = task.light_bit.get((c.x, c.y))
        if bit is not None:
            light_bit[ci] = bit
        for d, (dx, dy) in enumerate(deltas):
            ti = cell_index.get((c.x + dx, c.y + dy))
            if ti is None:
                continue
            th = cells[ti].height
            if th == c.height:
                walk_to[ci, d] = ti
            if th == c.height + 1 or th < c.height:
                jump_to[ci, d] = ti

    idx = np.arange(index.n_states, dtype=np.int64)
    lit = idx % n_lit
    d = (idx // n_lit) % 4
    ci = idx // (4 * n_lit)

    def moved(target_cells: np.ndarray) -> np.ndarray:
        t = target_cells[ci, d]
        return np.where(t >= 0, (t * 4 + d) * n_lit + lit, idx)

    next_table = np.empty((index.n_states, 5), dtype=np.int64)
    next_table[:, Action.WALK] = moved(walk_to)
    next_table[:, Action.JUMP] = moved(jump_to)
    next_table[:, Action.LEFT] = (ci * 4 + (d - 1) % 4) * n_lit + lit
    next_table[:, Action.RIGHT] = (ci * 4 + (d + 1) % 4) * n_lit + lit
    b = light_bit[ci]
    new_lit = np.where(b >= 0, lit | (1 << np.maximum(b, 0)), lit)
    next_table[:, Action.LIGHT] = (ci * 4 + d) * n_lit + new_lit

    goal = lit == n_lit - 1
    next_table[goal, :] = idx[goal, None]
    return next_table


@dataclass(frozen=True)
class HeuristicTable:
    """h[s] = exact minimum effective actions from state s to any goal."""

    index: StateIndex
    h: np.ndarray
    next_table: np.ndarray

    def at(self, s: WorldState) -> int:
        return int(self.h[self.index.encode(s)])


def compute_heuristic(task: TaskSpec, limit: int = DEFAULT_STATE_LIMIT) -> HeuristicTable:
    """Multi-source reverse BFS over the state graph, via min-plus iteration."""
    index = enumerate_states(task, limit)
    nxt = transition_table(index)
    n_lit = index.n_lit
    h = np.full(index.n_states, UNREACHABLE, dtype=np.int64)
    goal = (np.arange(index.n_states) % n_lit) == n_lit - 1
    h[goal] = 0
    while True:
        best = h[nxt[:, 0]]
        for a in range(1, 5):
            np.minimum(best, h[nxt[:, a]], out=best)
        new_h = np.minimum(h, np.where(best >= UNREACHABLE, UNREACHABLE, best + 1))
        if np.array_equal(new_h, h):
            break
        h = new_h
    return HeuristicTable(index=index, h=h, next_table=nxt)


def is_redundant(prev: tuple[Action, ...], a: Action) -> bool:
    """True iff appending `a` forms LLL, RRR, LR, RL, or turn-then-light."""
    if not prev:
        return False
    last = prev[-1]
    if a is Action.LIGHT:
        return last in (Action.LEFT, Action.RIGHT)
    if a is Action.LEFT:
        if last is Action.RIGHT:
            return True
        return len(prev) >= 2 and prev[-1] is Action.LEFT and prev[-2] is Action.LEFT
    if a is Action.RIGHT:
        if last is Action.LEFT:
            return True
        return len(prev) >= 2 and prev[-1] is Action.RIGHT and prev[-2] is Action.RIGHT
    return False


@dataclass(frozen=True)
class SearchConfig:
    min_traces: int = 1000
    max_expansions: int = 5_000_000

    def __post_init__(self) -> None:
        if self.min_traces < 1:
            raise ValueError("min_traces must be >= 1")


@dataclass(frozen=True)
class TraceSet:
    """All collected traces, sorted by (length, action order).

    `exhausted` flags searches whose frontier emptied before reaching the
    requested number of traces; the set then holds everything that exists.
    """

    task_id: str
    traces: tuple[tuple[Action, ...], ...]
    exhausted: bool = False

    @property
    def max_cost(self) -> int:
        return max((len(t) for t in self.traces), default=0)

    @cached_property
    def as_set(self) -> frozenset[tuple[Action, ...]]:
        return frozenset(self.traces)


_ACTIONS = tuple(Action)


def search_traces(task: TaskSpec, heur: HeuristicTable, cfg: SearchConfig) -> TraceSet:
    """Collect at least cfg.min_traces cheapest traces plus all cost ties.

    Search is over action sequences, not states: distinct traces reaching
    the same state stay distinct. Completed traces pop in nondecreasing
    cost because the heuristic is consistent.
    """
    nxt = heur.next_table.tolist()
    h = heur.h.tolist()
    start = heur.index.encode(initial_state(task))
    collected: list[tuple[Action, ...]] = []
    bound: int | None = None
    heap: list[tuple[int, tuple[Action, ...], int]] = []
    h0 = h[start]
    if h0 < UNREACHABLE:
        heap.append((h0, (), start))
    expansions = 0
    while heap:
        f, trace, state = heapq.heappop(heap)
        if bound is not None and f > bound:
            break
        if h[state] == 0:
            collected.append(trace)
            if bound is None and len(collected) >= cfg.min_traces:
                bound = len(collected[cfg.min_traces - 1])
            continue
        expansions += 1
        if expansions > cfg.max_expansions:
            raise CapacityError(
                f"task {task.id!r}: search exceeded {cfg.max_expansions} expansions"
            )
        g = len(trace) + 1
        row = nxt[state]
        for a in _ACTIONS:
            ns = row[a]
            if ns == state:
                continue
            if is_redundant(trace[-2:], a):
                continue
            ha = h[ns]
            if ha >= UNREACHABLE:
                continue
            heapq.heappush(heap, (g + ha, trace + (a,), ns))
    exhausted = len(collected) < cfg.min_traces
    collected.sort(key=lambda t: (len(t), t))
    return TraceSet(task_id=task.id, traces=tuple(collected), exhausted=exhausted)
