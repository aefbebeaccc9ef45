from pathlib import Path

import pytest

from hiplan.program import Call, Program
from hiplan.task import Action, Cell, Dir, TaskSpec

TASK_DIR = Path(__file__).resolve().parent.parent / "tasks"

W, J, L, R, LI = Action.WALK, Action.JUMP, Action.LEFT, Action.RIGHT, Action.LIGHT


def flat_cells(coords, lights, height=0):
    return tuple(Cell(x, y, height, (x, y) in set(lights)) for x, y in coords)


@pytest.fixture(scope="session")
def two_cell_task():
    return TaskSpec(
        id="two_cell",
        cells=flat_cells([(0, 0), (1, 0)], [(1, 0)]),
        start=(0, 0, Dir.E),
    )


@pytest.fixture(scope="session")
def s_task():
    """A 4x3 room whose three lights sit at alternating row ends, so the
    serpentine program from the examples solves it in 18 steps."""
    coords = [(x, y) for y in range(3) for x in range(4)]
    return TaskSpec(
        id="s_room",
        cells=flat_cells(coords, [(3, 0), (0, 1), (3, 2)]),
        start=(0, 0, Dir.E),
    )


@pytest.fixture(scope="session")
def serpentine_program():
    """main=[p1, R, W, R, p1, L, W, L, p1], p1=[W, W, W, LIGHT]."""
    return Program(
        main=(Call(1), R, W, R, Call(1), L, W, L, Call(1)),
        subs=((W, W, W, LI),),
    )


@pytest.fixture(scope="session")
def symmetric_task():
    """Two lights one step east and west of the start; facing north, both
    optimal solutions cost eight actions."""
    return TaskSpec(
        id="symmetric",
        cells=flat_cells([(-1, 0), (0, 0), (1, 0)], [(-1, 0), (1, 0)]),
        start=(0, 0, Dir.N),
    )


@pytest.fixture(scope="session")
def staircase_task():
    cells = tuple(
        Cell(x, 0, x, x > 0) for x in range(4)
    )
    return TaskSpec(id="staircase", cells=cells, start=(0, 0, Dir.E))


@pytest.fixture(scope="session")
def light_corridor_task():
    """Lights on every other cell of a corridor, starting on one."""
    return TaskSpec(
        id="light_corridor",
        cells=flat_cells([(x, 0) for x in range(5)], [(0, 0), (2, 0), (4, 0)]),
        start=(0, 0, Dir.E),
    )


@pytest.fixture(scope="session")
def task_dir():
    return TASK_DIR
