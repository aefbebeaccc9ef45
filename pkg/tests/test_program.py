import pytest
from hypothesis import given, strategies as st

from hiplan.errors import NotSolvedError, ParseError
from hiplan.program import (
    Budget,
    Call,
    Outcome,
    Program,
    execute,
    parse_program,
    program_length,
    serialize_program,
)
from hiplan.render import render_tree
from hiplan.task import Action

W, J, L, R, LI = Action.WALK, Action.JUMP, Action.LEFT, Action.RIGHT, Action.LIGHT


class TestParse:
    def test_flat(self):
        p = parse_program("main: walk light\n")
        assert p.main == (W, LI)
        assert all(not b for b in p.subs)

    def test_with_sub(self):
        p = parse_program("main: p1 p1\np1: walk walk light\n")
        assert p.main == (Call(1), Call(1))
        assert p.subs[0] == (W, W, LI)

    def test_call_out_of_range(self):
        with pytest.raises(ParseError):
            parse_program("main: p5\n")

    def test_unknown_token(self):
        with pytest.raises(ParseError):
            parse_program("main: walk fly\n")

    def test_missing_main(self):
        with pytest.raises(ParseError):
            parse_program("p1: walk\n")

    def test_comments_and_blanks(self):
        p = parse_program("# a comment\nmain: walk # trailing\n\np2: left\n")
        assert p.main == (W,)
        assert p.subs[1] == (L,)

    def test_duplicate_main(self):
        with pytest.raises(ParseError):
            parse_program("main: walk\nmain: jump\n")


instruction = st.one_of(
    st.sampled_from(list(Action)),
    st.builds(Call, st.integers(1, 4)),
)
body = st.lists(instruction, max_size=6).map(tuple)
programs = st.builds(
    Program,
    main=body,
    subs=st.tuples(body, body, body, body),
)


class TestSerialize:
    def test_flat_text(self):
        assert serialize_program(Program(main=(W,))) == "main: walk\n"

    def test_serpentine_sub_line(self, serpentine_program):
        text = serialize_program(serpentine_program)
        assert "p1: walk walk walk light" in text

    @given(programs)
    def test_round_trip(self, p):
        assert parse_program(serialize_program(p)) == p


class TestProgramLength:
    def test_serpentine_is_13(self, serpentine_program):
        assert program_length(serpentine_program) == 13

    def test_empty(self):
        assert program_length(Program()) == 0

    def test_calls_count_one(self):
        p = Program(main=(Call(1), Call(1)), subs=((W, W, LI),))
        assert program_length(p) == 5


class TestExecute:
    def test_serpentine_on_s_room(self, s_task, serpentine_program):
        result = execute(s_task, serpentine_program)
        assert result.outcome is Outcome.SOLVED
        assert result.steps == 18

    def test_empty_main_not_solved(self, two_cell_task):
        result = execute(two_cell_task, Program())
        assert result.outcome is Outcome.NOT_SOLVED
        assert result.trace == ()

    def test_infinite_rotation_non_halting(self, two_cell_task):
        p = parse_program("main: p1\np1: left p1\n")
        result = execute(two_cell_task, p)
        assert result.outcome is Outcome.NON_HALTING

    def test_flat_equivalence(self, two_cell_task):
        p = Program(main=(W, LI, W, W))
        result = execute(two_cell_task, p)
        assert result.solved
        assert result.trace == (W, LI)  # truncated at the goal

    def test_halting_action_included(self, two_cell_task):
        result = execute(two_cell_task, Program(main=(W, LI)))
        assert result.trace[-1] is LI

    def test_no_effect_actions_counted(self, two_cell_task):
        p = Program(main=(LI, W, LI))  # first light is off a light cell
        result = execute(two_cell_task, p)
        assert result.solved
        assert result.steps == 3

    def test_call_to_empty_sub_is_noop(self, two_cell_task):
        p = parse_program("main: p3 walk light\n")
        result = execute(two_cell_task, p)
        assert result.solved
        assert result.steps == 2

    def test_budget_monotone(self, two_cell_task, serpentine_program, s_task):
        small = execute(s_task, serpentine_program, Budget(max_steps=5))
        assert small.outcome is Outcome.NON_HALTING
        big = execute(s_task, serpentine_program, Budget(max_steps=50))
        assert big.outcome is Outcome.SOLVED

    def test_depth_budget(self, two_cell_task):
        p = parse_program("main: p1\np1: p2\np2: p1\n")
        result = execute(two_cell_task, p, Budget(max_depth=16))
        assert result.outcome is Outcome.NON_HALTING

    def test_recursive_solves(self, light_corridor_task):
        p = parse_program("main: p1\np1: light walk walk p1\n")
        result = execute(light_corridor_task, p)
        assert result.solved
        assert result.steps == 7

    @given(p=programs)
    def test_deterministic(self, two_cell_task, p):
        a = execute(two_cell_task, p, Budget(max_steps=200, max_depth=16))
        b = execute(two_cell_task, p, Budget(max_steps=200, max_depth=16))
        assert a == b


class TestRenderTree:
    def test_flat_star(self, two_cell_task):
        dot = render_tree(Program(main=(W, LI)), two_cell_task)
        assert dot.count('label="walk"') == 1
        assert dot.count('label="light"') == 1
        assert dot.count("->") == 2

    def test_serpentine_reuse_dashed(self, s_task, serpentine_program):
        dot = render_tree(serpentine_program, s_task)
        assert dot.count('label="p1"') == 3
        # first call expands with solid edges, the other two dashed
        assert dot.count("[style=dashed]") == 8

    def test_not_solved_error(self, two_cell_task):
        with pytest.raises(NotSolvedError):
            render_tree(Program(main=(W,)), two_cell_task)
