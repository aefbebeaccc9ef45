import numpy as np
import pytest

from hiplan.program import Program, execute
from hiplan.search import (
    SearchConfig,
    compute_heuristic,
    is_redundant,
    search_traces,
    transition_table,
    UNREACHABLE,
)
from hiplan.task import Action, Cell, Dir, TaskSpec, WorldState, enumerate_states, initial_state

from conftest import flat_cells
from oracles import bfs_goal_distance, brute_force_traces

W, J, L, R, LI = Action.WALK, Action.JUMP, Action.LEFT, Action.RIGHT, Action.LIGHT


class TestHeuristic:
    def test_goal_states_are_zero(self, two_cell_task):
        heur = compute_heuristic(two_cell_task)
        assert heur.at(WorldState(0, 0, Dir.E, 1)) == 0
        assert heur.at(WorldState(1, 0, Dir.S, 1)) == 0

    def test_on_unlit_light_is_one(self, two_cell_task):
        heur = compute_heuristic(two_cell_task)
        assert heur.at(WorldState(1, 0, Dir.E, 0)) == 1

    def test_one_walk_away_is_two(self, two_cell_task):
        heur = compute_heuristic(two_cell_task)
        assert heur.at(WorldState(0, 0, Dir.E, 0)) == 2

    @pytest.mark.parametrize(
        "fixture", ["two_cell_task", "symmetric_task", "staircase_task", "s_task"]
    )
    def test_matches_bfs_oracle(self, fixture, request):
        task = request.getfixturevalue(fixture)
        heur = compute_heuristic(task)
        index = heur.index
        for idx in range(index.n_states):
            state = index.decode(idx)
            expected = bfs_goal_distance(task, state)
            got = int(heur.h[idx])
            if expected is None:
                assert got == UNREACHABLE
            else:
                assert got == expected

    def test_consistency_over_all_edges(self, s_task):
        heur = compute_heuristic(s_task)
        h, nxt = heur.h, heur.next_table
        effective = nxt != np.arange(len(h))[:, None]
        for a in range(5):
            mask = effective[:, a] & (h < UNREACHABLE) & (h[nxt[:, a]] < UNREACHABLE)
            assert np.all(h[mask] <= 1 + h[nxt[:, a]][mask])

    def test_unreachable_is_marked(self):
        # the light sits on an unreachable high pillar
        task = TaskSpec(
            id="pillar",
            cells=(Cell(0, 0, 0, False), Cell(1, 0, 3, True)),
            start=(0, 0, Dir.E),
        )
        heur = compute_heuristic(task)
        assert heur.at(initial_state(task)) == UNREACHABLE


class TestTransitionTable:
    def test_agrees_with_apply_action(self, s_task, staircase_task):
        from hiplan.task import apply_action

        for task in (s_task, staircase_task):
            index = enumerate_states(task)
            table = transition_table(index)
            for idx in range(index.n_states):
                state = index.decode(idx)
                for a in Action:
                    assert table[idx, a] == index.encode(apply_action(task, state, a))


class TestIsRedundant:
    def test_triple_left(self):
        assert is_redundant((L, L), L)

    def test_triple_right(self):
        assert is_redundant((R, R), R)

    def test_left_right_pair(self):
        assert is_redundant((W, L), R)
        assert is_redundant((W, R), L)

    def test_light_after_turn(self):
        assert is_redundant((W, R), LI)
        assert is_redundant((W, L), LI)

    def test_two_turns_fine(self):
        assert not is_redundant((W, L), L)

    def test_light_after_walk_fine(self):
        assert not is_redundant((L, W), LI)

    def test_empty_prefix(self):
        assert not is_redundant((), LI)


class TestSearchTraces:
    def test_two_cell_single_trace(self, two_cell_task):
        heur = compute_heuristic(two_cell_task)
        result = search_traces(two_cell_task, heur, SearchConfig(min_traces=1))
        assert result.traces == ((W, LI),)
        assert result.max_cost == 2
        assert not result.exhausted

    def test_symmetric_ties_exhausted(self, symmetric_task):
        heur = compute_heuristic(symmetric_task)
        result = search_traces(symmetric_task, heur, SearchConfig(min_traces=1))
        expected = brute_force_traces(symmetric_task, 8)
        assert result.max_cost == 8
        assert set(result.traces) == expected
        assert len(result.traces) == 4

    def test_exhaustion_flagged(self):
        task = TaskSpec(
            id="one_cell",
            cells=(Cell(0, 0, 0, True),),
            start=(0, 0, Dir.N),
        )
        heur = compute_heuristic(task)
        result = search_traces(task, heur, SearchConfig(min_traces=5))
        assert result.exhausted
        assert result.traces == ((LI,),)

    def test_all_traces_solve_and_end_at_goal(self, staircase_task):
        heur = compute_heuristic(staircase_task)
        result = search_traces(staircase_task, heur, SearchConfig(min_traces=50))
        for trace in result.traces:
            outcome = execute(staircase_task, Program(main=trace))
            assert outcome.solved
            assert outcome.steps == len(trace)

    def test_costs_nondecreasing_and_sorted(self, s_task):
        heur = compute_heuristic(s_task)
        result = search_traces(s_task, heur, SearchConfig(min_traces=30))
        lengths = [len(t) for t in result.traces]
        assert lengths == sorted(lengths)

    def test_deterministic(self, symmetric_task):
        heur = compute_heuristic(symmetric_task)
        a = search_traces(symmetric_task, heur, SearchConfig(min_traces=10))
        b = search_traces(symmetric_task, heur, SearchConfig(min_traces=10))
        assert a.traces == b.traces

    @pytest.mark.parametrize(
        "fixture",
        ["two_cell_task", "symmetric_task", "staircase_task", "light_corridor_task"],
    )
    def test_oracle_equivalence(self, fixture, request):
        """Tie exhaustion returns exactly the brute-force set up to max_cost."""
        task = request.getfixturevalue(fixture)
        heur = compute_heuristic(task)
        result = search_traces(task, heur, SearchConfig(min_traces=25))
        oracle = {
            t for t in brute_force_traces(task, result.max_cost)
            if len(t) <= result.max_cost
        }
        assert set(result.traces) == oracle
