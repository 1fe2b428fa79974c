from dataclasses import replace

import numpy as np
import pytest

from builtin_problems import builtin_problem
from grid import OutOfDomainError, eval_field
from solver import InitialGuess, solve
from trajectory import feedback_maps, nearest_interior_node, synthesize_trajectory


@pytest.fixture(scope='module')
def test2_result():
    problem, grid, controls, config = builtin_problem('test2')
    return solve(problem, grid, controls, replace(config, initial_guess=InitialGuess('exact', 0.0)))


def test_nearest_interior_node_skips_boundary(test2_result):
    grid = test2_result.game.grid
    assert nearest_interior_node(grid, np.array([-50.0])) == 1
    assert nearest_interior_node(grid, np.array([0.9])) == 25
    assert nearest_interior_node(grid, np.array([1.1])) == 26


@pytest.mark.parametrize("start", [-2.0, 0.0, 1.0])
def test_realized_costs_match_values(test2_result, start):
    record = synthesize_trajectory(test2_result, [start])
    assert not record.exited
    np.testing.assert_allclose(record.controls[0], [1.0, -2.0])
    expected = [eval_field(field, [start]) for field in test2_result.value_fields()]
    np.testing.assert_allclose(record.costs, expected, atol=5 * test2_result.h)
    assert record.times[1] == pytest.approx(test2_result.h)


def test_trajectory_leaving_domain_is_partial(test2_result):
    record = synthesize_trajectory(test2_result, [-45.0])
    assert record.exited
    assert record.exit_time == pytest.approx(5.1, abs=test2_result.h)
    assert record.times[-1] < 20.0


def test_start_outside_domain():
    problem, grid, controls, config = builtin_problem('test1')
    result = solve(problem, grid, controls, replace(config, initial_guess=InitialGuess('constant', 0.0)))
    with pytest.raises(OutOfDomainError):
        synthesize_trajectory(result, [60.0])
    record = synthesize_trajectory(result, [3.0], horizon=1.0)
    np.testing.assert_allclose(record.states[:, 0], 3.0)
    np.testing.assert_array_equal(record.costs, 0.0)


def test_feedback_maps_refuse_unset_nodes(test2_result):
    result = replace(test2_result, feedback_indices=np.full_like(test2_result.feedback_indices, -1))
    with pytest.raises(ValueError):
        feedback_maps(result)[0](np.array([0.0]))
