import json
from dataclasses import replace

import numpy as np
import pytest

from builtin_problems import BUILTIN_NAMES, builtin_problem, load_problem_config, problem_config
from game import (ControlGrid, DegenerateDynamicsError, GameProblem, MissingExactSolutionError,
                  TrajectoryExitError, discounted_cost, estimate_f_norm, evaluate_hamiltonian,
                  integrate_feedback)
from grid import uniform_grid


def constant(value):
    return lambda y: value


def test_estimate_f_norm_test3():
    problem, grid, controls, _ = builtin_problem('test3')
    assert estimate_f_norm(problem, grid, controls) == 1.0
    assert problem.f_inf_norm == 1.0


def test_estimate_f_norm_test1():
    problem, grid, controls, _ = builtin_problem('test1')
    assert estimate_f_norm(problem, grid, controls) == pytest.approx(20.0)
    assert problem.f_inf_norm == 20.0


def test_zero_dynamics_is_degenerate():
    problem = GameProblem('still', 1, lambda x, a1, a2: (0.0 * np.asarray(a1),),
                          (lambda x, a1, a2: 0.0, lambda x, a1, a2: 0.0))
    controls = ControlGrid.uniform(problem.control_bounds, (3, 3))
    with pytest.raises(DegenerateDynamicsError):
        estimate_f_norm(problem, uniform_grid(-1.0, 1.0, 5), controls)


def test_unknown_problem():
    with pytest.raises(ValueError, match="Unknown problem"):
        builtin_problem('test9')


def test_unknown_parameter():
    with pytest.raises(ValueError, match="Unknown parameter"):
        builtin_problem('test1', params={'k1': 1.0})


def test_nonpositive_discount_rejected():
    with pytest.raises(ValueError):
        builtin_problem('test1', params={'lambda1': 0.0})


def test_test2_exact_solution():
    problem, grid, _, config = builtin_problem('test2')
    x = np.array([[-2.0], [0.0], [1.0]])
    u = problem.exact_values(x)
    np.testing.assert_allclose(u[0], -x[:, 0] + 1.5)
    np.testing.assert_allclose(u[1], 2.0 * x[:, 0])
    assert config.initial_guess.value == 150.0


def test_test3_cost_vanishes_in_unit_ball():
    problem, _, _, _ = builtin_problem('test3')
    x = np.array([[0.5, 0.5], [1.5, 0.0], [2.0, 2.0]])
    cost = problem.running_cost(0, x, 1.0, -1.0)
    np.testing.assert_allclose(cost, [0.0, 1.5, np.sqrt(8.0)])


def test_test1_formal_solutions():
    problem, _, _, _ = builtin_problem('test1')
    assert set(problem.formal_solutions) == {'zero', 'ubar', 'uhat'}
    x = np.array([[-3.0], [-0.5], [0.0], [2.0]])
    ubar = problem.solution_values(problem.formal_solutions['ubar'], x)
    np.testing.assert_allclose(ubar[0], [0.0, -0.125, -0.5, 0.0])
    uhat = problem.solution_values(problem.formal_solutions['uhat'], x)
    np.testing.assert_allclose(uhat[0], -0.5 * x[:, 0] ** 2)


def test_missing_exact_solution():
    problem, grid, _, _ = builtin_problem('test4')
    with pytest.raises(MissingExactSolutionError):
        problem.exact_values(grid.coordinates)


def test_planar_grids_and_controls():
    problem, grid, controls, config = builtin_problem('test4')
    assert grid.nodes_per_axis == (51, 51)
    assert grid.dx[0] == pytest.approx(0.08)
    np.testing.assert_array_equal(controls.values[0], [-1.0, 0.0, 1.0])
    assert problem.f_inf_norm == 2.0
    assert config.max_iterations == 1000


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_problem_config_round_trip(name):
    problem, grid, controls, _ = builtin_problem(name)
    stored = json.loads(json.dumps(problem_config(problem, grid, controls)))
    problem2, grid2, controls2 = load_problem_config(stored)
    assert grid2 == grid
    assert problem2.parameters == problem.parameters
    assert problem2.control_bounds == problem.control_bounds
    for a, b in zip(controls.values, controls2.values):
        np.testing.assert_array_equal(a, b)


def test_control_grid_validation():
    with pytest.raises(ValueError):
        ControlGrid((np.array([0.0, 0.0]), np.array([1.0])))
    with pytest.raises(ValueError):
        ControlGrid((np.array([]), np.array([1.0])))
    problem, _, _, _ = builtin_problem('test3')
    with pytest.raises(ValueError):
        ControlGrid.uniform(((-2.0, 2.0), (-1.0, 1.0)), (3, 3)).check_bounds(problem)


def test_discounted_cost_test2_from_zero():
    problem, _, _, _ = builtin_problem('test2')
    costs = discounted_cost(problem, [0.0], [constant(1.0), constant(-2.0)], horizon=20.0, dt=0.01)
    np.testing.assert_allclose(costs, [1.5, 0.0], atol=0.02)


def test_discounted_cost_test2_from_one():
    problem, _, _, _ = builtin_problem('test2')
    dt = 0.01
    costs = discounted_cost(problem, [1.0], [constant(1.0), constant(-2.0)], dt=dt)
    # explicit Euler is first order in dt
    np.testing.assert_allclose(costs, [0.5, 2.0], atol=3 * dt)


def test_discounted_cost_zero_feedback_test1():
    problem, grid, _, _ = builtin_problem('test1')
    costs = discounted_cost(problem, [3.0], [constant(0.0), constant(0.0)], grid=grid)
    np.testing.assert_array_equal(costs, [0.0, 0.0])


def test_integrate_feedback_defaults_to_scheme_step():
    problem, grid, _, _ = builtin_problem('test4')
    record = integrate_feedback(problem, [0.0, 0.0], [constant(0.0), constant(0.0)], horizon=1.0, grid=grid)
    np.testing.assert_allclose(np.diff(record.times), 0.04)
    with pytest.raises(ValueError, match="dt is required"):
        integrate_feedback(problem, [0.0, 0.0], [constant(0.0), constant(0.0)], horizon=1.0)


def test_trajectory_exit_reports_time():
    problem, _, _, _ = builtin_problem('test2')
    with pytest.raises(TrajectoryExitError) as info:
        discounted_cost(problem, [0.0], [constant(1.0), constant(-2.0)], dt=0.1, bounds=([-1.05], [1.0]))
    assert info.value.exit_time == pytest.approx(1.1)


def test_integrate_feedback_records_path():
    problem, _, _, _ = builtin_problem('test3')
    record = integrate_feedback(problem, [0.0, 0.0], [constant(1.0), constant(0.0)], horizon=1.0, dt=0.25)
    np.testing.assert_allclose(record.states[-1], [0.0, 1.0])
    assert record.controls.shape == (4, 2)
    assert not record.exited


def test_discrete_hamiltonian_matches_closed_form():
    problem, _, controls, _ = builtin_problem('test2')
    x = np.linspace(-5, 5, 11)[:, None]
    p1, p2 = np.full_like(x, -1.0), np.full_like(x, 2.0)
    closed = evaluate_hamiltonian(problem, x, [p1, p2])
    discrete = evaluate_hamiltonian(replace(problem, hamiltonian=None), x, [p1, p2], controls)
    np.testing.assert_allclose(discrete, closed, atol=1e-12)
    np.testing.assert_allclose(closed[:, 0], -x[:, 0] + 1.5)
    np.testing.assert_allclose(closed[:, 1], 2.0 * x[:, 0])
