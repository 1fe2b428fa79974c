import numpy as np
import pandas as pd
import pytest
from dataclasses import replace

from builtin_problems import BUILTIN_NAMES, builtin_problem
from constants import BOUNDARY_EXACT, ON_NO_NASH_FREEZE, STATUS_CONVERGED, STATUS_HALTED
from game import ControlGrid, GameProblem, MissingExactSolutionError
from grid import uniform_grid
from solver import (InitialGuess, NoNashEquilibriumError, SolverConfig, apply_boundary_values, classify_nodes,
                    discretize, frozen_update, initial_fields, local_nash_search, q_value, solve, sweep,
                    time_step, verify_nash_feedback)

FREEZE = SolverConfig(on_no_nash=ON_NO_NASH_FREEZE)


def setup(name, **kwargs):
    problem, grid, controls, config = builtin_problem(name, **kwargs)
    return problem, grid, controls, config, discretize(problem, grid, controls, config)


def matching_pennies_problem():
    # payoffs a1 * a2 and -a1 * a2 on {-1, 1}^2 admit no pure equilibrium
    return GameProblem('pennies', 1, lambda x, a1, a2: (np.asarray(a1) + 0.0 * np.asarray(a2),),
                       (lambda x, a1, a2: np.asarray(a1) * a2, lambda x, a1, a2: -np.asarray(a1) * a2),
                       f_inf_norm=1.0)


# ==================== time step and local payoffs ====================

def test_time_step_test3():
    problem, grid, controls, config = builtin_problem('test3')
    h, f_norm = time_step(problem, grid, controls, config)
    assert h == pytest.approx(0.08)
    assert f_norm == 1.0


def test_time_step_test1():
    problem, grid, controls, config = builtin_problem('test1')
    assert time_step(problem, grid, controls, config)[0] == pytest.approx(0.1)


def test_time_step_override():
    problem, grid, controls, _ = builtin_problem('test1')
    assert time_step(problem, grid, controls, SolverConfig(time_step=0.05))[0] == 0.05


def test_time_step_estimated_when_not_supplied():
    problem, grid, controls, _ = builtin_problem('test4')
    problem = replace(problem, f_inf_norm=None)
    h, f_norm = time_step(problem, grid, controls)
    assert f_norm == 2.0
    assert h == pytest.approx(0.04)


def test_q_value_zero_field():
    _, grid, _, _, game = setup('test1')
    zero = np.zeros((2, grid.num_nodes))
    assert q_value(game, 0, 25, (0.0, 0.0), zero) == 0.0
    assert q_value(game, 0, 25, (1.0, 0.0), zero) == pytest.approx(0.1 / 1.1 * 0.5)


def test_q_value_constant_field_without_cost():
    _, grid, _, _, game = setup('test3')
    center = grid.flat_index((25, 25))
    fields = np.full((2, grid.num_nodes), 7.0)
    assert q_value(game, 1, center, (1.0, -1.0), fields) == pytest.approx(7.0 / 1.08)


def test_local_nash_search_zero_field_test1():
    _, grid, _, _, game = setup('test1')
    result = local_nash_search(game, 25, np.zeros((2, grid.num_nodes)))
    assert result.found
    assert result.controls == (0.0, 0.0)


def test_local_nash_search_exact_test2():
    problem, grid, _, _, game = setup('test2')
    exact = problem.exact_values(grid.coordinates)
    for node in (5, 25, 40):
        result = local_nash_search(game, node, exact)
        assert result.found
        assert result.controls == pytest.approx((1.0, -2.0))


def test_local_nash_search_reports_absence():
    problem = matching_pennies_problem()
    grid = uniform_grid(-1.0, 1.0, 5)
    game = discretize(problem, grid, ControlGrid((np.array([-1.0, 1.0]), np.array([-1.0, 1.0]))))
    result = local_nash_search(game, 2, np.zeros((2, grid.num_nodes)))
    assert not result.found
    assert result.controls is None
    assert result.candidates_checked == 4


# ==================== sweeps ====================

def test_zero_is_fixed_point_of_test1():
    _, grid, _, _, game = setup('test1')
    zero = np.zeros((2, grid.num_nodes))
    new, report, _ = sweep(game, zero)
    np.testing.assert_array_equal(new, zero)
    assert report.increments == (0.0, 0.0)


def test_exact_projection_is_stationary_for_test2():
    problem, grid, _, _, game = setup('test2')
    exact = problem.exact_values(grid.coordinates)
    new, report, selection = sweep(game, exact)
    np.testing.assert_allclose(new, exact, atol=1e-11)
    assert max(report.increments) < 1e-10
    interior = grid.interior_nodes
    np.testing.assert_allclose(game.control_values(selection.indices)[interior], [[1.0, -2.0]] * interior.size)


def test_increments_decrease_from_constant_guess_test2():
    problem, grid, controls, config, game = setup('test2')
    fields = initial_fields(problem, grid, config.initial_guess)
    increments = []
    for k in range(6):
        fields, report, _ = sweep(game, fields, config, iteration=k + 1)
        increments.append(max(report.increments))
    assert all(b < a for a, b in zip(increments, increments[1:]))


def test_boundary_values_are_bit_identical():
    problem, grid, controls, config, game = setup('test2')
    fields = initial_fields(problem, grid, InitialGuess('constant', 150.0))
    fields[:, grid.boundary_mask] = [[3.25], [-7.5]]
    start = fields.copy()
    for k in range(5):
        fields = sweep(game, fields, FREEZE, iteration=k + 1)[0]
    np.testing.assert_array_equal(fields[:, grid.boundary_mask], start[:, grid.boundary_mask])


@pytest.mark.parametrize("name", ['test2', 'test3', 'test4'])
def test_sweep_is_independent_of_node_order(name):
    problem, grid, _, _, game = setup(name)
    rng = np.random.default_rng(11)
    fields = rng.uniform(0.0, 5.0, (2, grid.num_nodes))
    reference = sweep(game, fields, FREEZE)[0]
    permuted = sweep(game, fields, FREEZE, node_order=rng.permutation(grid.interior_nodes))[0]
    threaded = sweep(game, fields, replace(FREEZE, workers=4))[0]
    np.testing.assert_array_equal(reference, permuted)
    np.testing.assert_array_equal(reference, threaded)


def test_node_order_must_cover_interior():
    _, grid, _, _, game = setup('test1')
    with pytest.raises(ValueError):
        sweep(game, np.zeros((2, grid.num_nodes)), node_order=[1, 2, 3])


def test_same_pair_updates_both_players():
    problem, grid, _, _, game = setup('test2')
    fields = np.full((2, grid.num_nodes), 150.0)
    new, _, selection = sweep(game, fields)
    a = game.control_values(selection.indices)
    node = 25
    for player in range(2):
        assert new[player, node] == pytest.approx(q_value(game, player, node, tuple(a[node]), fields), abs=1e-12)


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_frozen_update_is_a_contraction(name):
    _, grid, controls, _, game = setup(name)
    rng = np.random.default_rng(5)
    bound = float(np.max(game.c1))
    interior = grid.interior_nodes
    for _ in range(100):
        indices = np.full((grid.num_nodes, 2), -1)
        indices[interior, 0] = rng.integers(0, controls.sizes[0], interior.size)
        indices[interior, 1] = rng.integers(0, controls.sizes[1], interior.size)
        U = rng.normal(scale=10.0, size=(2, grid.num_nodes))
        V = U + rng.normal(scale=rng.uniform(0.01, 10.0), size=U.shape)
        V[:, grid.boundary_mask] = U[:, grid.boundary_mask]
        gap = np.max(np.abs(frozen_update(game, U, indices) - frozen_update(game, V, indices)))
        assert gap <= bound * np.max(np.abs(U - V)) + 1e-12


# ==================== policies ====================

def test_halt_policy_raises_with_node():
    problem = matching_pennies_problem()
    grid = uniform_grid(-1.0, 1.0, 5)
    controls = ControlGrid((np.array([-1.0, 1.0]), np.array([-1.0, 1.0])))
    with pytest.raises(NoNashEquilibriumError) as info:
        solve(problem, grid, controls, SolverConfig(initial_guess=InitialGuess('constant', 0.0)))
    assert info.value.node == 1
    assert info.value.iteration == 1
    assert info.value.result.status == STATUS_HALTED
    assert info.value.result.halted_node == 1


def test_freeze_policy_keeps_values_and_counts():
    problem = matching_pennies_problem()
    grid = uniform_grid(-1.0, 1.0, 5)
    controls = ControlGrid((np.array([-1.0, 1.0]), np.array([-1.0, 1.0])))
    config = SolverConfig(initial_guess=InitialGuess('constant', 2.0), on_no_nash=ON_NO_NASH_FREEZE)
    result = solve(problem, grid, controls, config)
    np.testing.assert_array_equal(result.fields, 2.0)
    assert result.history[0].nodes_without_nash == 3
    assert np.all(np.isnan(result.feedback))


# ==================== initial guesses and configuration ====================

@pytest.mark.parametrize("text, kind, value", [("constant:150", 'constant', 150.0), ("42", 'constant', 42.0),
                                               ("exact", 'exact', 0.0), ("perturbed-exact:0.5", 'perturbed-exact', 0.5)])
def test_initial_guess_parse(text, kind, value):
    guess = InitialGuess.parse(text)
    assert (guess.kind, guess.value) == (kind, value)
    assert InitialGuess.parse(str(guess)) == guess


def test_initial_guess_parse_rejects_garbage():
    with pytest.raises(ValueError):
        InitialGuess.parse("warm-start")


def test_perturbed_exact_is_reproducible():
    problem, grid, _, _ = builtin_problem('test2')
    guess = InitialGuess('perturbed-exact', 0.5)
    a = initial_fields(problem, grid, guess, np.random.default_rng(7))
    b = initial_fields(problem, grid, guess, np.random.default_rng(7))
    np.testing.assert_array_equal(a, b)
    assert 0 < np.max(np.abs(a - problem.exact_values(grid.coordinates))) <= 0.5


def test_formal_guess_and_unknown_name():
    problem, grid, _, _ = builtin_problem('test1')
    uhat = initial_fields(problem, grid, InitialGuess.parse('formal:uhat'))
    np.testing.assert_allclose(uhat[0], -0.5 * grid.coordinates[:, 0] ** 2)
    with pytest.raises(ValueError, match="no formal solution"):
        initial_fields(problem, grid, InitialGuess.parse('formal:nope'))


def test_file_guess(tmp_path):
    problem, grid, _, _ = builtin_problem('test1')
    path = tmp_path / 'guess.csv'
    pd.DataFrame({'x': grid.coordinates[:, 0], 'U1': np.arange(51.0), 'U2': -np.arange(51.0)}).to_csv(path, index=False)
    fields = initial_fields(problem, grid, InitialGuess.parse(f'file:{path}'))
    np.testing.assert_array_equal(fields[1], -np.arange(51.0))
    pd.DataFrame({'U1': [0.0], 'U2': [0.0]}).to_csv(path, index=False)
    with pytest.raises(ValueError, match="rows"):
        initial_fields(problem, grid, InitialGuess.parse(f'file:{path}'))


@pytest.mark.parametrize("kwargs", [{'tolerances': (0.0, 1e-6)}, {'max_iterations': 0},
                                    {'on_no_nash': 'ignore'}, {'time_step': -1.0}, {'workers': 0}])
def test_solver_config_validation(kwargs):
    with pytest.raises(ValueError):
        SolverConfig(**kwargs)


def test_builtin_boundary_values():
    assert builtin_problem('test1')[3].boundary_value == (100.0, 100.0)
    assert builtin_problem('test1-wide')[3].boundary_value == (100.0, 100.0)
    assert builtin_problem('test2')[3].boundary_value == BOUNDARY_EXACT
    assert builtin_problem('test4')[3].boundary_value is None


def test_formal_guess_keeps_constant_boundary():
    problem, grid, controls, config = builtin_problem('test1')
    config = replace(config, initial_guess=InitialGuess.parse('formal:uhat'), max_iterations=1,
                     on_no_nash=ON_NO_NASH_FREEZE)
    result = solve(problem, grid, controls, config)
    np.testing.assert_array_equal(result.initial[:, grid.boundary_mask], 100.0)
    np.testing.assert_allclose(result.initial[0, grid.interior_nodes],
                               -0.5 * grid.coordinates[grid.interior_nodes, 0] ** 2)


def test_exact_boundary_from_constant_guess():
    problem, grid, _, _ = builtin_problem('test2')
    fields = apply_boundary_values(problem, grid, np.full((2, grid.num_nodes), 150.0), BOUNDARY_EXACT)
    exact = problem.exact_values(grid.coordinates)
    np.testing.assert_array_equal(fields[:, grid.boundary_mask], exact[:, grid.boundary_mask])
    np.testing.assert_array_equal(fields[:, grid.interior_nodes], 150.0)
    problem4, grid4, _, _ = builtin_problem('test4')
    with pytest.raises(MissingExactSolutionError):
        apply_boundary_values(problem4, grid4, np.zeros((2, grid4.num_nodes)), BOUNDARY_EXACT)


@pytest.mark.parametrize("value", ['exact', ' exact', (1.0, 2.0), 3.0])
def test_boundary_value_forms(value):
    config = SolverConfig(boundary_value=value)
    assert config.boundary_value in (BOUNDARY_EXACT, (1.0, 2.0), (3.0, 3.0))


def test_boundary_value_rejects_other_words():
    with pytest.raises(ValueError):
        SolverConfig(boundary_value='linear')



def test_classify_nodes_synthetic():
    interior = np.array([1, 2, 3])
    iterates = []
    for k in range(12):
        fields = np.zeros((2, 5))
        fields[0, 1] = k % 2            # period 2
        fields[1, 3] = 1.0 / (k + 1)    # still moving
        iterates.append(fields)
    oscillating, stabilized = classify_nodes(iterates, (1e-6, 1e-6), interior)
    np.testing.assert_array_equal(oscillating, [1])
    np.testing.assert_array_equal(stabilized, [2])


# ==================== full runs ====================

def test_test1_converges_to_zero():
    problem, grid, controls, config = builtin_problem('test1')
    result = solve(problem, grid, controls, config)
    assert result.status == STATUS_CONVERGED
    assert np.max(np.abs(result.fields[:, grid.interior_nodes])) <= 10 * 1e-6
    np.testing.assert_allclose(result.feedback[grid.interior_nodes], 0.0, atol=1e-12)
    assert verify_nash_feedback(result.game, result.previous_fields, result.feedback_indices).size == 0


def test_test1_from_ubar_converges_to_zero():
    problem, grid, controls, config = builtin_problem('test1')
    result = solve(problem, grid, controls, replace(config, initial_guess=InitialGuess.parse('formal:ubar')))
    assert result.converged
    assert np.max(np.abs(result.fields[:, grid.interior_nodes])) <= 10 * 1e-6


def test_test2_exact_projection_converges_immediately():
    problem, grid, controls, config = builtin_problem('test2')
    result = solve(problem, grid, controls, replace(config, initial_guess=InitialGuess('exact', 0.0)))
    assert result.converged
    assert result.iterations <= 2


def test_test3_converges_symmetric_and_within_eps_over_h_in_ball():
    problem, grid, controls, config = builtin_problem('test3')
    result = solve(problem, grid, controls, config, keep_iterates=[0, 50])
    assert result.converged
    assert result.iterations <= 1000
    np.testing.assert_allclose(result.fields[0], result.fields[1], atol=1e-10)
    h = result.h
    r = np.hypot(grid.coordinates[:, 0], grid.coordinates[:, 1])
    inside = r < 1.0
    # stopping at increment eps leaves a residual of up to eps (1 + h) / h, about 13.5 eps at h = 0.08
    assert np.max(np.abs(result.fields[:, inside])) <= 1e-6 * (1 + h) / h
    # nondecreasing outward along the axes through the origin
    U = result.fields[0].reshape(grid.nodes_per_axis, order='F')
    rays = [U[25:-1, 25], U[25:0:-1, 25], U[25, 25:-1], U[25, 25:0:-1]]
    for ray in rays:
        assert np.all(np.diff(ray) >= -1e-5)
    assert verify_nash_feedback(result.game, result.previous_fields, result.feedback_indices).size == 0
    assert set(result.snapshots) == {0, 50}
