import numpy as np
import pytest

from builtin_problems import builtin_problem
from constants import ON_NO_NASH_FREEZE
from diagnostics import (apply_F, default_scan_range, detect_fixed_points, detect_jumps, interpolation_matrix,
                         jacobian_inf_norm, nash_indices, scan_component, scheme_residual, stacked_index)
from solver import SolverConfig, discretize, solve, sweep


def game_for(name):
    problem, grid, controls, config = builtin_problem(name)
    return problem, grid, discretize(problem, grid, controls, config)


@pytest.fixture(scope='module')
def test3_run():
    problem, grid, controls, config = builtin_problem('test3')
    return solve(problem, grid, controls, config, keep_iterates=[0, 50])


@pytest.mark.parametrize("name", ['test1', 'test2', 'test3'])
def test_apply_F_agrees_with_sweep(name):
    _, grid, game = game_for(name)
    rng = np.random.default_rng(1)
    fields = rng.uniform(0.0, 10.0, (2, grid.num_nodes))
    config = SolverConfig(on_no_nash=ON_NO_NASH_FREEZE)
    expected = sweep(game, fields, config)[0].ravel()
    np.testing.assert_allclose(apply_F(game, fields.ravel(), config), expected, rtol=1e-14, atol=1e-12)


def test_interpolation_matrix_rows_sum_to_one():
    _, grid, game = game_for('test3')
    indices = nash_indices(game, np.full(2 * grid.num_nodes, 5.0))
    lam = interpolation_matrix(game, indices)
    np.testing.assert_allclose(np.asarray(lam.sum(axis=1)).ravel(), 1.0, atol=1e-12)
    boundary = np.flatnonzero(grid.boundary_mask)
    np.testing.assert_array_equal(lam.diagonal()[boundary], 1.0)


def test_apply_F_rejects_wrong_length():
    _, grid, game = game_for('test1')
    with pytest.raises(ValueError):
        apply_F(game, np.zeros(grid.num_nodes))


def test_frozen_jacobian_equals_contraction_factor():
    _, grid, game = game_for('test2')
    U = np.random.default_rng(2).normal(size=2 * grid.num_nodes)
    estimate = jacobian_inf_norm(game, U, frozen=True)
    assert estimate.norm == pytest.approx(1 / 1.1, abs=1e-8)
    assert estimate.frozen
    assert np.all(np.isnan(estimate.row_sums[[0, grid.num_nodes - 1]]))


def test_jacobian_at_constant_guess_test3():
    _, grid, game = game_for('test3')
    estimate = jacobian_inf_norm(game, np.full(2 * grid.num_nodes, 100.0))
    assert estimate.direction == -1
    assert estimate.delta == pytest.approx(1e-6 * 101.0)
    assert not estimate.flagged.all()
    assert estimate.norm == pytest.approx(1 / 1.08, rel=1e-6)
    boundary_rows = np.concatenate([np.flatnonzero(grid.boundary_mask),
                                    grid.num_nodes + np.flatnonzero(grid.boundary_mask)])
    assert np.all(np.isnan(estimate.row_sums[boundary_rows]))


def test_forward_step_flags_every_row_at_constant_guess_test3():
    _, grid, game = game_for('test3')
    estimate = jacobian_inf_norm(game, np.full(2 * grid.num_nodes, 100.0), direction=1)
    interior_rows = np.concatenate([grid.interior_nodes, grid.num_nodes + grid.interior_nodes])
    assert estimate.flagged[interior_rows].all()
    assert np.isnan(estimate.norm)



@pytest.mark.parametrize("which", [50, 'final'])
def test_jacobian_along_test3_run(test3_run, which):
    fields = test3_run.fields if which == 'final' else test3_run.snapshots[which]
    estimate = jacobian_inf_norm(test3_run.game, fields.ravel())
    assert np.isfinite(estimate.norm)
    assert estimate.norm == pytest.approx(1 / 1.08, rel=1e-6)
    frame = estimate.frame(test3_run.game)
    assert set(frame['player']) == {1, 2}
    assert estimate.metadata()['flagged_rows'] == int(estimate.flagged.sum())


def test_jacobian_rejects_bad_direction():
    _, grid, game = game_for('test1')
    with pytest.raises(ValueError):
        jacobian_inf_norm(game, np.zeros(2 * grid.num_nodes), direction=0)


def test_scan_test1_at_zero_is_linear():
    _, grid, game = game_for('test1')
    j0 = stacked_index(game, 25, 0)
    scan = scan_component(game, j0, np.zeros(2 * grid.num_nodes), -0.1, 0.1, samples=201)
    assert (scan.node, scan.player) == (25, 0)
    assert scan.jumps.size == 0
    assert scan.max_piece_slope == pytest.approx(1 / 1.1, rel=1e-9)
    assert scan.piecewise_contractive
    assert scan.fixed_points.size == 1
    assert scan.fixed_points[0] == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_allclose(scan.F_values, scan.s_values / 1.1, atol=1e-15)


def test_scan_boundary_component_is_identity():
    _, grid, game = game_for('test1')
    scan = scan_component(game, stacked_index(game, 0, 1), np.zeros(2 * grid.num_nodes), -1.0, 1.0, samples=11)
    np.testing.assert_array_equal(scan.F_values, scan.s_values)


def test_scan_argument_checks():
    _, grid, game = game_for('test1')
    U = np.zeros(2 * grid.num_nodes)
    with pytest.raises(IndexError):
        scan_component(game, 2 * grid.num_nodes, U, 0.0, 1.0)
    with pytest.raises(ValueError):
        scan_component(game, 3, U, 1.0, 0.0)
    with pytest.raises(ValueError):
        scan_component(game, 3, U, 0.0, 1.0, samples=1)


def test_detect_jumps_and_fixed_points_on_step():
    s = np.linspace(-1.0, 1.0, 21)
    F = 0.5 * s + np.where(s > 0.05, 1.0, 0.0)
    jumps = detect_jumps(s, F, 0.5)
    assert jumps.sum() == 1
    assert s[np.flatnonzero(jumps)[0]] == pytest.approx(0.0, abs=1e-12)
    fixed = detect_fixed_points(s, F, jumps)
    assert fixed.size == 1
    assert fixed[0] == pytest.approx(0.0, abs=1e-12)


def test_default_scan_range_brackets_a_two_cycle():
    lo, hi = default_scan_range([0.003137, 0.003017])
    assert lo < 0.003017 - 4 * 0.00012 + 1e-12
    assert hi > 0.003137 + 4 * 0.00012 - 1e-12
    assert default_scan_range([2.0, 2.0]) == (0.0, 4.0)
    assert default_scan_range([0.0, 0.0]) == (-1.0, 1.0)



def test_scheme_residual_of_exact_projection():
    problem, grid, game = game_for('test2')
    residual = scheme_residual(game, problem.exact_values(grid.coordinates))
    assert max(residual) < 1e-10


def test_scheme_residual_of_converged_run(test3_run):
    residual = scheme_residual(test3_run.game, test3_run.fields)
    assert max(residual) < 1e-5
