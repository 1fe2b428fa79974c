"""
Module: builtin_problems.py

Description:
Ready-made game setups: the scalar games with dynamics f = a1 + a2 and costs
h_i(x) + a_i^2 / 2 (zero, linear and cosine-perturbed h_i) and two planar
games on [-2, 2]^2 with three-valued controls. Each setup comes with its
grid, control discretization and solver defaults, and can be serialized to a
plain dict and rebuilt from it.

Author: F.Ahmadzade
"""

import logging
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

from constants import BOUNDARY_EXACT, DEFAULT_INITIAL_CONSTANT
from game import ControlGrid, GameProblem
from grid import GridSpec, uniform_grid
from solver import InitialGuess, SolverConfig

logger = logging.getLogger(__name__)

BUILTIN_NAMES = ('test1', 'test1-wide', 'test2', 'test2-perturbed', 'test3', 'test4')

# Keys accepted by every problem in addition to its own parameters
COMMON_PARAMETERS = ('lambda1', 'lambda2')

_DEFAULT_PARAMETERS = {
    'test1': {},
    'test1-wide': {},
    'test2': {'k1': -1.0, 'k2': 2.0},
    'test2-perturbed': {'k1': -1.0, 'k2': 2.0, 'delta': 2.0},
    'test3': {},
    'test4': {},
}


# ==================== Scalar games: f = a1 + a2 ====================

def _sum_dynamics(x, a1, a2):
    return (np.asarray(a1) + np.asarray(a2),)


def _scalar_costs(h1, h2):
    def psi1(x, a1, a2):
        return h1(x[..., 0]) + 0.5 * np.asarray(a1) ** 2

    def psi2(x, a1, a2):
        return h2(x[..., 0]) + 0.5 * np.asarray(a2) ** 2

    return psi1, psi2


def _scalar_hamiltonian(h1, h2):
    # each player minimizes p_i (a1 + a2) + a_i^2 / 2, so a_i = -p_i
    def hamiltonian(x, p1, p2):
        q1, q2 = p1[..., 0], p2[..., 0]
        s = x[..., 0]
        return np.stack([h1(s) - (0.5 * q1 + q2) * q1,
                         h2(s) - (0.5 * q2 + q1) * q2], axis=-1)

    return hamiltonian


def _zero(s):
    return np.zeros_like(np.asarray(s, dtype=float))


def _ubar1(s):
    s = np.asarray(s, dtype=float)
    return np.where(np.abs(s) < 1.0, -0.5 * (1.0 - np.abs(s)) ** 2, 0.0)


def _uhat1(s):
    return -0.5 * np.asarray(s, dtype=float) ** 2


def _on_x(fn):
    return lambda x: fn(np.asarray(x, dtype=float)[..., 0])


def _linear_exact(k1: float, k2: float):
    return (_on_x(lambda s: k1 * s - k1 * k2 - 0.5 * k1 ** 2),
            _on_x(lambda s: k2 * s - k1 * k2 - 0.5 * k2 ** 2))


def _scalar_game(name: str, params: Dict[str, float], bounds, h1, h2, exact, formal) -> GameProblem:
    psi1, psi2 = _scalar_costs(h1, h2)
    return GameProblem(
        name=name,
        state_dim=1,
        dynamics=_sum_dynamics,
        costs=(psi1, psi2),
        discounts=(params.get('lambda1', 1.0), params.get('lambda2', 1.0)),
        control_bounds=bounds,
        f_inf_norm=sum(max(abs(lo), abs(hi)) for lo, hi in bounds),
        parameters=dict(params),
        exact_solution=exact,
        formal_solutions=formal,
        hamiltonian=_scalar_hamiltonian(h1, h2),
    )


# ==================== Planar games on [-2, 2]^2 ====================

def _swap_dynamics(x, a1, a2):
    return (np.asarray(a2), np.asarray(a1))


def _mixed_dynamics(x, a1, a2):
    a1, a2 = np.asarray(a1), np.asarray(a2)
    return (a1 + a2, a1 - a2)


def _outside_unit_ball(x, a1, a2):
    r = np.hypot(x[..., 0], x[..., 1])
    return np.where(r > 1.0, r, 0.0)


def _squared_radius(x, a1, a2):
    return x[..., 0] ** 2 + x[..., 1] ** 2


def _planar_game(name: str, params: Dict[str, float], bounds, dynamics, cost, norm) -> GameProblem:
    return GameProblem(
        name=name,
        state_dim=2,
        dynamics=dynamics,
        costs=(cost, cost),
        discounts=(params.get('lambda1', 1.0), params.get('lambda2', 1.0)),
        control_bounds=bounds,
        f_inf_norm=norm,
        parameters=dict(params),
    )


def _merge_parameters(name: str, overrides: Optional[Dict[str, float]]) -> Dict[str, float]:
    params = dict(_DEFAULT_PARAMETERS[name])
    for key, value in (overrides or {}).items():
        if key not in params and key not in COMMON_PARAMETERS:
            raise ValueError(f"Unknown parameter '{key}' for problem '{name}' "
                             f"(known: {sorted(params) + list(COMMON_PARAMETERS)})")
        params[key] = float(value)
    return params


def builtin_problem(name: str,
                    params: Optional[Dict[str, float]] = None,
                    grid_nodes: Optional[Sequence[int]] = None,
                    controls_per_player: Optional[Sequence[int]] = None,
                    control_bounds: Optional[Sequence[Tuple[float, float]]] = None
                    ) -> Tuple[GameProblem, GridSpec, ControlGrid, SolverConfig]:
    """
    Build one of the builtin game setups.

    Args:
        name (str): One of BUILTIN_NAMES.
        params (Optional[Dict[str, float]]): Parameter overrides (k1, k2, delta, lambda1, lambda2).
        grid_nodes (Optional[Sequence[int]]): Node count per axis (a single int is broadcast).
        controls_per_player (Optional[Sequence[int]]): Control count per player.
        control_bounds (Optional[Sequence[Tuple[float, float]]]): Control interval per player.

    Returns:
        Tuple[GameProblem, GridSpec, ControlGrid, SolverConfig]: The setup.

    Raises:
        ValueError: For an unknown name or parameter.
    """
    if name not in BUILTIN_NAMES:
        raise ValueError(f"Unknown problem '{name}' (known: {', '.join(BUILTIN_NAMES)})")
    p = _merge_parameters(name, params)

    planar = name in ('test3', 'test4')
    if planar:
        default_bounds, default_counts = ((-1.0, 1.0), (-1.0, 1.0)), (3, 3)
        lower, upper, default_nodes = (-2.0, -2.0), (2.0, 2.0), (51, 51)
    elif name == 'test1-wide':
        default_bounds, default_counts = ((-50.0, 50.0), (-50.0, 50.0)), (101, 101)
        lower, upper, default_nodes = -50.0, 50.0, 51
    elif name == 'test2-perturbed':
        default_bounds, default_counts = ((-300.0, 300.0), (-300.0, 300.0)), (101, 101)
        lower, upper, default_nodes = -50.0, 50.0, 51
    else:
        default_bounds, default_counts = ((-10.0, 10.0), (-10.0, 10.0)), (101, 101)
        lower, upper, default_nodes = -50.0, 50.0, 51

    bounds = tuple(tuple(b) for b in (control_bounds or default_bounds))
    counts = tuple(np.broadcast_to(controls_per_player or default_counts, (2,)).tolist())
    nodes = default_nodes if grid_nodes is None else grid_nodes
    if planar:
        nodes = tuple(np.broadcast_to(nodes, (2,)).tolist())
    elif np.size(nodes) != 1:
        raise ValueError(f"Problem '{name}' is one-dimensional; got grid_nodes={grid_nodes}")
    grid = uniform_grid(lower, upper, np.ravel(nodes)[0] if not planar else nodes)

    # None keeps the boundary entries of whatever guess the run starts from
    guess, max_iterations, boundary = InitialGuess('constant', 100.0), 5000, None
    if name in ('test1', 'test1-wide'):
        formal = {'zero': (_on_x(_zero), _on_x(_zero)),
                  'ubar': (_on_x(_ubar1), _on_x(_zero)),
                  'uhat': (_on_x(_uhat1), _on_x(_zero))}
        boundary = (100.0, 100.0)
        problem = _scalar_game(name, p, bounds, _zero, _zero,
                               (_on_x(_zero), _on_x(_zero)), formal)
    elif name == 'test2':
        k1, k2 = p['k1'], p['k2']
        exact = _linear_exact(k1, k2)
        problem = _scalar_game(name, p, bounds, lambda s: k1 * s, lambda s: k2 * s,
                               exact, {'exact': exact})
        guess = InitialGuess('constant', DEFAULT_INITIAL_CONSTANT)
        boundary = BOUNDARY_EXACT
    elif name == 'test2-perturbed':
        k1, k2, delta = p['k1'], p['k2'], p['delta']
        problem = _scalar_game(name, p, bounds,
                               lambda s: k1 * s - delta * np.cos(s),
                               lambda s: k2 * s - delta * np.cos(s),
                               None, {'unperturbed': _linear_exact(k1, k2)})
        max_iterations = 20000
    elif name == 'test3':
        norm = max(max(abs(lo), abs(hi)) for lo, hi in bounds)
        problem = _planar_game(name, p, bounds, _swap_dynamics, _outside_unit_ball, norm)
        max_iterations = 1000
    else:
        norm = sum(max(abs(lo), abs(hi)) for lo, hi in bounds)
        problem = _planar_game(name, p, bounds, _mixed_dynamics, _squared_radius, norm)
        max_iterations = 1000

    controls = ControlGrid.uniform(bounds, counts)
    controls.check_bounds(problem)
    config = SolverConfig(initial_guess=guess, max_iterations=max_iterations, boundary_value=boundary)
    return problem, grid, controls, config


def problem_config(problem: GameProblem, grid: GridSpec, controls: ControlGrid) -> Dict[str, Any]:
    """JSON-able description of a builtin setup, enough to rebuild it exactly."""
    return {
        'problem': problem.name,
        'parameters': {k: float(v) for k, v in problem.parameters.items()},
        'lower': list(grid.lower),
        'upper': list(grid.upper),
        'grid_nodes': list(grid.nodes_per_axis),
        'control_bounds': [list(b) for b in problem.control_bounds],
        'control_values': [v.tolist() for v in controls.values],
    }


def load_problem_config(config: Dict[str, Any]) -> Tuple[GameProblem, GridSpec, ControlGrid]:
    """
    Rebuild a setup from problem_config output.

    Args:
        config (Dict[str, Any]): Output of problem_config (possibly through JSON).

    Returns:
        Tuple[GameProblem, GridSpec, ControlGrid]: The rebuilt setup.
    """
    values = config['control_values']
    problem, grid, _, _ = builtin_problem(config['problem'],
                                          params=config.get('parameters'),
                                          grid_nodes=config['grid_nodes'],
                                          controls_per_player=[len(v) for v in values],
                                          control_bounds=[tuple(b) for b in config['control_bounds']])
    if list(grid.lower) != list(config['lower']) or list(grid.upper) != list(config['upper']):
        raise ValueError(f"Stored domain {config['lower']}..{config['upper']} does not match "
                         f"problem '{problem.name}'")
    controls = ControlGrid(tuple(np.asarray(v, dtype=float) for v in values))
    controls.check_bounds(problem)
    return problem, grid, controls


if __name__ == "__main__":
    # Example usage
    for test_name in BUILTIN_NAMES:
        prob, g, ctrl, cfg = builtin_problem(test_name)
        print(f"{test_name:16s} dim={prob.state_dim} N={g.num_nodes} controls={ctrl.sizes} "
              f"||f||={prob.f_inf_norm} guess={cfg.initial_guess}")
