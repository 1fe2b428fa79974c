"""
Module: solver.py

Description:
Fully discrete semi-Lagrangian scheme for two-player Nash games and the
global fixed-point (Jacobi value) iteration built on it.

At every interior node x_j and every discrete control pair a the scheme
forms the payoff

    Q_i(a) = U_i(x_j + h f(x_j, a)) / (1 + lambda_i h) + lambda_i h / (1 + lambda_i h) psi_i(x_j, a)

with U_i interpolated multilinearly, picks the first pure Nash pair a* of the
bimatrix game (Q_1, Q_2) and sets both players' new values from that same a*.
Boundary nodes keep their Dirichlet values. Payoff tables (stencils and
running costs) do not depend on U and are built once per run when they fit
in memory.

Author: F.Ahmadzade
"""

import logging
import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from tqdm import tqdm

from constants import (BOUNDARY_EXACT, DEFAULT_F_NORM_SAFETY, DEFAULT_INITIAL_CONSTANT, DEFAULT_MAX_ITERATIONS,
                       DEFAULT_TOLERANCE, MAX_CACHED_TABLE_ENTRIES, MAX_CHUNK_PAIRS,
                       ON_NO_NASH_HALT, ON_NO_NASH_POLICIES, OSCILLATION_WINDOW,
                       STATUS_CONVERGED, STATUS_HALTED, STATUS_NOT_CONVERGED)
from game import ControlGrid, GameProblem, estimate_f_norm
from grid import GridSpec, ValueField, interpolate, stencil_arrays
from nash_search import first_pure_nash_batch

logger = logging.getLogger(__name__)

GUESS_KINDS = ('constant', 'exact', 'perturbed-exact', 'file', 'formal')


class NoNashEquilibriumError(RuntimeError):
    """
    Raised under the halt policy when a node has no pure Nash pair.

    Attributes:
        node (int): Smallest offending node index.
        iteration (int): Sweep during which it happened.
        result (Optional[SolveResult]): Partial run state, attached by solve.
    """

    def __init__(self, message: str, node: int, iteration: int, result: Optional['SolveResult'] = None):
        super().__init__(message)
        self.node = node
        self.iteration = iteration
        self.result = result


@dataclass(frozen=True)
class InitialGuess:
    """
    Starting iterate U^(0).

    Attributes:
        kind (str): One of constant, exact, perturbed-exact, file, formal.
        value (float): The constant, or the perturbation amplitude.
        path (Optional[str]): CSV file for kind 'file' (columns U1, U2).
        name (Optional[str]): Formal solution name for kind 'formal'.
    """
    kind: str = 'constant'
    value: float = DEFAULT_INITIAL_CONSTANT
    path: Optional[str] = None
    name: Optional[str] = None

    def __post_init__(self):
        if self.kind not in GUESS_KINDS:
            raise ValueError(f"Unknown initial guess kind '{self.kind}' (known: {', '.join(GUESS_KINDS)})")
        if not np.isfinite(self.value):
            raise ValueError(f"Initial guess value must be finite, got {self.value}")
        if self.kind == 'file' and not self.path:
            raise ValueError("A 'file' initial guess needs a path")
        if self.kind == 'formal' and not self.name:
            raise ValueError("A 'formal' initial guess needs a solution name")

    @classmethod
    def parse(cls, text: str) -> 'InitialGuess':
        """Parse 'constant:C', 'exact', 'perturbed-exact:A', 'file:PATH', 'formal:NAME' or a bare number."""
        text = str(text).strip()
        kind, _, arg = text.partition(':')
        try:
            if kind == 'constant':
                return cls('constant', float(arg) if arg else DEFAULT_INITIAL_CONSTANT)
            if kind == 'exact':
                return cls('exact', 0.0)
            if kind == 'perturbed-exact':
                return cls('perturbed-exact', float(arg) if arg else 1.0)
            if kind == 'file':
                return cls('file', 0.0, path=arg)
            if kind == 'formal':
                return cls('formal', 0.0, name=arg)
            return cls('constant', float(text))
        except ValueError as err:
            raise ValueError(f"Cannot parse initial guess '{text}': {err}") from err

    def __str__(self) -> str:
        if self.kind == 'constant':
            return f"constant:{self.value:g}"
        if self.kind == 'perturbed-exact':
            return f"perturbed-exact:{self.value:g}"
        if self.kind == 'file':
            return f"file:{self.path}"
        if self.kind == 'formal':
            return f"formal:{self.name}"
        return 'exact'


@dataclass
class SolverConfig:
    """
    Fixed-point iteration settings.

    Attributes:
        tolerances (Tuple[float, float]): Stopping tolerances eps_i on the sup-norm increments.
        max_iterations (int): Sweep budget.
        initial_guess (InitialGuess): U^(0).
        boundary_value (Union[None, str, Tuple[float, float]]): Dirichlet constant per player, or
            'exact' for the exact solution at the boundary nodes; None keeps the initial guess's
            own boundary entries.
        on_no_nash (str): 'halt' or 'freeze-and-flag'.
        time_step (Optional[float]): Overrides h = dx / ||f||.
        f_norm_safety (float): Multiplier on ||f|| in the time step.
        workers (int): Threads sharing the interior nodes of a sweep.
        seed (Optional[int]): Seed for perturbed initial guesses.
    """
    tolerances: Tuple[float, float] = (DEFAULT_TOLERANCE, DEFAULT_TOLERANCE)
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    initial_guess: InitialGuess = field(default_factory=InitialGuess)
    boundary_value: Union[None, str, Tuple[float, float]] = None
    on_no_nash: str = ON_NO_NASH_HALT
    time_step: Optional[float] = None
    f_norm_safety: float = DEFAULT_F_NORM_SAFETY
    workers: int = 1
    seed: Optional[int] = None

    def __post_init__(self):
        self.tolerances = tuple(float(e) for e in np.broadcast_to(self.tolerances, (2,)))
        if any(not e > 0 for e in self.tolerances):
            raise ValueError(f"Tolerances must be positive, got {self.tolerances}")
        if int(self.max_iterations) < 1:
            raise ValueError(f"max_iterations must be at least 1, got {self.max_iterations}")
        self.max_iterations = int(self.max_iterations)
        if isinstance(self.initial_guess, str):
            self.initial_guess = InitialGuess.parse(self.initial_guess)
        if isinstance(self.boundary_value, str) and self.boundary_value.strip() == BOUNDARY_EXACT:
            self.boundary_value = BOUNDARY_EXACT
        elif self.boundary_value is not None:
            self.boundary_value = tuple(float(b) for b in np.broadcast_to(self.boundary_value, (2,)))
            if not all(np.isfinite(self.boundary_value)):
                raise ValueError(f"Boundary values must be finite, got {self.boundary_value}")
        if self.on_no_nash not in ON_NO_NASH_POLICIES:
            raise ValueError(f"on_no_nash must be one of {ON_NO_NASH_POLICIES}, got '{self.on_no_nash}'")
        if self.time_step is not None and not self.time_step > 0:
            raise ValueError(f"time_step must be positive, got {self.time_step}")
        if not self.f_norm_safety > 0:
            raise ValueError(f"f_norm_safety must be positive, got {self.f_norm_safety}")
        if int(self.workers) < 1:
            raise ValueError(f"workers must be at least 1, got {self.workers}")
        self.workers = int(self.workers)


@dataclass(frozen=True)
class NashSearchResult:
    found: bool
    controls: Optional[Tuple[float, float]]
    candidates_checked: int
    indices: Optional[Tuple[int, int]] = None


@dataclass(frozen=True)
class IterationReport:
    """One line of the convergence history."""
    iteration: int
    increments: Tuple[float, float]
    nodes_without_nash: int
    oscillation_detected: bool
    wall_time: float


@dataclass
class NashSelection:
    """
    Control pairs chosen by one sweep.

    Attributes:
        indices (np.ndarray): (N, 2) control indices per node, -1 at boundary and no-Nash nodes.
        no_nash_nodes (np.ndarray): Interior nodes where no pure Nash pair exists.
    """
    indices: np.ndarray
    no_nash_nodes: np.ndarray


@dataclass
class PayoffTables:
    """Field-independent parts of the payoffs at a block of nodes."""
    nodes: np.ndarray
    idx: np.ndarray        # (n, n1, n2, 2**dim)
    weights: np.ndarray    # (n, n1, n2, 2**dim)
    psi: np.ndarray        # (2, n, n1, n2)


@dataclass
class DiscreteGame:
    """
    A game fixed on a grid, a control grid and a time step.

    Attributes:
        problem (GameProblem): The continuous game.
        grid (GridSpec): Spatial grid.
        controls (ControlGrid): Discrete controls.
        h (float): Fictitious time step.
        f_norm (float): ||f||_inf used for h.
    """
    problem: GameProblem
    grid: GridSpec
    controls: ControlGrid
    h: float
    f_norm: float
    _cache: Optional[List[PayoffTables]] = field(default=None, init=False, repr=False)

    @property
    def c1(self) -> np.ndarray:
        return 1.0 / (1.0 + np.asarray(self.problem.discounts) * self.h)

    @property
    def c2(self) -> np.ndarray:
        lh = np.asarray(self.problem.discounts) * self.h
        return lh / (1.0 + lh)

    @property
    def num_pairs(self) -> int:
        return int(np.prod(self.controls.sizes))

    def chunk_size(self) -> int:
        return max(1, MAX_CHUNK_PAIRS // max(1, self.num_pairs))

    def tables(self, nodes: np.ndarray) -> PayoffTables:
        """Stencils of z = x_j + h f(x_j, a) and costs psi_i(x_j, a) for every pair a."""
        nodes = np.asarray(nodes, dtype=np.int64)
        a1, a2 = self.controls.mesh()
        x = self.grid.coordinates[nodes].reshape(nodes.size, 1, 1, self.grid.dim)
        z = x + self.h * self.problem.velocity(x, a1, a2)
        # feet of characteristics that leave the box are clamped to it
        idx, weights = stencil_arrays(self.grid, z, check=False)
        shape = idx.shape[:-1]
        psi = np.stack([np.broadcast_to(self.problem.running_cost(i, x, a1, a2), shape)
                        for i in range(2)])
        return PayoffTables(nodes, idx, weights, psi)

    def chunked_tables(self, nodes: Iterable[int]) -> List[PayoffTables]:
        nodes = np.asarray(nodes, dtype=np.int64)
        size = self.chunk_size()
        return [self.tables(nodes[s:s + size]) for s in range(0, nodes.size, size)]

    def interior_tables(self) -> Iterable[PayoffTables]:
        """Tables over all interior nodes, cached when small enough."""
        if self._cache is not None:
            return self._cache
        interior = self.grid.interior_nodes
        total = interior.size * self.num_pairs * 2 ** self.grid.dim
        if total > MAX_CACHED_TABLE_ENTRIES:
            size = self.chunk_size()
            return (self.tables(interior[s:s + size]) for s in range(0, interior.size, size))
        self._cache = self.chunked_tables(interior)
        return self._cache

    def payoffs(self, tables: PayoffTables, fields: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        c1, c2 = self.c1, self.c2
        Q1 = c1[0] * interpolate(fields[0], tables.idx, tables.weights) + c2[0] * tables.psi[0]
        Q2 = c1[1] * interpolate(fields[1], tables.idx, tables.weights) + c2[1] * tables.psi[1]
        return Q1, Q2

    def control_values(self, indices: np.ndarray) -> np.ndarray:
        """(N, 2) control values for (N, 2) indices; NaN where the index is -1."""
        indices = np.asarray(indices)
        out = np.full(indices.shape, np.nan)
        for i in range(2):
            ok = indices[:, i] >= 0
            out[ok, i] = self.controls.values[i][indices[ok, i]]
        return out


def time_step(problem: GameProblem, grid: GridSpec,
              controls: Optional[ControlGrid] = None,
              config: Optional[SolverConfig] = None) -> Tuple[float, float]:
    """
    Time step h = min(dx) / (safety * ||f||_inf), or the configured override.

    Args:
        problem (GameProblem): The game.
        grid (GridSpec): The grid.
        controls (Optional[ControlGrid]): Needed when the problem carries no analytic ||f||.
        config (Optional[SolverConfig]): Override and safety factor.

    Returns:
        Tuple[float, float]: h and the ||f||_inf it was derived from.
    """
    config = config or SolverConfig()
    if problem.f_inf_norm is not None:
        f_norm = float(problem.f_inf_norm)
    else:
        if controls is None:
            raise ValueError(f"Problem '{problem.name}' has no analytic ||f||; a control grid is required")
        f_norm = estimate_f_norm(problem, grid, controls)
    if config.time_step is not None:
        return float(config.time_step), f_norm
    return min(grid.dx) / (f_norm * config.f_norm_safety), f_norm


def discretize(problem: GameProblem, grid: GridSpec, controls: ControlGrid,
               config: Optional[SolverConfig] = None) -> DiscreteGame:
    """Fix the game on a grid and control grid; checks the solver's two-player restriction."""
    if problem.num_players != 2:
        raise ValueError(f"The solver handles two players, problem '{problem.name}' has {problem.num_players}")
    if problem.state_dim != grid.dim:
        raise ValueError(f"Problem '{problem.name}' lives in dimension {problem.state_dim}, grid in {grid.dim}")
    controls.check_bounds(problem)
    if any(d != 1.0 for d in problem.discounts):
        logger.warning("Discount rates %s differ from 1; using coefficients 1/(1+lambda h) and "
                       "lambda h/(1+lambda h)", problem.discounts)
    h, f_norm = time_step(problem, grid, controls, config)
    return DiscreteGame(problem, grid, controls, h, f_norm)


def q_value(game: DiscreteGame, player: int, node: int,
            controls: Tuple[float, float], fields: np.ndarray) -> float:
    """
    Semi-Lagrangian payoff of one player at one node for one control pair.

    Args:
        game (DiscreteGame): The discretized game.
        player (int): 0 or 1.
        node (int): Flat node index.
        controls (Tuple[float, float]): Control values (a1, a2).
        fields (np.ndarray): (2, N) current values.

    Returns:
        float: c1 * U_player(z) + c2 * psi_player(x_j, a).
    """
    x = game.grid.coordinates[int(node)][None, :]
    a1, a2 = (np.asarray([c], dtype=float) for c in controls)
    z = x + game.h * game.problem.velocity(x, a1, a2)
    idx, weights = stencil_arrays(game.grid, z, check=False)
    value = interpolate(np.asarray(fields[player], dtype=float), idx, weights)[0]
    cost = game.problem.running_cost(player, x, a1, a2)[0]
    return float(game.c1[player] * value + game.c2[player] * cost)


def local_nash_search(game: DiscreteGame, node: int, fields: np.ndarray) -> NashSearchResult:
    """
    First pure Nash pair at one node, scanning pairs with the first player's control outermost.

    Args:
        game (DiscreteGame): The discretized game.
        node (int): Flat node index.
        fields (np.ndarray): (2, N) current values.

    Returns:
        NashSearchResult: found flag, control values and pairs scanned.
    """
    tables = game.tables(np.array([int(node)]))
    Q1, Q2 = game.payoffs(tables, np.asarray(fields, dtype=float))
    found, i1, i2, checked = first_pure_nash_batch(Q1, Q2)
    if not found[0]:
        return NashSearchResult(False, None, int(checked[0]))
    k1, k2 = int(i1[0]), int(i2[0])
    return NashSearchResult(True, (float(game.controls.values[0][k1]), float(game.controls.values[1][k2])),
                            int(checked[0]), (k1, k2))


def _check_fields(game: DiscreteGame, fields: np.ndarray) -> np.ndarray:
    fields = np.asarray(fields, dtype=float)
    if fields.shape != (2, game.grid.num_nodes):
        raise ValueError(f"Fields must have shape (2, {game.grid.num_nodes}), got {fields.shape}")
    return fields


def _sweep_block(game: DiscreteGame, tables: PayoffTables, fields: np.ndarray):
    Q1, Q2 = game.payoffs(tables, fields)
    found, i1, i2, _ = first_pure_nash_batch(Q1, Q2)
    rows = np.arange(tables.nodes.size)
    return tables.nodes, found, i1, i2, Q1[rows, i1, i2], Q2[rows, i1, i2]


def sweep(game: DiscreteGame, fields: np.ndarray,
          config: Optional[SolverConfig] = None,
          iteration: int = 0,
          node_order: Optional[Sequence[int]] = None) -> Tuple[np.ndarray, IterationReport, NashSelection]:
    """
    One Jacobi sweep U^(k) -> U^(k+1).

    Every interior node reads only the previous iterate; both players are
    updated with the same Nash pair. Boundary values are copied.

    Args:
        game (DiscreteGame): The discretized game.
        fields (np.ndarray): (2, N) previous iterate.
        config (Optional[SolverConfig]): Policy and worker count.
        iteration (int): Index recorded in the report.
        node_order (Optional[Sequence[int]]): Permutation of the interior nodes to visit.

    Returns:
        Tuple[np.ndarray, IterationReport, NashSelection]: New iterate, report, chosen pairs.

    Raises:
        NoNashEquilibriumError: Under the halt policy, if some node has no pure Nash pair.
    """
    config = config or SolverConfig()
    start = time.perf_counter()
    fields = _check_fields(game, fields)
    new = fields.copy()
    indices = np.full((game.grid.num_nodes, 2), -1, dtype=np.int64)
    missing = np.zeros(game.grid.num_nodes, dtype=bool)

    if node_order is None:
        blocks = game.interior_tables()
    else:
        order = np.asarray(node_order, dtype=np.int64)
        if order.size != game.grid.interior_nodes.size or not np.array_equal(np.sort(order), game.grid.interior_nodes):
            raise ValueError("node_order must be a permutation of the interior nodes")
        blocks = game.chunked_tables(order)

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            outcomes = list(pool.map(lambda t: _sweep_block(game, t, fields), blocks))
    else:
        outcomes = (_sweep_block(game, t, fields) for t in blocks)

    for nodes, found, i1, i2, v1, v2 in outcomes:
        ok = nodes[found]
        new[0, ok] = v1[found]
        new[1, ok] = v2[found]
        indices[ok, 0] = i1[found]
        indices[ok, 1] = i2[found]
        missing[nodes[~found]] = True

    no_nash = np.flatnonzero(missing)
    if no_nash.size:
        if config.on_no_nash == ON_NO_NASH_HALT:
            node = int(no_nash[0])
            raise NoNashEquilibriumError(
                f"No pure Nash equilibrium at node {node} (x = {game.grid.coordinates[node].tolist()}) "
                f"in sweep {iteration}; {no_nash.size} node(s) affected", node, iteration)
        logger.warning("Sweep %d: no pure Nash equilibrium at %d node(s), values frozen", iteration, no_nash.size)

    increments = tuple(float(np.max(np.abs(new[i] - fields[i]))) for i in range(2))
    report = IterationReport(iteration, increments, int(no_nash.size), False, time.perf_counter() - start)
    logger.debug("Sweep %d: increments %.3e / %.3e, no-Nash nodes %d",
                 iteration, increments[0], increments[1], no_nash.size)
    return new, report, NashSelection(indices, no_nash)


def frozen_stencils(game: DiscreteGame, indices: np.ndarray):
    """
    Stencils and costs at the interior nodes for fixed control indices.

    Args:
        game (DiscreteGame): The discretized game.
        indices (np.ndarray): (N, 2) control indices; rows with -1 are skipped.

    Returns:
        Tuple: nodes (n,), idx (n, 2**dim), weights (n, 2**dim), psi (2, n).
    """
    indices = np.asarray(indices, dtype=np.int64)
    interior = game.grid.interior_nodes
    nodes = interior[np.all(indices[interior] >= 0, axis=1)]
    a1 = game.controls.values[0][indices[nodes, 0]]
    a2 = game.controls.values[1][indices[nodes, 1]]
    x = game.grid.coordinates[nodes]
    z = x + game.h * game.problem.velocity(x, a1, a2)
    idx, weights = stencil_arrays(game.grid, z, check=False)
    psi = np.stack([game.problem.running_cost(i, x, a1, a2) for i in range(2)])
    return nodes, idx, weights, psi


def frozen_update(game: DiscreteGame, fields: np.ndarray, indices: np.ndarray) -> np.ndarray:
    """
    Update F_a(U) with the control pair at every node fixed in advance.

    Nodes whose indices are -1 (boundary, no-Nash) keep their values.
    """
    fields = _check_fields(game, fields)
    nodes, idx, weights, psi = frozen_stencils(game, indices)
    new = fields.copy()
    for i in range(2):
        new[i, nodes] = game.c1[i] * interpolate(fields[i], idx, weights) + game.c2[i] * psi[i]
    return new


def verify_nash_feedback(game: DiscreteGame, fields: np.ndarray, indices: np.ndarray) -> np.ndarray:
    """
    Exhaustively re-check the unilateral-deviation conditions of chosen pairs.

    Args:
        game (DiscreteGame): The discretized game.
        fields (np.ndarray): (2, N) iterate the pairs were computed from.
        indices (np.ndarray): (N, 2) control indices, -1 where unset.

    Returns:
        np.ndarray: Nodes where some player could lower their own payoff by deviating.
    """
    fields = _check_fields(game, fields)
    indices = np.asarray(indices, dtype=np.int64)
    violations = []
    for tables in game.interior_tables():
        sel = indices[tables.nodes]
        ok = np.all(sel >= 0, axis=1)
        Q1, Q2 = game.payoffs(tables, fields)
        rows = np.flatnonzero(ok)
        i1, i2 = sel[rows, 0], sel[rows, 1]
        stable1 = Q1[rows, i1, i2] <= Q1[rows, :, i2].min(axis=1)
        stable2 = Q2[rows, i1, i2] <= Q2[rows, i1, :].min(axis=1)
        violations.append(tables.nodes[rows[~(stable1 & stable2)]])
    return np.sort(np.concatenate(violations)) if violations else np.array([], dtype=np.int64)


def _read_guess_file(path: str, grid: GridSpec) -> np.ndarray:
    df = pd.read_csv(path)
    for column in ('U1', 'U2'):
        if column not in df.columns:
            raise ValueError(f"Initial guess file {path} has no '{column}' column")
    if len(df) != grid.num_nodes:
        raise ValueError(f"Initial guess file {path} has {len(df)} rows, grid has {grid.num_nodes} nodes")
    axes = [c for c in ('x', 'y')[:grid.dim] if c in df.columns]
    if len(axes) == grid.dim and not np.allclose(df[axes].to_numpy(), grid.coordinates, atol=1e-9):
        raise ValueError(f"Node coordinates in {path} do not match the grid")
    return df[['U1', 'U2']].to_numpy(dtype=float).T.copy()


def initial_fields(problem: GameProblem, grid: GridSpec, guess: InitialGuess,
                   rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """
    Build U^(0) as a (2, N) array.

    Args:
        problem (GameProblem): The game (exact and formal solutions come from here).
        grid (GridSpec): The grid.
        guess (InitialGuess): Which guess.
        rng (Optional[np.random.Generator]): Source of the perturbation for 'perturbed-exact'.

    Returns:
        np.ndarray: (2, N) initial values.
    """
    coords = grid.coordinates
    if guess.kind == 'constant':
        return np.full((2, grid.num_nodes), float(guess.value))
    if guess.kind == 'exact':
        return problem.exact_values(coords)
    if guess.kind == 'perturbed-exact':
        rng = rng or np.random.default_rng()
        return problem.exact_values(coords) + guess.value * rng.uniform(-1.0, 1.0, (2, grid.num_nodes))
    if guess.kind == 'formal':
        if guess.name not in problem.formal_solutions:
            raise ValueError(f"Problem '{problem.name}' has no formal solution '{guess.name}' "
                             f"(known: {sorted(problem.formal_solutions)})")
        return problem.solution_values(problem.formal_solutions[guess.name], coords)
    return _read_guess_file(guess.path, grid)


def apply_boundary_values(problem: GameProblem, grid: GridSpec, fields: np.ndarray,
                          boundary_value: Union[None, str, Tuple[float, float]]) -> np.ndarray:
    """
    Overwrite the boundary entries of a (2, N) iterate in place.

    Raises:
        MissingExactSolutionError: For 'exact' on a problem without an exact solution.
    """
    if boundary_value is None:
        return fields
    mask = grid.boundary_mask
    if boundary_value == BOUNDARY_EXACT:
        fields[:, mask] = problem.exact_values(grid.coordinates[mask])
    else:
        fields[:, mask] = np.asarray(boundary_value, dtype=float)[:, None]
    return fields


def classify_nodes(iterates: Sequence[np.ndarray], tolerances: Sequence[float],
                   interior: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Period-2 oscillating and stabilized interior nodes over trailing iterates.

    A node oscillates when for some player |U^(k+1) - U^(k-1)| < eps while
    |U^(k+1) - U^(k)| >= eps at every step of the window; it is stabilized
    when every increment of both players stays below eps.

    Args:
        iterates (Sequence[np.ndarray]): Trailing (2, N) iterates, oldest first.
        tolerances (Sequence[float]): eps per player.
        interior (np.ndarray): Interior node indices.

    Returns:
        Tuple[np.ndarray, np.ndarray]: Oscillating nodes, stabilized nodes.
    """
    empty = np.array([], dtype=np.int64)
    if len(iterates) < 2:
        return empty, empty
    stack = np.asarray(iterates)[:, :, interior]
    eps = np.asarray(tolerances, dtype=float)[None, :, None]
    d1 = np.abs(np.diff(stack, axis=0))
    stabilized = interior[np.all(d1 < eps, axis=(0, 1))]
    if len(iterates) < 3:
        return empty, stabilized
    d2 = np.abs(stack[2:] - stack[:-2])
    step = d1[1:]
    oscillating = interior[np.any(np.all((d2 < eps) & (step >= eps), axis=0), axis=0)]
    return oscillating, stabilized


@dataclass
class SolveResult:
    """
    Outcome of a fixed-point run.

    Attributes:
        game (DiscreteGame): The discretized game that was solved.
        config (SolverConfig): Effective settings.
        fields (np.ndarray): (2, N) final iterate.
        previous_fields (np.ndarray): (2, N) iterate the last Nash pairs were computed from.
        initial (np.ndarray): (2, N) iterate U^(0), boundary values applied.
        feedback_indices (np.ndarray): (N, 2) control indices of the last sweep, -1 where unset.
        history (List[IterationReport]): One report per sweep.
        status (str): converged, not-converged or halted.
        oscillating_nodes (np.ndarray): Period-2 nodes over the trailing window.
        stabilized_nodes (np.ndarray): Nodes with sub-tolerance increments over the window.
        halted_node (Optional[int]): Node that triggered the halt policy.
        snapshots (Dict[int, np.ndarray]): Iterates kept on request, keyed by iteration.
    """
    game: DiscreteGame
    config: SolverConfig
    fields: np.ndarray
    previous_fields: np.ndarray
    initial: np.ndarray
    feedback_indices: np.ndarray
    history: List[IterationReport] = field(default_factory=list)
    status: str = STATUS_NOT_CONVERGED
    oscillating_nodes: np.ndarray = field(default_factory=lambda: np.array([], dtype=np.int64))
    stabilized_nodes: np.ndarray = field(default_factory=lambda: np.array([], dtype=np.int64))
    halted_node: Optional[int] = None
    snapshots: Dict[int, np.ndarray] = field(default_factory=dict)

    @property
    def iterations(self) -> int:
        return len(self.history)

    @property
    def converged(self) -> bool:
        return self.status == STATUS_CONVERGED

    @property
    def h(self) -> float:
        return self.game.h

    @property
    def feedback(self) -> np.ndarray:
        """(N, 2) Nash controls a*(x_j) of the last sweep, NaN where unset."""
        return self.game.control_values(self.feedback_indices)

    def value_fields(self) -> Tuple[ValueField, ValueField]:
        return ValueField(self.game.grid, self.fields[0]), ValueField(self.game.grid, self.fields[1])

    def oscillation_detected(self) -> bool:
        return self.oscillating_nodes.size > 0

    def history_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            'iteration': [r.iteration for r in self.history],
            'increment_U1': [r.increments[0] for r in self.history],
            'increment_U2': [r.increments[1] for r in self.history],
            'nodes_without_nash': [r.nodes_without_nash for r in self.history],
            'oscillation_detected': [r.oscillation_detected for r in self.history],
        })


def solve(problem: GameProblem, grid: GridSpec, controls: ControlGrid,
          config: Optional[SolverConfig] = None,
          verbose: bool = False,
          keep_iterates: Iterable[int] = (),
          initial: Optional[np.ndarray] = None) -> SolveResult:
    """
    Iterate sweeps until both sup-norm increments fall below their tolerances.

    Args:
        problem (GameProblem): The game.
        grid (GridSpec): The grid.
        controls (ControlGrid): Discrete controls.
        config (Optional[SolverConfig]): Settings.
        verbose (bool): Show a progress bar.
        keep_iterates (Iterable[int]): Iterations whose iterate is kept in the result (0 = initial).
        initial (Optional[np.ndarray]): Explicit (2, N) starting iterate, overriding the guess.

    Returns:
        SolveResult: Final fields, Nash feedback, history and node classification.

    Raises:
        NoNashEquilibriumError: Under the halt policy; the partial result is attached.
    """
    config = config or SolverConfig()
    game = discretize(problem, grid, controls, config)
    keep = set(int(k) for k in keep_iterates)

    if initial is None:
        fields = initial_fields(problem, grid, config.initial_guess, np.random.default_rng(config.seed))
    else:
        fields = np.array(initial, dtype=float)
    fields = _check_fields(game, fields).copy()
    apply_boundary_values(problem, grid, fields, config.boundary_value)
    if not np.all(np.isfinite(fields)):
        raise ValueError("Initial guess contains non-finite values")

    logger.info("Solving '%s': N=%d, controls=%s, h=%.6g, ||f||=%.6g, guess=%s",
                problem.name, grid.num_nodes, controls.sizes, game.h, game.f_norm, config.initial_guess)

    result = SolveResult(game, config, fields, fields.copy(), fields.copy(),
                         np.full((grid.num_nodes, 2), -1, dtype=np.int64))
    if 0 in keep:
        result.snapshots[0] = fields.copy()
    window = deque([fields.copy()], maxlen=OSCILLATION_WINDOW + 2)
    interior = grid.interior_nodes
    eps = config.tolerances

    progress = tqdm(total=config.max_iterations, desc=problem.name, disable=not verbose, leave=False)
    try:
        for k in range(1, config.max_iterations + 1):
            try:
                new, report, selection = sweep(game, fields, config, iteration=k)
            except NoNashEquilibriumError as err:
                result.status = STATUS_HALTED
                result.halted_node = err.node
                err.result = result
                logger.error("Halted in sweep %d at node %d", k, err.node)
                raise
            window.append(new.copy())
            oscillating = False
            if len(window) == window.maxlen:
                oscillating = classify_nodes(list(window), eps, interior)[0].size > 0
            report = IterationReport(report.iteration, report.increments, report.nodes_without_nash,
                                     oscillating, report.wall_time)
            result.history.append(report)
            result.previous_fields, fields = fields, new
            result.fields = fields
            result.feedback_indices = selection.indices
            if k in keep:
                result.snapshots[k] = fields.copy()
            progress.update(1)
            if all(inc < e for inc, e in zip(report.increments, eps)):
                result.status = STATUS_CONVERGED
                break
    finally:
        progress.close()

    iterates = list(window)
    if len(iterates) == window.maxlen:
        result.oscillating_nodes, result.stabilized_nodes = classify_nodes(iterates, eps, interior)
    else:
        result.stabilized_nodes = classify_nodes(iterates, eps, interior)[1]

    logger.info("'%s' %s after %d iteration(s); last increments %s", problem.name, result.status,
                result.iterations, result.history[-1].increments if result.history else None)
    return result


if __name__ == "__main__":
    # Example usage
    from builtin_problems import builtin_problem

    logging.basicConfig(level=logging.INFO)
    prob, g, ctrl, cfg = builtin_problem('test1')
    res = solve(prob, g, ctrl, cfg, verbose=True)
    print(f"{res.status} in {res.iterations} iterations, max |U| = {np.abs(res.fields).max():.3e}")
