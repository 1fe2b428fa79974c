"""
Module: game.py

Description:
Definition of a non-cooperative differential game: controlled dynamics,
per-player running costs discounted in time, admissible control sets and
their finite discretizations. Also integrates the dynamics under a feedback
strategy to obtain the realized discounted costs, an independent check on
computed value functions.

Author: F.Ahmadzade
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from constants import HORIZON_FACTOR, MAX_CHUNK_PAIRS
from grid import GridSpec
from nash_search import first_pure_nash_batch

logger = logging.getLogger(__name__)

# dynamics(x, a1, ..., am) -> sequence of state_dim components (numpy broadcasting)
Dynamics = Callable[..., Sequence[np.ndarray]]
# cost(x, a1, ..., am) -> array broadcastable to the control mesh
RunningCost = Callable[..., np.ndarray]
# u(x) -> array over the leading axes of x
StateFunction = Callable[[np.ndarray], np.ndarray]


class DegenerateDynamicsError(ValueError):
    """Raised when the dynamics vanish everywhere, leaving the time step undefined."""


class MissingExactSolutionError(KeyError):
    """Raised when exact values are requested from a problem that has none."""


class TrajectoryExitError(RuntimeError):
    """Raised when an integrated trajectory leaves its bounding box."""

    def __init__(self, message: str, exit_time: float):
        super().__init__(message)
        self.exit_time = exit_time


@dataclass
class GameProblem:
    """
    An m-player differential game with discounted running costs.

    Attributes:
        name (str): Identifier.
        state_dim (int): Dimension of the state x.
        dynamics (Dynamics): f(x, a1, ..., am), returned as a sequence of state_dim components.
        costs (Tuple[RunningCost, ...]): psi_i(x, a1, ..., am), one per player.
        discounts (Tuple[float, ...]): lambda_i > 0, one per player.
        control_bounds (Tuple[Tuple[float, float], ...]): Admissible interval A_i per player.
        f_inf_norm (Optional[float]): ||f||_inf if known analytically, else None.
        parameters (Dict[str, float]): Named scalar parameters the evaluators were built from.
        exact_solution (Optional[Tuple[StateFunction, ...]]): Closed-form value functions, if known.
        formal_solutions (Dict[str, Tuple[StateFunction, ...]]): Further named solutions of the
            Hamilton-Jacobi system, usable as initial guesses.
        hamiltonian (Optional[Callable]): H(x, p1, ..., pm) -> (..., m) array, if known in closed form.
    """
    name: str
    state_dim: int
    dynamics: Dynamics
    costs: Tuple[RunningCost, ...]
    discounts: Tuple[float, ...] = (1.0, 1.0)
    control_bounds: Tuple[Tuple[float, float], ...] = ((-1.0, 1.0), (-1.0, 1.0))
    f_inf_norm: Optional[float] = None
    parameters: Dict[str, float] = field(default_factory=dict)
    exact_solution: Optional[Tuple[StateFunction, ...]] = None
    formal_solutions: Dict[str, Tuple[StateFunction, ...]] = field(default_factory=dict)
    hamiltonian: Optional[Callable[..., np.ndarray]] = None

    def __post_init__(self):
        self.costs = tuple(self.costs)
        self.discounts = tuple(float(d) for d in self.discounts)
        self.control_bounds = tuple((float(lo), float(hi)) for lo, hi in self.control_bounds)
        m = len(self.costs)
        if m < 1:
            raise ValueError("A game needs at least one player")
        if len(self.discounts) != m or len(self.control_bounds) != m:
            raise ValueError(f"Expected {m} discounts and control sets, got "
                             f"{len(self.discounts)} and {len(self.control_bounds)}")
        if any(not np.isfinite(d) or d <= 0 for d in self.discounts):
            raise ValueError(f"Discount rates must be positive, got {self.discounts}")
        for i, (lo, hi) in enumerate(self.control_bounds):
            if lo > hi:
                raise ValueError(f"Player {i + 1}: empty control set [{lo}, {hi}]")
        if self.f_inf_norm is not None and not self.f_inf_norm > 0:
            raise ValueError(f"f_inf_norm must be positive, got {self.f_inf_norm}")
        if self.state_dim < 1:
            raise ValueError(f"state_dim must be positive, got {self.state_dim}")

    @property
    def num_players(self) -> int:
        return len(self.costs)

    def velocity(self, x: np.ndarray, *controls) -> np.ndarray:
        """
        Evaluate f on the broadcast of states and controls.

        Args:
            x (np.ndarray): States, shape (..., state_dim).
            *controls: One control array per player, broadcastable against x[..., 0].

        Returns:
            np.ndarray: Velocities of shape (broadcast shape, state_dim).
        """
        x = np.asarray(x, dtype=float)
        components = [np.asarray(c, dtype=float) for c in self.dynamics(x, *controls)]
        if len(components) != self.state_dim:
            raise ValueError(f"Dynamics returned {len(components)} components, expected {self.state_dim}")
        shape = np.broadcast_shapes(x.shape[:-1], *[np.shape(c) for c in controls],
                                    *[c.shape for c in components])
        return np.stack([np.broadcast_to(c, shape) for c in components], axis=-1)

    def running_cost(self, player: int, x: np.ndarray, *controls) -> np.ndarray:
        """Evaluate psi_player on the broadcast of states and controls."""
        x = np.asarray(x, dtype=float)
        value = np.asarray(self.costs[player](x, *controls), dtype=float)
        shape = np.broadcast_shapes(x.shape[:-1], *[np.shape(c) for c in controls], value.shape)
        return np.broadcast_to(value, shape)

    def exact_values(self, points: np.ndarray) -> np.ndarray:
        """
        Exact value functions at points of shape (n, state_dim), as an (m, n) array.

        Raises:
            MissingExactSolutionError: If the problem has no exact solution attached.
        """
        if self.exact_solution is None:
            raise MissingExactSolutionError(f"No exact solution registered for problem '{self.name}'")
        return self.solution_values(self.exact_solution, points)

    def solution_values(self, solution: Sequence[StateFunction], points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return np.stack([np.broadcast_to(np.asarray(u(pts), dtype=float), pts.shape[:-1])
                         for u in solution])


@dataclass(frozen=True)
class ControlGrid:
    """
    Finite discretization A_i^# of every player's control set.

    Attributes:
        values (Tuple[np.ndarray, ...]): Strictly increasing control values, one array per player.
    """
    values: Tuple[np.ndarray, ...]

    def __post_init__(self):
        arrays = []
        for i, v in enumerate(self.values):
            arr = np.array(v, dtype=float).ravel()
            if arr.size == 0:
                raise ValueError(f"Player {i + 1}: empty control grid")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"Player {i + 1}: control values must be finite")
            if np.any(np.diff(arr) <= 0):
                raise ValueError(f"Player {i + 1}: control values must be strictly increasing")
            arr.setflags(write=False)
            arrays.append(arr)
        object.__setattr__(self, 'values', tuple(arrays))

    @classmethod
    def uniform(cls, bounds: Sequence[Tuple[float, float]], counts: Sequence[int]) -> 'ControlGrid':
        """
        Evenly spaced controls over each player's interval.

        Args:
            bounds: (low, high) per player.
            counts: Number of values per player; a count of 1 takes the interval midpoint.

        Returns:
            ControlGrid: The discretization.
        """
        values = []
        for (lo, hi), n in zip(bounds, counts):
            if int(n) < 1:
                raise ValueError(f"Control count must be positive, got {n}")
            values.append(np.linspace(lo, hi, int(n)) if int(n) > 1 else np.array([0.5 * (lo + hi)]))
        return cls(tuple(values))

    @property
    def sizes(self) -> Tuple[int, ...]:
        return tuple(v.size for v in self.values)

    def mesh(self) -> List[np.ndarray]:
        """Control arrays reshaped to broadcast as (nodes, n1, ..., nm)."""
        m = len(self.values)
        return [v.reshape((1,) + tuple(-1 if k == i else 1 for k in range(m)))
                for i, v in enumerate(self.values)]

    def check_bounds(self, problem: GameProblem) -> None:
        """Raise ValueError unless every control value lies in the declared interval."""
        if len(self.values) != problem.num_players:
            raise ValueError(f"Control grid has {len(self.values)} players, problem has {problem.num_players}")
        for i, (v, (lo, hi)) in enumerate(zip(self.values, problem.control_bounds)):
            span = max(1.0, hi - lo) * 1e-12
            if v.min() < lo - span or v.max() > hi + span:
                raise ValueError(f"Player {i + 1}: control values [{v.min()}, {v.max()}] "
                                 f"leave the admissible set [{lo}, {hi}]")


def estimate_f_norm(problem: GameProblem, grid: GridSpec, controls: ControlGrid) -> float:
    """
    Sampled infinity norm of f over all grid nodes and all discrete control tuples.

    Args:
        problem (GameProblem): The game.
        grid (GridSpec): Grid whose nodes are sampled.
        controls (ControlGrid): Discrete controls.

    Returns:
        float: max over nodes, control tuples and components of |f|.

    Raises:
        DegenerateDynamicsError: If f vanishes at every sample.
    """
    if grid.num_nodes == 0 or any(s == 0 for s in controls.sizes):
        raise ValueError("Grid and control grids must be nonempty")
    mesh = controls.mesh()
    pairs = int(np.prod(controls.sizes))
    chunk = max(1, MAX_CHUNK_PAIRS // max(1, pairs))
    norm = 0.0
    for start in range(0, grid.num_nodes, chunk):
        x = grid.coordinates[start:start + chunk]
        x = x.reshape((x.shape[0],) + (1,) * len(mesh) + (grid.dim,))
        norm = max(norm, float(np.max(np.abs(problem.velocity(x, *mesh)))))
    if norm == 0.0:
        raise DegenerateDynamicsError(f"Dynamics of '{problem.name}' vanish on every sample; "
                                      "the time step h = dx / ||f|| is undefined")
    return norm


@dataclass
class TrajectoryRecord:
    """Explicit Euler path under a feedback strategy, with the discounted costs it accrued."""
    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray
    costs: np.ndarray
    exited: bool = False
    exit_time: Optional[float] = None


def default_horizon(problem: GameProblem) -> float:
    return HORIZON_FACTOR / min(problem.discounts)


def default_time_step(problem: GameProblem, grid: Optional[GridSpec]) -> float:
    """The scheme's h = min dx / ||f||_inf, used as Euler step when none is given."""
    if grid is None or problem.f_inf_norm is None:
        raise ValueError("dt is required unless a grid is given and the problem declares ||f||_inf")
    return min(grid.dx) / problem.f_inf_norm


def integrate_feedback(problem: GameProblem,
                       start: Sequence[float],
                       feedback: Sequence[Callable[[np.ndarray], float]],
                       horizon: Optional[float] = None,
                       dt: Optional[float] = None,
                       bounds: Optional[Tuple[Sequence[float], Sequence[float]]] = None,
                       stop_on_exit: bool = True,
                       grid: Optional[GridSpec] = None) -> TrajectoryRecord:
    """
    Integrate y' = f(y, a(y)) by explicit Euler and accumulate sum psi_i e^{-lambda_i t} dt.

    Args:
        problem (GameProblem): The game.
        start (Sequence[float]): Initial state.
        feedback: One callable per player mapping a state to that player's control.
        horizon (Optional[float]): Final time; defaults to 20 / min(lambda_i).
        dt (Optional[float]): Time step; defaults to the scheme's h on grid.
        bounds: Optional (lower, upper) box the trajectory must stay in.
        stop_on_exit (bool): Stop at the first step outside the box and flag it.
        grid (Optional[GridSpec]): Grid fixing the default time step.

    Returns:
        TrajectoryRecord: Path, controls and per-player costs.
    """
    dt = default_time_step(problem, grid) if dt is None else float(dt)
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    horizon = default_horizon(problem) if horizon is None else float(horizon)
    if not horizon > 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    if len(feedback) != problem.num_players:
        raise ValueError(f"Need {problem.num_players} feedback maps, got {len(feedback)}")

    steps = int(np.ceil(horizon / dt - 1e-9))
    y = np.asarray(start, dtype=float).reshape(problem.state_dim)
    discounts = np.asarray(problem.discounts)
    lower = upper = None
    if bounds is not None:
        lower, upper = np.asarray(bounds[0], dtype=float), np.asarray(bounds[1], dtype=float)

    times, states, applied = [0.0], [y.copy()], []
    costs = np.zeros(problem.num_players)
    exited, exit_time = False, None
    for n in range(steps):
        t = n * dt
        a = [float(fb(y)) for fb in feedback]
        x = y[None, :]
        psi = np.array([float(problem.running_cost(i, x, *a)[0]) for i in range(problem.num_players)])
        costs += psi * np.exp(-discounts * t) * dt
        y = y + dt * problem.velocity(x, *a)[0]
        applied.append(a)
        times.append((n + 1) * dt)
        states.append(y.copy())
        if lower is not None and (np.any(y < lower) or np.any(y > upper)):
            exited, exit_time = True, (n + 1) * dt
            if stop_on_exit:
                break

    return TrajectoryRecord(np.asarray(times), np.asarray(states),
                            np.asarray(applied).reshape(-1, problem.num_players),
                            costs, exited, exit_time)


def discounted_cost(problem: GameProblem,
                    start: Sequence[float],
                    feedback: Sequence[Callable[[np.ndarray], float]],
                    horizon: Optional[float] = None,
                    dt: Optional[float] = None,
                    bounds: Optional[Tuple[Sequence[float], Sequence[float]]] = None,
                    grid: Optional[GridSpec] = None) -> np.ndarray:
    """
    Discounted cost J_i(x, a) of every player along the feedback trajectory from start.

    Args:
        problem (GameProblem): The game.
        start (Sequence[float]): Initial state x.
        feedback: One callable per player, state -> control.
        horizon (Optional[float]): Truncation time; defaults to 20 / min(lambda_i).
        dt (Optional[float]): Euler step; defaults to the scheme's h on grid.
        bounds: Optional (lower, upper) bounding box.
        grid (Optional[GridSpec]): Grid fixing the default time step.

    Returns:
        np.ndarray: Costs, one per player.

    Raises:
        TrajectoryExitError: If the trajectory leaves the bounding box.
    """
    record = integrate_feedback(problem, start, feedback, horizon, dt, bounds, grid=grid)
    if record.exited:
        raise TrajectoryExitError(f"Trajectory from {list(np.atleast_1d(start))} left the box "
                                  f"at t = {record.exit_time:.6g}", record.exit_time)
    return record.costs


def evaluate_hamiltonian(problem: GameProblem,
                         x: np.ndarray,
                         gradients: Sequence[np.ndarray],
                         controls: Optional[ControlGrid] = None) -> np.ndarray:
    """
    Hamiltonians H_i(x, p_1, ..., p_m) at a batch of states.

    The closed form attached to the problem is used when available; otherwise
    the Nash pair of the linearized costs p_i . f + psi_i is searched on the
    control grid (two players only).

    Args:
        problem (GameProblem): The game.
        x (np.ndarray): States, shape (n, state_dim).
        gradients: One array of shape (n, state_dim) per player.
        controls (Optional[ControlGrid]): Needed when no closed form is attached.

    Returns:
        np.ndarray: Shape (n, num_players).
    """
    x = np.asarray(x, dtype=float)
    gradients = [np.asarray(p, dtype=float) for p in gradients]
    if problem.hamiltonian is not None:
        return np.asarray(problem.hamiltonian(x, *gradients), dtype=float)
    if controls is None or problem.num_players != 2:
        raise ValueError(f"Problem '{problem.name}' has no closed-form Hamiltonian; "
                         "a two-player control grid is required")

    a1, a2 = controls.mesh()
    xs = x[:, None, None, :]
    f = problem.velocity(xs, a1, a2)
    Q = [np.sum(gradients[i][:, None, None, :] * f, axis=-1) + problem.running_cost(i, xs, a1, a2)
         for i in range(2)]
    found, i1, i2, _ = first_pure_nash_batch(Q[0], Q[1])
    rows = np.arange(x.shape[0])
    H = np.stack([Q[0][rows, i1, i2], Q[1][rows, i1, i2]], axis=-1)
    H[~found] = np.nan
    return H
