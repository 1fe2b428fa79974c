"""
Module: trajectory.py

Description:
Optimal trajectories from a solved game: the Nash feedback of the last sweep
is applied as a piecewise-constant (nearest interior node) control and the
dynamics are integrated by explicit Euler steps of the scheme's own size h.
The realized discounted costs approximate the computed values at the start.

Author: F.Ahmadzade
"""

import logging
from typing import Callable, List, Optional, Sequence

import numpy as np

from game import TrajectoryRecord, integrate_feedback
from grid import GridSpec, OutOfDomainError
from solver import SolveResult

logger = logging.getLogger(__name__)


def nearest_interior_node(grid: GridSpec, point: np.ndarray) -> int:
    """Flat index of the interior node closest to point."""
    t = (grid.clamp(point) - np.asarray(grid.lower)) / np.asarray(grid.dx)
    multi = np.clip(np.rint(t), 1, np.asarray(grid.nodes_per_axis) - 2).astype(np.int64)
    return int(np.sum(multi * np.asarray(grid.strides)))


def feedback_maps(result: SolveResult) -> List[Callable[[np.ndarray], float]]:
    """One state -> control map per player, reading the feedback at the nearest interior node."""
    grid = result.game.grid
    feedback = result.feedback

    def make(player: int) -> Callable[[np.ndarray], float]:
        def control(y: np.ndarray) -> float:
            node = nearest_interior_node(grid, y)
            value = feedback[node, player]
            if np.isnan(value):
                raise ValueError(f"No feedback control at node {node}; the last sweep found no Nash pair there")
            return float(value)
        return control

    return [make(i) for i in range(2)]


def synthesize_trajectory(result: SolveResult,
                          start: Sequence[float],
                          horizon: Optional[float] = None,
                          dt: Optional[float] = None) -> TrajectoryRecord:
    """
    Trajectory under the computed Nash feedback and its realized discounted costs.

    Args:
        result (SolveResult): A solve result (ideally converged).
        start (Sequence[float]): Starting point inside the domain.
        horizon (Optional[float]): Final time; defaults to 20 / min(lambda_i).
        dt (Optional[float]): Euler step; defaults to the scheme's h.

    Returns:
        TrajectoryRecord: Path, applied controls and costs; exited is set when the
        path left the domain before the horizon (partial result).

    Raises:
        OutOfDomainError: If start lies outside the domain.
    """
    grid = result.game.grid
    point = np.atleast_1d(np.asarray(start, dtype=float))
    if point.shape != (grid.dim,) or not grid.contains(point):
        raise OutOfDomainError(f"Start {point.tolist()} lies outside the domain "
                               f"{list(zip(grid.lower, grid.upper))}")
    record = integrate_feedback(result.game.problem, point, feedback_maps(result),
                                horizon=horizon, dt=result.h if dt is None else dt,
                                bounds=(grid.lower, grid.upper))
    if record.exited:
        logger.warning("Trajectory from %s left the domain at t = %.4g; costs are partial",
                       point.tolist(), record.exit_time)
    return record
