"""
Module: admissibility.py

Description:
Grid check of the admissibility conditions for one-dimensional solutions of
the Hamilton-Jacobi system:

(A1) lambda_i u_i = H_i(x, u_1', u_2') away from kinks,
(A2) sublinear growth, only estimable on a bounded grid,
(A3) at every kink of u_1 + u_2, either the left derivative of the sum is
     nonnegative or its right derivative is nonpositive.

Author: F.Ahmadzade
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from constants import ADMISSIBLE, GROWTH_RATIO_LIMIT, INCONCLUSIVE, KINK_FACTOR, NOT_ADMISSIBLE
from game import ControlGrid, GameProblem, evaluate_hamiltonian
from grid import GridSpec

logger = logging.getLogger(__name__)

MIN_CHECKED_NODES = 5


@dataclass
class AdmissibilityReport:
    """
    Attributes:
        a1_residual_sup (float): Sup of |lambda_i u_i - H_i| over smooth interior nodes.
        a2_growth_constant (float): Smallest C with |u(x_j)| <= C (1 + |x_j|) on the grid.
        a2_inner_growth_constant (float): Same constant on the inner half of the domain.
        a2_flagged (bool): Growth constant increases markedly with the domain (superlinear growth).
        a3_violations (List[float]): Kink locations where both sign conditions fail.
        kinks (List[float]): Locations where u_1' + u_2' jumps by more than the threshold.
        verdict (str): admissible-on-grid, not-admissible or inconclusive.
        notes (List[str]): Caveats.
    """
    a1_residual_sup: float
    a2_growth_constant: float
    a2_inner_growth_constant: float
    a2_flagged: bool
    a3_violations: List[float]
    kinks: List[float]
    verdict: str
    notes: List[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            'a1_residual_sup': self.a1_residual_sup,
            'a2_growth_constant': self.a2_growth_constant,
            'a2_inner_growth_constant': self.a2_inner_growth_constant,
            'a2_flagged': self.a2_flagged,
            'a3_violations': list(self.a3_violations),
            'kinks': list(self.kinks),
            'verdict': self.verdict,
            'notes': list(self.notes),
        }


def _growth_constant(u: np.ndarray, x: np.ndarray) -> float:
    return float(np.max(np.max(np.abs(u), axis=0) / (1.0 + np.abs(x))))


def check_admissibility_1d(fields: np.ndarray, grid: GridSpec, problem: GameProblem,
                           residual_tol: Optional[float] = None,
                           jump_tol: Optional[float] = None,
                           controls: Optional[ControlGrid] = None) -> AdmissibilityReport:
    """
    Check conditions A1-A3 for node values of a 1D two-player solution.

    Args:
        fields (np.ndarray): (2, N) node values of (u_1, u_2).
        grid (GridSpec): One-dimensional grid.
        problem (GameProblem): Supplies discounts and the Hamiltonians.
        residual_tol (Optional[float]): A1 tolerance; defaults to 1e-6 (1 + ||u||_inf).
        jump_tol (Optional[float]): Kink threshold on derivative jumps; defaults to
            10 dx median|u''| with a floor of 1e-8.
        controls (Optional[ControlGrid]): For problems without a closed-form Hamiltonian.

    Returns:
        AdmissibilityReport: Residual, growth constants, kinks and verdict.

    Raises:
        ValueError: If the grid is not one-dimensional.
    """
    if grid.dim != 1:
        raise ValueError(f"Admissibility is checked on 1D grids only, got dim={grid.dim}")
    u = np.asarray(fields, dtype=float)
    if u.shape != (2, grid.num_nodes):
        raise ValueError(f"Fields must have shape (2, {grid.num_nodes}), got {u.shape}")
    x = grid.axes[0]
    dx = grid.dx[0]
    notes = []

    left = (u[:, 1:-1] - u[:, :-2]) / dx
    right = (u[:, 2:] - u[:, 1:-1]) / dx
    inner_x = x[1:-1]

    # A3: kinks of the sum u_1 + u_2
    second = (right - left) / dx
    if jump_tol is None:
        jump_tol = max(KINK_FACTOR * dx * float(np.median(np.abs(second))), 1e-8)
    s_left, s_right = left.sum(axis=0), right.sum(axis=0)
    kink = np.abs(s_right - s_left) > jump_tol
    violation = kink & (s_left < 0) & (s_right > 0)

    # A1 away from kinks and their neighbours
    near_kink = kink.copy()
    near_kink[1:] |= kink[:-1]
    near_kink[:-1] |= kink[1:]
    smooth = ~near_kink
    if residual_tol is None:
        residual_tol = 1e-6 * (1.0 + float(np.max(np.abs(u))))
    if smooth.sum() < MIN_CHECKED_NODES:
        notes.append(f"Only {int(smooth.sum())} smooth interior nodes; A1 not assessed")
        a1 = float('nan')
    else:
        p = 0.5 * (left + right)
        pts = inner_x[smooth][:, None]
        H = evaluate_hamiltonian(problem, pts, [p[0, smooth][:, None], p[1, smooth][:, None]], controls)
        lam = np.asarray(problem.discounts)[None, :]
        a1 = float(np.nanmax(np.abs(lam * u[:, 1:-1][:, smooth].T - H)))

    # A2 on the full grid vs. its inner half
    center = 0.5 * (grid.lower[0] + grid.upper[0])
    half = 0.25 * (grid.upper[0] - grid.lower[0])
    inner = np.abs(x - center) <= half
    c_full = _growth_constant(u, x)
    c_inner = _growth_constant(u[:, inner], x[inner])
    a2_flagged = bool(c_inner > 0 and c_full / c_inner > GROWTH_RATIO_LIMIT)
    notes.append("Sublinear growth cannot be certified on a bounded grid; A2 reports the empirical constant")

    if violation.any() or a2_flagged or (np.isfinite(a1) and a1 > residual_tol):
        verdict = NOT_ADMISSIBLE
    elif not np.isfinite(a1):
        verdict = INCONCLUSIVE
    else:
        verdict = ADMISSIBLE

    report = AdmissibilityReport(a1, c_full, c_inner, a2_flagged,
                                 inner_x[violation].tolist(), inner_x[kink].tolist(), verdict, notes)
    logger.info("Admissibility: %s (A1 %.3e, A2 C=%.3g, %d A3 violation(s))",
                verdict, a1, c_full, len(report.a3_violations))
    return report


def check_solution_1d(problem: GameProblem, grid: GridSpec, solution: Sequence,
                      **kwargs) -> AdmissibilityReport:
    """Admissibility of closed-form solution callables projected on the grid."""
    return check_admissibility_1d(problem.solution_values(solution, grid.coordinates), grid, problem, **kwargs)
