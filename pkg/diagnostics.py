"""
Module: diagnostics.py

Description:
Numerical analysis of the fixed-point operator F acting on the stacked
vector U = (U_1, U_2) of length 2N:

- apply_F: one sweep written as F(U) = diag(c1 Lambda(a*), c1 Lambda(a*)) U + c2 Psi(a*),
  with Lambda assembled as a scipy sparse matrix.
- jacobian_inf_norm: one-sided difference estimate of ||J_F(U)||_inf restricted to
  the stencil columns of every row; rows where the Nash pair switches under the
  perturbation are flagged and left out of the norm.
- scan_component: F_j0 as a function of the single entry U_j0 = s, with jump and
  fixed-point detection.
- scheme_residual: sup-norm distance of U from being a fixed point.

Author: F.Ahmadzade
"""

import logging
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np
import pandas as pd
import scipy.sparse as sp

from constants import (JACOBIAN_ABSOLUTE_FLOOR, JACOBIAN_DISAGREEMENT, JACOBIAN_RELATIVE_STEP,
                       ON_NO_NASH_FREEZE, SCAN_JUMP_FACTOR, SCAN_PAD_FACTOR)
from nash_search import first_pure_nash_batch
from solver import DiscreteGame, SolverConfig, frozen_stencils, sweep

logger = logging.getLogger(__name__)


def stacked_index(game: DiscreteGame, node: int, player: int) -> int:
    """Index of (player, node) in the stacked vector U = (U_1, U_2)."""
    return int(player) * game.grid.num_nodes + int(node)


def _as_fields(game: DiscreteGame, U: np.ndarray) -> np.ndarray:
    U = np.asarray(U, dtype=float)
    if U.size != 2 * game.grid.num_nodes:
        raise ValueError(f"Stacked vector must have length {2 * game.grid.num_nodes}, got {U.size}")
    return U.reshape(2, game.grid.num_nodes)


def nash_indices(game: DiscreteGame, U: np.ndarray, config: Optional[SolverConfig] = None) -> np.ndarray:
    """(N, 2) Nash control indices a*(U) of one sweep, -1 where unset."""
    return sweep(game, _as_fields(game, U), config)[2].indices


def interpolation_matrix(game: DiscreteGame, indices: np.ndarray) -> sp.csr_matrix:
    """
    Lambda(a) as an N x N sparse matrix for fixed control indices.

    Rows of nodes without a control pair (boundary, no-Nash) are identity rows.
    """
    n = game.grid.num_nodes
    nodes, idx, weights, _ = frozen_stencils(game, indices)
    fixed = np.setdiff1d(np.arange(n), nodes)
    rows = np.concatenate([np.repeat(nodes, idx.shape[1]), fixed])
    cols = np.concatenate([idx.ravel(), fixed])
    data = np.concatenate([weights.ravel(), np.ones(fixed.size)])
    return sp.csr_matrix((data, (rows, cols)), shape=(n, n))


def apply_F(game: DiscreteGame, U: np.ndarray,
            config: Optional[SolverConfig] = None,
            frozen_indices: Optional[np.ndarray] = None) -> np.ndarray:
    """
    The fixed-point operator on the stacked vector.

    Args:
        game (DiscreteGame): The discretized game.
        U (np.ndarray): Stacked values, length 2N.
        config (Optional[SolverConfig]): No-Nash policy used when a* is searched.
        frozen_indices (Optional[np.ndarray]): Fixed (N, 2) control indices; skips the Nash search.

    Returns:
        np.ndarray: F(U), length 2N.
    """
    fields = _as_fields(game, U)
    indices = nash_indices(game, U, config) if frozen_indices is None else np.asarray(frozen_indices)
    n = game.grid.num_nodes
    nodes, _, _, psi = frozen_stencils(game, indices)
    lam = interpolation_matrix(game, indices)

    free = np.ones(n)
    free[nodes] = 0.0
    blocks = []
    for i in range(2):
        scale = sp.diags(np.where(free > 0, 1.0, game.c1[i]))
        blocks.append(scale @ lam)
    operator = sp.block_diag(blocks, format='csr')
    shift = np.zeros((2, n))
    shift[:, nodes] = game.c2[:, None] * psi
    return operator @ fields.ravel() + shift.ravel()


@dataclass
class JacobianEstimate:
    """
    Row structure of a Jacobian estimate.

    Attributes:
        norm (float): Max absolute row sum over unflagged interior rows.
        row_sums (np.ndarray): Absolute row sums, length 2N; NaN on boundary rows.
        flagged (np.ndarray): Rows where a control switch was detected.
        delta (float): Step size.
        direction (int): Sign of the step (-1 decreasing, +1 increasing).
        frozen (bool): Controls held fixed (analytic rows).
        contraction_bound (float): max_i 1 / (1 + lambda_i h).
    """
    norm: float
    row_sums: np.ndarray
    flagged: np.ndarray
    delta: float
    direction: int
    frozen: bool
    contraction_bound: float

    def frame(self, game: DiscreteGame) -> pd.DataFrame:
        n = game.grid.num_nodes
        rows = np.flatnonzero(np.isfinite(self.row_sums))
        return pd.DataFrame({
            'row': rows,
            'player': rows // n + 1,
            'node': rows % n,
            'row_sum': self.row_sums[rows],
            'flagged': self.flagged[rows],
        })

    def metadata(self) -> dict:
        return {'scheme': 'one-sided difference with half-step check', 'delta': self.delta,
                'direction': self.direction, 'frozen': self.frozen,
                'norm': self.norm, 'contraction_bound': self.contraction_bound,
                'flagged_rows': int(self.flagged.sum())}


def jacobian_inf_norm(game: DiscreteGame, U: np.ndarray,
                      delta: Optional[float] = None,
                      frozen: bool = False,
                      direction: int = -1,
                      frozen_indices: Optional[np.ndarray] = None) -> JacobianEstimate:
    """
    Estimate ||J_F(U)||_inf from the stencil columns of every interior row.

    Each row (player p, node j) is differenced against the corners of the
    stencil of a*(x_j) in both blocks, with steps delta and delta / 2. A row is
    flagged when a perturbation changes the selected pair or the two estimates
    disagree by more than 10 percent.

    Steps go down by default. At a constant iterate with a control-free running
    cost every pair ties and the first pair in order is selected; raising one of its corners makes that
    pair strictly worse, so a forward step would flag every row.

    Args:
        game (DiscreteGame): The discretized game.
        U (np.ndarray): Stacked values, length 2N.
        delta (Optional[float]): Step; defaults to 1e-6 * (1 + ||U||_inf).
        frozen (bool): Hold the controls fixed; rows are then c1 times the stencil weights.
        direction (int): -1 (default, decreasing) or +1.
        frozen_indices (Optional[np.ndarray]): Controls for frozen mode; default a*(U).

    Returns:
        JacobianEstimate: Norm and per-row structure.
    """
    if direction not in (-1, 1):
        raise ValueError(f"direction must be -1 or +1, got {direction}")
    fields = _as_fields(game, U)
    n = game.grid.num_nodes
    delta = JACOBIAN_RELATIVE_STEP * (1.0 + float(np.max(np.abs(fields)))) if delta is None else float(delta)
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")

    row_sums = np.full(2 * n, np.nan)
    flagged = np.zeros(2 * n, dtype=bool)
    search = SolverConfig(on_no_nash=ON_NO_NASH_FREEZE)

    if frozen:
        indices = nash_indices(game, U, search) if frozen_indices is None else np.asarray(frozen_indices)
        nodes, _, weights, _ = frozen_stencils(game, indices)
        for p in range(2):
            row_sums[p * n + nodes] = game.c1[p] * np.abs(weights).sum(axis=1)
    else:
        amount = direction * delta
        for tables in game.interior_tables():
            Q = game.payoffs(tables, fields)
            found, i1, i2, _ = first_pure_nash_batch(*Q)
            rows = np.arange(tables.nodes.size)
            base = [Q[p][rows, i1, i2] for p in range(2)]
            corners = tables.idx[rows, i1, i2]
            sums = np.zeros((2, rows.size))
            bad = np.repeat(~found[None, :], 2, axis=0)
            for q in range(2):
                for c in range(corners.shape[1]):
                    hit = tables.idx == corners[:, c][:, None, None, None]
                    bump = np.where(hit, tables.weights, 0.0).sum(axis=-1)
                    estimates = []
                    for step in (amount, 0.5 * amount):
                        Qp = list(Q)
                        Qp[q] = Q[q] + game.c1[q] * step * bump
                        f2, j1, j2, _ = first_pure_nash_batch(*Qp)
                        bad |= ((~f2) | (j1 != i1) | (j2 != i2))[None, :]
                        estimates.append(np.stack([(Qp[p][rows, j1, j2] - base[p]) / step for p in range(2)]))
                    e1, e2 = estimates
                    limit = np.maximum(JACOBIAN_DISAGREEMENT * np.maximum(np.abs(e1), np.abs(e2)),
                                       JACOBIAN_ABSOLUTE_FLOOR)
                    bad |= np.abs(e1 - e2) > limit
                    sums += np.abs(e1)
            for p in range(2):
                row_sums[p * n + tables.nodes] = sums[p]
                flagged[p * n + tables.nodes] = bad[p]

    usable = np.isfinite(row_sums) & ~flagged
    if usable.any():
        norm = float(np.max(row_sums[usable]))
    else:
        logger.warning("Every Jacobian row is flagged or unset; norm undefined")
        norm = float('nan')
    return JacobianEstimate(norm, row_sums, flagged, delta, direction, frozen, float(np.max(game.c1)))


@dataclass
class ComponentScan:
    """
    F_j0 sampled along U_j0 = s with everything else frozen.

    Attributes:
        component_index (int): j0 in the stacked vector.
        node (int): Grid node of j0.
        player (int): 0 or 1.
        s_values (np.ndarray): Strictly increasing samples.
        F_values (np.ndarray): F_j0 at each sample; NaN where no Nash pair exists.
        fixed_points (np.ndarray): Solutions of F_j0(s) = s inside continuous pieces.
        jumps (np.ndarray): Locations of detected discontinuities.
        max_piece_slope (float): Largest |slope| between samples not separated by a jump.
        contraction_bound (float): 1 / (1 + lambda h) of the player.
    """
    component_index: int
    node: int
    player: int
    s_values: np.ndarray
    F_values: np.ndarray
    fixed_points: np.ndarray
    jumps: np.ndarray
    max_piece_slope: float
    contraction_bound: float

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame({'s': self.s_values, 'F': self.F_values})

    @property
    def piecewise_contractive(self) -> bool:
        return self.max_piece_slope <= self.contraction_bound + 1e-6


def detect_jumps(s: np.ndarray, F: np.ndarray, reference_slope: float) -> np.ndarray:
    """Boolean per sample interval: the change exceeds 10x the neighbouring slope-implied change."""
    ds = np.diff(s)
    dF = np.diff(F)
    slope = np.abs(dF / ds)
    left = np.concatenate([[0.0], slope[:-1]])
    right = np.concatenate([slope[1:], [0.0]])
    local = np.fmax(np.fmax(np.nan_to_num(left, nan=0.0), np.nan_to_num(right, nan=0.0)), reference_slope)
    return np.isfinite(dF) & (np.abs(dF) > SCAN_JUMP_FACTOR * local * ds)


def detect_fixed_points(s: np.ndarray, F: np.ndarray, jumps: np.ndarray) -> np.ndarray:
    """Zeros of F(s) - s: exact hits plus linearly refined sign changes inside continuous pieces."""
    g = F - s
    exact = s[g == 0.0]
    crossing = np.flatnonzero(~jumps & np.isfinite(g[:-1]) & np.isfinite(g[1:]) & (g[:-1] * g[1:] < 0))
    refined = s[crossing] - g[crossing] * (s[crossing + 1] - s[crossing]) / (g[crossing + 1] - g[crossing])
    return np.sort(np.concatenate([exact, refined]))


def default_scan_range(values) -> Tuple[float, float]:
    """Scan interval around recent values of one component, wide enough to show both ends of a 2-cycle."""
    values = np.asarray(values, dtype=float)
    lo, hi = float(values.min()), float(values.max())
    pad = max(abs(0.5 * (lo + hi)), SCAN_PAD_FACTOR * (hi - lo))
    if pad == 0.0:
        pad = 1.0
    return lo - pad, hi + pad


def scan_component(game: DiscreteGame, j0: int, U: np.ndarray,
                   s_min: float, s_max: float, samples: int = 401) -> ComponentScan:
    """
    Sample F_j0 with all entries of U frozen except U_j0 = s.

    Args:
        game (DiscreteGame): The discretized game.
        j0 (int): Index into the stacked vector (player * N + node).
        U (np.ndarray): Stacked values, length 2N.
        s_min (float): Lower end of the scan.
        s_max (float): Upper end of the scan.
        samples (int): Number of samples (at least 2).

    Returns:
        ComponentScan: Samples, fixed points and jumps.
    """
    fields = _as_fields(game, U).copy()
    n = game.grid.num_nodes
    if not 0 <= int(j0) < 2 * n:
        raise IndexError(f"Component {j0} out of range for a stacked vector of length {2 * n}")
    if int(samples) < 2:
        raise ValueError(f"samples must be at least 2, got {samples}")
    if not s_min < s_max:
        raise ValueError(f"Need s_min < s_max, got [{s_min}, {s_max}]")
    player, node = divmod(int(j0), n)
    s = np.linspace(s_min, s_max, int(samples))
    bound = float(game.c1[player])

    if game.grid.boundary_mask[node]:
        logger.warning("Component %d is a boundary node; F keeps its value, scan is the identity", j0)
        F = s.copy()
    else:
        tables = game.tables(np.array([node]))
        F = np.empty_like(s)
        for k, value in enumerate(s):
            fields[player, node] = value
            Q = game.payoffs(tables, fields)
            found, i1, i2, _ = first_pure_nash_batch(*Q)
            F[k] = Q[player][0, i1[0], i2[0]] if found[0] else np.nan

    jumps = detect_jumps(s, F, bound)
    slopes = np.abs(np.diff(F) / np.diff(s))
    smooth = ~jumps & np.isfinite(slopes)
    max_slope = float(np.max(slopes[smooth])) if smooth.any() else float('nan')
    mid = 0.5 * (s[:-1] + s[1:])
    return ComponentScan(int(j0), node, player, s, F, detect_fixed_points(s, F, jumps),
                         mid[jumps], max_slope, bound)


def scheme_residual(game: DiscreteGame, fields: np.ndarray,
                    config: Optional[SolverConfig] = None) -> Tuple[float, float]:
    """
    Per-player sup-norm of U - F(U) over interior nodes.

    No-Nash nodes are frozen for the purpose of the measurement.
    """
    config = replace(config or SolverConfig(), on_no_nash=ON_NO_NASH_FREEZE)
    fields = np.asarray(fields, dtype=float)
    new = sweep(game, fields, config)[0]
    interior = game.grid.interior_nodes
    return tuple(float(np.max(np.abs(fields[i, interior] - new[i, interior]))) for i in range(2))
