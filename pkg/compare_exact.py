"""
Module: compare_exact.py

Description:
Compares computed value fields with the exact solution registered on a
problem: per-node errors plus sup and mean-absolute error per player, taken
over nodes at least `margin` nodes away from the boundary.

Author: F.Ahmadzade
"""

import logging
import os
from typing import Tuple

import numpy as np
import pandas as pd

from builtin_problems import load_problem_config
from constants import ERROR_TABLE_FILE, VALUE_FIELDS_FILE
from game import GameProblem
from grid import GridSpec
from save_to_csv import load_run_report, save_to_csv, value_fields_frame

logger = logging.getLogger(__name__)


def margin_mask(grid: GridSpec, margin: int) -> np.ndarray:
    """Nodes whose index is at least `margin` away from every boundary face."""
    multi = grid.multi_index(np.arange(grid.num_nodes))
    nodes = np.asarray(grid.nodes_per_axis)
    return np.all((multi >= margin) & (multi <= nodes - 1 - margin), axis=-1)


def compare_exact(problem: GameProblem, grid: GridSpec, fields: np.ndarray,
                  margin: int = 1) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """
    Error table of computed fields against the exact solution.

    Args:
        problem (GameProblem): Must carry an exact solution.
        grid (GridSpec): The grid of the fields.
        fields (np.ndarray): (2, N) computed values.
        margin (int): Nodes this close to the boundary are excluded from the summary (1 = interior).

    Returns:
        Tuple[pd.DataFrame, pd.DataFrame]: Per-node table, and summary (player, sup_error, mean_abs_error).

    Raises:
        MissingExactSolutionError: If the problem has no exact solution.
    """
    exact = problem.exact_values(grid.coordinates)
    fields = np.asarray(fields, dtype=float)
    errors = fields - exact

    table = value_fields_frame(grid, fields)
    for i in range(2):
        table[f"u{i + 1}"] = exact[i]
    for i in range(2):
        table[f"error_U{i + 1}"] = errors[i]
    used = margin_mask(grid, margin)
    table['in_summary'] = used

    if not used.any():
        raise ValueError(f"margin {margin} leaves no nodes to compare")
    summary = pd.DataFrame({
        'player': [1, 2],
        'sup_error': [float(np.max(np.abs(errors[i, used]))) for i in range(2)],
        'mean_abs_error': [float(np.mean(np.abs(errors[i, used]))) for i in range(2)],
    })
    return table, summary


def compare_run_dir(output_dir: str, margin: int = 1) -> pd.DataFrame:
    """
    Rebuild the problem of an existing run from its report and write the error table.

    Args:
        output_dir (str): Directory holding run_report.json and value_fields.csv.
        margin (int): Boundary margin in nodes.

    Returns:
        pd.DataFrame: Summary errors per player.
    """
    report = load_run_report(output_dir)
    problem, grid, _ = load_problem_config(report['problem_config'])
    df = pd.read_csv(os.path.join(output_dir, VALUE_FIELDS_FILE))
    if len(df) != grid.num_nodes:
        raise ValueError(f"{VALUE_FIELDS_FILE} has {len(df)} rows, grid has {grid.num_nodes} nodes")
    fields = df[['U1', 'U2']].to_numpy(dtype=float).T
    table, summary = compare_exact(problem, grid, fields, margin)
    save_to_csv(table, os.path.join(output_dir, ERROR_TABLE_FILE))
    logger.info("Error summary for '%s':\n%s", problem.name, summary.to_string(index=False))
    return summary
