"""
Module: save_to_csv.py

Description:
Writes run artifacts as delimited text: value fields and feedback controls
per node (axis columns first), the convergence history, component scans,
Jacobian row structure and error tables, plus the JSON run report.

Author: F.Ahmadzade
"""

import json
import logging
import os
from typing import Any, Dict, Optional

import numpy as np
import pandas as pd

from constants import CONVERGENCE_FILE, FEEDBACK_FILE, RUN_REPORT_FILE, VALUE_FIELDS_FILE
from grid import GridSpec

logger = logging.getLogger(__name__)

AXIS_NAMES = ('x', 'y')


def save_to_csv(data: Any, filename: str, grid: Optional[GridSpec] = None) -> str:
    """
    Save tabular data into a CSV file.

    Args:
        data: DataFrame or dict of equal-length columns.
        filename (str): Path to the output CSV file.
        grid (Optional[GridSpec]): If provided, node coordinates are inserted as the leading columns.

    Returns:
        str: The path written.
    """
    df = data if isinstance(data, pd.DataFrame) else pd.DataFrame(data)
    if grid is not None:
        for axis in reversed(range(grid.dim)):
            df.insert(0, AXIS_NAMES[axis], grid.coordinates[:, axis])
    df.to_csv(filename, index=False)
    logger.info("Saved %s", filename)
    return filename


def value_fields_frame(grid: GridSpec, fields: np.ndarray) -> pd.DataFrame:
    df = pd.DataFrame({'U1': fields[0], 'U2': fields[1]})
    for axis in reversed(range(grid.dim)):
        df.insert(0, AXIS_NAMES[axis], grid.coordinates[:, axis])
    return df


def save_run_outputs(result, output_dir: str) -> Dict[str, str]:
    """
    Write value fields, feedback controls and the convergence log of a solve.

    Args:
        result (SolveResult): Outcome of solver.solve.
        output_dir (str): Existing directory.

    Returns:
        Dict[str, str]: Artifact name -> path.
    """
    grid = result.game.grid
    feedback = result.feedback
    paths = {
        'value_fields': save_to_csv(value_fields_frame(grid, result.fields),
                                    os.path.join(output_dir, VALUE_FIELDS_FILE)),
        'feedback': save_to_csv({'a1': feedback[:, 0], 'a2': feedback[:, 1]},
                                os.path.join(output_dir, FEEDBACK_FILE), grid=grid),
        'convergence': save_to_csv(result.history_frame(), os.path.join(output_dir, CONVERGENCE_FILE)),
    }
    return paths


def save_scan(scan, output_dir: str, suffix: str = '') -> str:
    """Two-column (s, F) table of a component scan."""
    name = f"scan_U{scan.player + 1}_{scan.node}{suffix}.csv"
    return save_to_csv(scan.frame(), os.path.join(output_dir, name))


def save_jacobian(estimate, game, label: str, output_dir: str) -> str:
    safe = label.replace(':', '_')
    return save_to_csv(estimate.frame(game), os.path.join(output_dir, f"jacobian_{safe}.csv"))


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, float) and not np.isfinite(value):
        return None
    return value


def save_run_report(report: Dict[str, Any], output_dir: str) -> str:
    path = os.path.join(output_dir, RUN_REPORT_FILE)
    with open(path, 'w', encoding='utf-8') as fh:
        json.dump(_jsonable(report), fh, indent=2, sort_keys=True)
    logger.info("Saved %s", path)
    return path


def load_run_report(output_dir: str) -> Dict[str, Any]:
    with open(os.path.join(output_dir, RUN_REPORT_FILE), encoding='utf-8') as fh:
        return json.load(fh)
