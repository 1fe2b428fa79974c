"""
Module: plot_value_field.py

Description:
Visualizes value functions (curves in 1D with an optional exact overlay,
surfaces on 3D axes in 2D) and component scans against the identity.

Author: F.Ahmadzade
"""

from typing import Optional

import matplotlib.pyplot as plt
import numpy as np
from mpl_toolkits.mplot3d import Axes3D  # noqa: F401 unused import; necessary for 3D projection

from grid import GridSpec


def _finish(fig, filename: Optional[str]) -> None:
    if filename:
        fig.savefig(filename, dpi=120, bbox_inches='tight')
        plt.close(fig)
    else:
        plt.show()


def plot_value_fields(grid: GridSpec, fields: np.ndarray, title: str = "Value functions",
                      exact: Optional[np.ndarray] = None, filename: Optional[str] = None) -> None:
    """
    Plot U_1 and U_2 side by side.

    Args:
        grid (GridSpec): 1D or 2D grid.
        fields (np.ndarray): (2, N) node values.
        title (str): Figure title.
        exact (Optional[np.ndarray]): (2, N) exact values drawn as solid lines (1D only).
        filename (Optional[str]): Write the figure here instead of showing it.

    Returns:
        None
    """
    if grid.dim == 1:
        fig, axes = plt.subplots(1, 2, figsize=(11, 4))
        x = grid.axes[0]
        for i, ax in enumerate(axes):
            if exact is not None:
                ax.plot(x, exact[i], linestyle='-', color='k', label=f'u{i + 1} exact')
            ax.plot(x, fields[i], marker='o', linestyle='none', color='b', label=f'U{i + 1}')
            ax.set_xlabel('x')
            ax.set_title(f'U{i + 1}')
            ax.legend()
    else:
        fig = plt.figure(figsize=(12, 5))
        X, Y = np.meshgrid(*grid.axes, indexing='ij')
        for i in range(2):
            ax = fig.add_subplot(1, 2, i + 1, projection='3d')
            Z = fields[i].reshape(grid.nodes_per_axis, order='F')
            ax.plot_surface(X, Y, Z, cmap='viridis', linewidth=0)
            ax.set_xlabel('x')
            ax.set_ylabel('y')
            ax.set_title(f'U{i + 1}')
    fig.suptitle(title)
    _finish(fig, filename)


def plot_scan(scan, title: Optional[str] = None, filename: Optional[str] = None) -> None:
    """Component scan F_j0(s) against the identity, with detected fixed points marked."""
    fig, ax = plt.subplots(figsize=(6, 5))
    ax.plot(scan.s_values, scan.s_values, linestyle='-', color='k', label='identity')
    ax.plot(scan.s_values, scan.F_values, marker='.', linestyle='-', color='b', label='F_j0(s)')
    if scan.fixed_points.size:
        ax.plot(scan.fixed_points, scan.fixed_points, 'rs', label='fixed points')
    ax.set_xlabel('s')
    ax.set_title(title or f'U{scan.player + 1}, node {scan.node}')
    ax.legend()
    _finish(fig, filename)
