"""
Module: grid.py

Description:
Uniform grid over a 1D/2D box domain with lexicographic node indexing
(axis 0 fastest), cell location and multilinear interpolation weights.
One stencil is one row of the interpolation matrix Lambda(a): the vertices of
the cell containing a point and the weights given to their values.

Author: F.Ahmadzade
"""

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence, Tuple, Union

import numpy as np

# Points this far outside the box (relative to the side length) still count as inside
DOMAIN_TOLERANCE = 1e-12


class OutOfDomainError(ValueError):
    """Raised when an interpolation point lies outside the grid box."""


@dataclass(frozen=True)
class GridSpec:
    """
    Uniform grid over the box [lower, upper] with nodes_per_axis nodes per axis.

    Attributes:
        lower (Tuple[float, ...]): Lower corner of the box, one entry per axis.
        upper (Tuple[float, ...]): Upper corner of the box.
        nodes_per_axis (Tuple[int, ...]): Node count per axis (at least 2).
    """
    lower: Tuple[float, ...]
    upper: Tuple[float, ...]
    nodes_per_axis: Tuple[int, ...]

    def __post_init__(self):
        lower = tuple(float(v) for v in np.atleast_1d(self.lower))
        upper = tuple(float(v) for v in np.atleast_1d(self.upper))
        nodes = tuple(int(v) for v in np.atleast_1d(self.nodes_per_axis))
        object.__setattr__(self, 'lower', lower)
        object.__setattr__(self, 'upper', upper)
        object.__setattr__(self, 'nodes_per_axis', nodes)

        if not (len(lower) == len(upper) == len(nodes)):
            raise ValueError("lower, upper and nodes_per_axis must have the same length")
        if len(lower) not in (1, 2):
            raise ValueError(f"Only 1D and 2D grids are supported, got dim={len(lower)}")
        for axis, (lo, hi, n) in enumerate(zip(lower, upper, nodes)):
            if not np.isfinite(lo) or not np.isfinite(hi) or lo >= hi:
                raise ValueError(f"Axis {axis}: need finite lower < upper, got [{lo}, {hi}]")
            if n < 2:
                raise ValueError(f"Axis {axis}: need at least 2 nodes, got {n}")

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def dx(self) -> Tuple[float, ...]:
        return tuple((hi - lo) / (n - 1) for lo, hi, n in
                     zip(self.lower, self.upper, self.nodes_per_axis))

    @property
    def num_nodes(self) -> int:
        return int(np.prod(self.nodes_per_axis))

    @property
    def strides(self) -> Tuple[int, ...]:
        # axis 0 runs fastest
        return tuple(int(np.prod(self.nodes_per_axis[:axis])) for axis in range(self.dim))

    @cached_property
    def axes(self) -> Tuple[np.ndarray, ...]:
        return tuple(np.linspace(lo, hi, n) for lo, hi, n in
                     zip(self.lower, self.upper, self.nodes_per_axis))

    @cached_property
    def coordinates(self) -> np.ndarray:
        """Array of shape (N, dim) with the coordinates of every node in index order."""
        mesh = np.meshgrid(*self.axes, indexing='ij')
        coords = np.stack([m.ravel(order='F') for m in mesh], axis=-1)
        coords.setflags(write=False)
        return coords

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        multi = self.multi_index(np.arange(self.num_nodes))
        mask = np.zeros(self.num_nodes, dtype=bool)
        for axis, n in enumerate(self.nodes_per_axis):
            mask |= (multi[..., axis] == 0) | (multi[..., axis] == n - 1)
        mask.setflags(write=False)
        return mask

    @cached_property
    def interior_nodes(self) -> np.ndarray:
        nodes = np.flatnonzero(~self.boundary_mask)
        nodes.setflags(write=False)
        return nodes

    def multi_index(self, j: Union[int, np.ndarray]) -> np.ndarray:
        """Per-axis integer indices of flat node index j (shape (..., dim))."""
        j = np.asarray(j, dtype=np.int64)
        return np.stack([(j // s) % n for s, n in zip(self.strides, self.nodes_per_axis)], axis=-1)

    def flat_index(self, multi: Sequence[int]) -> int:
        multi = np.asarray(multi, dtype=np.int64)
        return int(np.sum(multi * np.asarray(self.strides)))

    def contains(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        lower, upper = np.asarray(self.lower), np.asarray(self.upper)
        tol = DOMAIN_TOLERANCE * (upper - lower)
        return np.all((pts >= lower - tol) & (pts <= upper + tol), axis=-1)

    def clamp(self, points: np.ndarray) -> np.ndarray:
        return np.clip(np.asarray(points, dtype=float), self.lower, self.upper)

    def nearest_node(self, points: np.ndarray) -> np.ndarray:
        """Flat index of the node closest to each point (points clamped into the box)."""
        pts = self.clamp(points)
        t = (pts - np.asarray(self.lower)) / np.asarray(self.dx)
        multi = np.clip(np.rint(t), 0, np.asarray(self.nodes_per_axis) - 1).astype(np.int64)
        return np.sum(multi * np.asarray(self.strides), axis=-1)


def uniform_grid(lower, upper, nodes) -> GridSpec:
    """
    Build a GridSpec, accepting scalars for a 1D grid.

    Args:
        lower: Lower bound(s) of the box.
        upper: Upper bound(s) of the box.
        nodes: Node count(s) per axis.

    Returns:
        GridSpec: The grid.
    """
    dim = max(np.size(lower), np.size(upper), np.size(nodes))
    return GridSpec(tuple(np.broadcast_to(lower, (dim,))),
                    tuple(np.broadcast_to(upper, (dim,))),
                    tuple(np.broadcast_to(nodes, (dim,))))


@dataclass
class ValueField:
    """
    Values of one player's value function at every grid node.

    Attributes:
        grid (GridSpec): The grid the values live on.
        values (np.ndarray): Array of length N, one finite value per node.
    """
    grid: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = np.array(self.values, dtype=float).ravel()
        if self.values.size != self.grid.num_nodes:
            raise ValueError(f"ValueField needs {self.grid.num_nodes} values, got {self.values.size}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("ValueField values must be finite")


@dataclass(frozen=True)
class InterpStencil:
    """One row of the interpolation matrix: 2^dim node indices and their weights."""
    node_indices: Tuple[int, ...]
    weights: Tuple[float, ...]


def node_coords(grid: GridSpec, j: int) -> np.ndarray:
    """
    Spatial coordinates of node j.

    Args:
        grid (GridSpec): The grid.
        j (int): Flat node index, 0 <= j < N.

    Returns:
        np.ndarray: Coordinates, shape (dim,).

    Raises:
        IndexError: If j is out of range.
    """
    if not 0 <= int(j) < grid.num_nodes:
        raise IndexError(f"Node index {j} out of range for a grid of {grid.num_nodes} nodes")
    return np.array(grid.coordinates[int(j)])


def stencil_arrays(grid: GridSpec, points: np.ndarray,
                   check: bool = True) -> Tuple[np.ndarray, np.ndarray]:
    """
    Vectorized cell location and multilinear weights.

    Points lying exactly on a cell face belong to the lower-index cell.

    Args:
        grid (GridSpec): The grid.
        points (np.ndarray): Points of shape (..., dim).
        check (bool): Raise on points outside the box (otherwise they are clamped).

    Returns:
        Tuple[np.ndarray, np.ndarray]: Node indices and weights, both of shape (..., 2**dim).

    Raises:
        OutOfDomainError: If check is set and a point lies outside the box.
    """
    pts = np.asarray(points, dtype=float)
    if pts.shape[-1] != grid.dim:
        raise ValueError(f"Points must have trailing dimension {grid.dim}, got shape {pts.shape}")
    if check:
        inside = grid.contains(pts)
        if not np.all(inside):
            bad = pts[~inside].reshape(-1, grid.dim)[0]
            raise OutOfDomainError(f"Point {bad.tolist()} lies outside the domain "
                                   f"{list(zip(grid.lower, grid.upper))}")
    pts = grid.clamp(pts)

    nodes = np.asarray(grid.nodes_per_axis)
    t = (pts - np.asarray(grid.lower)) / np.asarray(grid.dx)
    cell = np.clip(np.ceil(t) - 1, 0, nodes - 2).astype(np.int64)
    frac = np.clip(t - cell, 0.0, 1.0)

    n_corners = 2 ** grid.dim
    idx = np.empty(pts.shape[:-1] + (n_corners,), dtype=np.int64)
    weights = np.empty(pts.shape[:-1] + (n_corners,), dtype=float)
    for corner in range(n_corners):
        node = np.zeros(pts.shape[:-1], dtype=np.int64)
        weight = np.ones(pts.shape[:-1], dtype=float)
        for axis, stride in enumerate(grid.strides):
            bit = (corner >> axis) & 1
            node = node + (cell[..., axis] + bit) * stride
            weight = weight * (frac[..., axis] if bit else 1.0 - frac[..., axis])
        idx[..., corner] = node
        weights[..., corner] = weight
    return idx, weights


def interpolate(values: np.ndarray, idx: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Weighted sum of node values over the last stencil axis, corner by corner."""
    values = np.asarray(values)
    acc = weights[..., 0] * values[idx[..., 0]]
    for corner in range(1, idx.shape[-1]):
        acc = acc + weights[..., corner] * values[idx[..., corner]]
    return acc


def interp_stencil(grid: GridSpec, z: Sequence[float]) -> InterpStencil:
    """
    Stencil (cell vertices and multilinear weights) of a single point.

    Args:
        grid (GridSpec): The grid.
        z (Sequence[float]): Point inside the domain.

    Returns:
        InterpStencil: Node indices and weights; weights are nonnegative and sum to 1.

    Raises:
        OutOfDomainError: If z lies outside the domain.
    """
    point = np.atleast_1d(np.asarray(z, dtype=float))
    idx, weights = stencil_arrays(grid, point[None, :])
    return InterpStencil(tuple(int(i) for i in idx[0]), tuple(float(w) for w in weights[0]))


def eval_field(field: ValueField, z: Union[Sequence[float], np.ndarray]) -> Union[float, np.ndarray]:
    """
    Evaluate a value field at a point (or an array of points of shape (..., dim)).

    Args:
        field (ValueField): Node values.
        z: Point(s) inside the domain.

    Returns:
        float or np.ndarray: Interpolated value(s).

    Raises:
        OutOfDomainError: If a point lies outside the domain.
    """
    pts = np.asarray(z, dtype=float)
    if pts.ndim == 0 or (pts.ndim == 1 and field.grid.dim > 1) or (pts.ndim == 1 and pts.size == 1):
        idx, weights = stencil_arrays(field.grid, pts.reshape(1, field.grid.dim))
        return float(interpolate(field.values, idx, weights)[0])
    if field.grid.dim == 1 and pts.shape[-1] != 1:
        pts = pts[..., None]
    idx, weights = stencil_arrays(field.grid, pts)
    return interpolate(field.values, idx, weights)


if __name__ == "__main__":
    # Example usage
    g = uniform_grid(-50.0, 50.0, 51)
    print(f"dx = {g.dx}, N = {g.num_nodes}, node 25 at {node_coords(g, 25)}")
    u = ValueField(g, 2.0 * g.coordinates[:, 0])
    print(f"u(0.3) = {eval_field(u, [0.3]):.6f}")
