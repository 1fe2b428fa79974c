"""
Module: read_manifest.py

Description:
Reads a run manifest (flat JSON object) and merges it with command-line
overrides. Precedence: builtin defaults < manifest file < command line.
A manifest resolves to a problem setup and a solver configuration.

Author: F.Ahmadzade
"""

import json
import logging
from dataclasses import dataclass, field, fields, replace
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from builtin_problems import COMMON_PARAMETERS, builtin_problem
from game import ControlGrid, GameProblem
from grid import GridSpec
from solver import InitialGuess, SolverConfig

logger = logging.getLogger(__name__)

PARAMETER_KEYS = ('k1', 'k2', 'delta') + COMMON_PARAMETERS
DEFAULT_SCAN_SAMPLES = 2001


class ManifestError(ValueError):
    """Raised for unknown keys or values a manifest cannot be resolved with."""


@dataclass
class RunManifest:
    """Every setting of a run; None means 'use the problem's default'."""
    problem: str = 'test1'
    params: Dict[str, float] = field(default_factory=dict)
    grid_nodes: Optional[List[int]] = None
    controls_per_player: Optional[List[int]] = None
    control_bounds: Optional[List[List[float]]] = None
    epsilon1: Optional[float] = None
    epsilon2: Optional[float] = None
    max_iterations: Optional[int] = None
    initial_guess: Optional[str] = None
    boundary_value: Union[None, str, float, List[float]] = None
    on_no_nash: Optional[str] = None
    time_step: Optional[float] = None
    f_norm_safety: Optional[float] = None
    scan_node: List[str] = field(default_factory=list)
    scan_range: Optional[List[float]] = None
    scan_samples: int = DEFAULT_SCAN_SAMPLES
    jacobian_at: List[str] = field(default_factory=list)
    output_dir: str = 'output'
    seed: Optional[int] = None
    compare_exact: bool = False
    plot: bool = False
    workers: int = 1

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RunManifest':
        """Build a manifest; problem parameters may sit at top level or under 'params'."""
        known = {f.name for f in fields(cls)}
        values, params = {}, dict(data.get('params') or {})
        for key, value in data.items():
            if key == 'params':
                continue
            if key in PARAMETER_KEYS:
                params[key] = value
            elif key in known:
                values[key] = value
            else:
                raise ManifestError(f"Unknown manifest key '{key}'")
        try:
            values['params'] = {k: float(v) for k, v in params.items()}
        except (TypeError, ValueError) as err:
            raise ManifestError(f"Problem parameters must be numbers: {err}") from err
        return cls(**values)

    def merged(self, overrides: Dict[str, Any]) -> 'RunManifest':
        """Copy with every non-None override applied; params are merged key by key."""
        values = {k: v for k, v in overrides.items() if v is not None and k != 'params'}
        unknown = set(values) - {f.name for f in fields(self)}
        if unknown:
            raise ManifestError(f"Unknown override(s): {sorted(unknown)}")
        params = dict(self.params)
        params.update(overrides.get('params') or {})
        return replace(self, params=params, **values)

    def as_dict(self) -> Dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def build(self) -> Tuple[GameProblem, GridSpec, ControlGrid, SolverConfig]:
        """
        Resolve the manifest into a problem setup and solver configuration.

        Returns:
            Tuple[GameProblem, GridSpec, ControlGrid, SolverConfig]: The run setup.

        Raises:
            ManifestError: If a name or value cannot be resolved.
        """
        try:
            problem, grid, controls, config = builtin_problem(
                self.problem, params=self.params, grid_nodes=self.grid_nodes,
                controls_per_player=self.controls_per_player,
                control_bounds=[tuple(b) for b in self.control_bounds] if self.control_bounds else None)
            changes: Dict[str, Any] = {'workers': self.workers, 'seed': self.seed}
            if self.epsilon1 is not None or self.epsilon2 is not None:
                changes['tolerances'] = (self.epsilon1 if self.epsilon1 is not None else config.tolerances[0],
                                         self.epsilon2 if self.epsilon2 is not None else config.tolerances[1])
            if self.max_iterations is not None:
                changes['max_iterations'] = self.max_iterations
            if self.initial_guess is not None:
                changes['initial_guess'] = InitialGuess.parse(self.initial_guess)
            if isinstance(self.boundary_value, (list, tuple)):
                changes['boundary_value'] = tuple(self.boundary_value)
            elif self.boundary_value is not None:
                changes['boundary_value'] = self.boundary_value
            if self.on_no_nash is not None:
                changes['on_no_nash'] = self.on_no_nash
            if self.time_step is not None:
                changes['time_step'] = self.time_step
            if self.f_norm_safety is not None:
                changes['f_norm_safety'] = self.f_norm_safety
            config = replace(config, **changes)
        except (ValueError, TypeError) as err:
            raise ManifestError(str(err)) from err
        return problem, grid, controls, config


def load_manifest(path: str) -> RunManifest:
    """
    Read a manifest file.

    Args:
        path (str): JSON file holding one flat object.

    Returns:
        RunManifest: The manifest.

    Raises:
        ManifestError: If the file is not a JSON object or has unknown keys.
    """
    with open(path, encoding='utf-8') as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as err:
            raise ManifestError(f"{path} is not valid JSON: {err}") from err
    if not isinstance(data, dict):
        raise ManifestError(f"{path} must hold a JSON object")
    logger.info("Loaded manifest %s", path)
    return RunManifest.from_dict(data)


def parse_scan_node(text: str, grid: GridSpec) -> Tuple[int, int]:
    """
    Parse a scan request into a flat node index and a 0-based player.

    'i[,j][:player]' gives integer node offsets from the node nearest the
    origin, so on a centred grid '0,1' is the node one step up in y.
    '@x[,y][:player]' gives coordinates, snapped to the nearest node.

    Raises:
        ManifestError: On malformed input or an offset leaving the grid.
    """
    point, _, player = str(text).partition(':')
    physical = point.startswith('@')
    try:
        values = tuple(float(v) for v in point.lstrip('@').split(','))
        index = int(player) - 1 if player else 0
    except ValueError as err:
        raise ManifestError(f"Cannot parse scan node '{text}': {err}") from err
    if len(values) != grid.dim:
        raise ManifestError(f"Scan node '{text}' needs {grid.dim} value(s)")
    if index not in (0, 1):
        raise ManifestError(f"Scan node '{text}': player must be 1 or 2")
    if physical:
        return int(grid.nearest_node(np.asarray(values))), index
    if not all(v.is_integer() for v in values):
        raise ManifestError(f"Scan node '{text}': offsets are whole node counts; use '@' for coordinates")
    origin = grid.multi_index(int(grid.nearest_node(np.zeros(grid.dim))))
    multi = origin + np.asarray(values, dtype=np.int64)
    if np.any(multi < 0) or np.any(multi >= np.asarray(grid.nodes_per_axis)):
        raise ManifestError(f"Scan node '{text}' lies outside the grid")
    return grid.flat_index(multi), index


def parse_jacobian_label(text: str) -> Optional[int]:
    """'initial' -> 0, 'iteration:k' -> k, 'final' -> None."""
    if text == 'initial':
        return 0
    if text == 'final':
        return None
    kind, _, arg = text.partition(':')
    if kind == 'iteration':
        try:
            k = int(arg)
        except ValueError as err:
            raise ManifestError(f"Bad Jacobian request '{text}'") from err
        if k < 0:
            raise ManifestError(f"Bad Jacobian request '{text}'")
        return k
    raise ManifestError(f"Jacobian request must be initial, final or iteration:k, got '{text}'")
