"""
Module: main.py

Description:
Command-line front end. `run` solves a builtin game (optionally from a
manifest), runs the requested diagnostics and writes value fields, feedback
controls, the convergence log, scans, Jacobian rows, error tables, figures
and a JSON run report. `compare` recomputes the error table of an existing
run directory.

Exit codes: 0 converged, 1 I/O failure, 2 not converged, 3 halted (no Nash
pair at a node), 4 configuration error.

Author: F.Ahmadzade
"""

import argparse
import logging
import os
import sys
from typing import Any, Dict, List, Optional, Sequence

import matplotlib
import numpy as np

from builtin_problems import BUILTIN_NAMES, problem_config
from compare_exact import compare_exact, compare_run_dir
from constants import (BOUNDARY_EXACT, EXIT_CONFIG_ERROR, EXIT_CONVERGED, EXIT_HALTED, EXIT_IO_FAILURE,
                       EXIT_NOT_CONVERGED, ERROR_TABLE_FILE, ON_NO_NASH_POLICIES, STATUS_CONVERGED)
from diagnostics import default_scan_range, jacobian_inf_norm, scan_component, scheme_residual, stacked_index
from game import MissingExactSolutionError
from read_manifest import ManifestError, RunManifest, load_manifest, parse_jacobian_label, parse_scan_node
from save_to_csv import save_jacobian, save_run_outputs, save_run_report, save_scan, save_to_csv
from solver import NoNashEquilibriumError, SolveResult, solve

logger = logging.getLogger(__name__)

RULE = '=' * 70


def _parse_params(pairs: Optional[List[str]]) -> Optional[Dict[str, float]]:
    if not pairs:
        return None
    params = {}
    for pair in pairs:
        key, sep, value = pair.partition('=')
        if not sep:
            raise ManifestError(f"--param expects key=value, got '{pair}'")
        try:
            params[key.strip()] = float(value)
        except ValueError as err:
            raise ManifestError(f"--param {key}: {err}") from err
    return params


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Semi-Lagrangian solver for two-player Nash differential games")
    parser.add_argument('--verbose', action='store_true', help="debug logging and a progress bar")
    parser.add_argument('--quiet', action='store_true', help="warnings only")
    sub = parser.add_subparsers(dest='command', required=True)

    run = sub.add_parser('run', help="solve a problem and write its artifacts")
    run.add_argument('problem_name', nargs='?', choices=BUILTIN_NAMES, help="builtin problem")
    run.add_argument('--problem', choices=BUILTIN_NAMES)
    run.add_argument('--manifest', help="JSON manifest; command-line flags take precedence")
    run.add_argument('--grid-nodes', type=int, nargs='+')
    run.add_argument('--controls-per-player', type=int, nargs='+')
    run.add_argument('--epsilon1', type=float)
    run.add_argument('--epsilon2', type=float)
    run.add_argument('--max-iterations', type=int)
    run.add_argument('--initial-guess', help="constant:C | exact | perturbed-exact:A | file:PATH | formal:NAME")
    run.add_argument('--boundary-value', nargs='+', help="one or two Dirichlet constants, or 'exact'")
    run.add_argument('--on-no-nash', choices=ON_NO_NASH_POLICIES)
    run.add_argument('--time-step', type=float)
    run.add_argument('--f-norm-safety', type=float)
    run.add_argument('--scan-node', action='append',
                     help="i[,j][:player] as node offsets from the node nearest the origin (0,1 is one node up), "
                          "or @x[,y][:player] in coordinates")
    run.add_argument('--scan-range', type=float, nargs=2)
    run.add_argument('--scan-samples', type=int)
    run.add_argument('--jacobian-at', action='append', help="initial | final | iteration:k")
    run.add_argument('--output-dir')
    run.add_argument('--seed', type=int)
    run.add_argument('--compare-exact', action='store_true', default=None)
    run.add_argument('--plot', action='store_true', default=None)
    run.add_argument('--workers', type=int)
    run.add_argument('--param', action='append', help="problem parameter override key=value")

    compare = sub.add_parser('compare', help="error table of an existing run against the exact solution")
    compare.add_argument('output_dir')
    compare.add_argument('--margin', type=int, default=1, help="boundary nodes excluded from the summary")
    return parser


def resolve_manifest(args: argparse.Namespace) -> RunManifest:
    manifest = load_manifest(args.manifest) if args.manifest else RunManifest()
    bv = args.boundary_value
    if bv is not None:
        if len(bv) not in (1, 2):
            raise ManifestError("--boundary-value takes one or two values")
        if bv == [BOUNDARY_EXACT]:
            bv = BOUNDARY_EXACT
        else:
            try:
                bv = ([float(v) for v in bv] * 2)[:2]
            except ValueError as err:
                raise ManifestError(f"--boundary-value: {err}") from err
    overrides = {
        'problem': args.problem or args.problem_name,
        'params': _parse_params(args.param),
        'grid_nodes': args.grid_nodes,
        'controls_per_player': args.controls_per_player,
        'epsilon1': args.epsilon1,
        'epsilon2': args.epsilon2,
        'max_iterations': args.max_iterations,
        'initial_guess': args.initial_guess,
        'boundary_value': bv,
        'on_no_nash': args.on_no_nash,
        'time_step': args.time_step,
        'f_norm_safety': args.f_norm_safety,
        'scan_node': args.scan_node,
        'scan_range': args.scan_range,
        'scan_samples': args.scan_samples,
        'jacobian_at': args.jacobian_at,
        'output_dir': args.output_dir,
        'seed': args.seed,
        'compare_exact': args.compare_exact,
        'plot': args.plot,
        'workers': args.workers,
    }
    return manifest.merged(overrides)


def _run_report(manifest: RunManifest, result: SolveResult) -> Dict[str, Any]:
    game, config = result.game, result.config
    last = result.history[-1].increments if result.history else None
    return {
        'manifest': manifest.as_dict(),
        'problem_config': problem_config(game.problem, game.grid, game.controls),
        'discounts': list(game.problem.discounts),
        'h': game.h,
        'dx': list(game.grid.dx),
        'f_inf_norm': game.f_norm,
        'f_norm_safety': config.f_norm_safety,
        'tolerances': list(config.tolerances),
        'max_iterations': config.max_iterations,
        'initial_guess': str(config.initial_guess),
        'boundary_value': config.boundary_value,
        'on_no_nash': config.on_no_nash,
        'seed': config.seed,
        'status': result.status,
        'iterations': result.iterations,
        'final_increments': last,
        'halted_node': result.halted_node,
        'oscillation_detected': result.oscillation_detected(),
        'oscillating_nodes': result.oscillating_nodes,
        'stabilized_nodes': int(result.stabilized_nodes.size),
        'frozen_no_nash_total': int(sum(r.nodes_without_nash for r in result.history)),
    }


def _write_figures(result: SolveResult, output_dir: str) -> None:
    from plot_value_field import plot_value_fields

    game = result.game
    exact = None
    if game.problem.exact_solution is not None:
        exact = game.problem.exact_values(game.grid.coordinates)
    plot_value_fields(game.grid, result.fields, title=game.problem.name, exact=exact,
                      filename=os.path.join(output_dir, 'value_fields.png'))


def _scan_node(manifest: RunManifest, result: SolveResult, text: str) -> List[Dict[str, Any]]:
    """Scan one requested component at the final iterate, and at the one before when the node still moves."""
    game, out = result.game, manifest.output_dir
    node, player = parse_scan_node(text, game.grid)
    j0 = stacked_index(game, node, player)
    last = result.fields.ravel()[j0], result.previous_fields.ravel()[j0]
    lo, hi = manifest.scan_range if manifest.scan_range else default_scan_range(last)
    iterates = [('final', '', result.fields)]
    if abs(last[0] - last[1]) >= result.config.tolerances[player]:
        iterates.append(('previous', '_previous', result.previous_fields))

    entries = []
    for label, suffix, fields in iterates:
        scan = scan_component(game, j0, fields.ravel(), lo, hi, manifest.scan_samples)
        save_scan(scan, out, suffix)
        if manifest.plot:
            from plot_value_field import plot_scan
            plot_scan(scan, filename=os.path.join(out, f"scan_U{player + 1}_{node}{suffix}.png"))
        entries.append({'request': text, 'iterate': label, 'component': j0, 'node': node, 'player': player + 1,
                        'x': game.grid.coordinates[node], 'range': [lo, hi],
                        'fixed_points': scan.fixed_points, 'jumps': scan.jumps,
                        'max_piece_slope': scan.max_piece_slope,
                        'contraction_bound': scan.contraction_bound})
        print(f"Scan U{player + 1} at node {node} ({label} iterate): {scan.fixed_points.size} fixed point(s), "
              f"{scan.jumps.size} jump(s)")
    return entries


def _run_diagnostics(manifest: RunManifest, result: SolveResult, report: Dict[str, Any]) -> None:
    game = result.game
    out = manifest.output_dir

    report['scans'] = [entry for text in manifest.scan_node for entry in _scan_node(manifest, result, text)]

    jacobians = {}
    for label in manifest.jacobian_at:
        k = parse_jacobian_label(label)
        fields = result.fields if k is None else result.snapshots.get(k)
        if fields is None:
            logger.warning("No iterate %s kept (run stopped after %d sweeps); skipping", label, result.iterations)
            continue
        estimate = jacobian_inf_norm(game, fields.ravel())
        save_jacobian(estimate, game, label, out)
        jacobians[label] = estimate.metadata()
        print(f"||J_F||_inf at {label}: {estimate.norm:.10f} (1/(1+h) = {estimate.contraction_bound:.10f}, "
              f"{int(estimate.flagged.sum())} flagged row(s))")
    report['jacobians'] = jacobians
    report['scheme_residual'] = list(scheme_residual(game, result.fields, result.config))


def run(args: argparse.Namespace) -> int:
    try:
        manifest = resolve_manifest(args)
        problem, grid, controls, config = manifest.build()
        keep = [k for k in (parse_jacobian_label(t) for t in manifest.jacobian_at) if k is not None]
        for text in manifest.scan_node:
            parse_scan_node(text, grid)
        if manifest.plot:
            matplotlib.use('Agg')
    except (ManifestError, ValueError, MissingExactSolutionError) as err:
        print(f"Configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except OSError as err:
        print(f"I/O error: {err}", file=sys.stderr)
        return EXIT_IO_FAILURE

    try:
        os.makedirs(manifest.output_dir, exist_ok=True)
    except OSError as err:
        print(f"I/O error: {err}", file=sys.stderr)
        return EXIT_IO_FAILURE

    print(RULE)
    print(f"Problem {problem.name}: {grid.num_nodes} nodes, controls {controls.sizes}, guess {config.initial_guess}")
    print(RULE)

    try:
        result = solve(problem, grid, controls, config, verbose=args.verbose, keep_iterates=keep)
        code = EXIT_CONVERGED if result.status == STATUS_CONVERGED else EXIT_NOT_CONVERGED
    except NoNashEquilibriumError as err:
        print(f"Halted: {err}", file=sys.stderr)
        result, code = err.result, EXIT_HALTED
    except (ValueError, MissingExactSolutionError) as err:
        print(f"Configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except OSError as err:
        print(f"I/O error: {err}", file=sys.stderr)
        return EXIT_IO_FAILURE

    try:
        save_run_outputs(result, manifest.output_dir)
        report = _run_report(manifest, result)
        if code != EXIT_HALTED:
            _run_diagnostics(manifest, result, report)
            if manifest.compare_exact:
                table, summary = compare_exact(problem, grid, result.fields)
                save_to_csv(table, os.path.join(manifest.output_dir, ERROR_TABLE_FILE))
                report['errors'] = summary.to_dict(orient='list')
                print("Errors against the exact solution:")
                print(summary.to_string(index=False))
            if manifest.plot:
                _write_figures(result, manifest.output_dir)
        save_run_report(report, manifest.output_dir)
    except (ManifestError, ValueError, MissingExactSolutionError) as err:
        print(f"Configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except OSError as err:
        print(f"I/O error: {err}", file=sys.stderr)
        return EXIT_IO_FAILURE

    print(RULE)
    status_mark = '✓' if code == EXIT_CONVERGED else '✗'
    print(f"{status_mark} {result.status} after {result.iterations} iteration(s), h = {result.h:.6g}")
    print(f"  max |U1| = {np.abs(result.fields[0]).max():.6e}, max |U2| = {np.abs(result.fields[1]).max():.6e}")
    if result.oscillation_detected():
        print(f"  oscillation at {result.oscillating_nodes.size} node(s), "
              f"{result.stabilized_nodes.size} node(s) stabilized")
    print(f"  artifacts in {manifest.output_dir}")
    print(RULE)
    return code


def compare(args: argparse.Namespace) -> int:
    try:
        summary = compare_run_dir(args.output_dir, args.margin)
    except (ValueError, KeyError) as err:
        print(f"Configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except OSError as err:
        print(f"I/O error: {err}", file=sys.stderr)
        return EXIT_IO_FAILURE
    print(summary.to_string(index=False))
    return EXIT_CONVERGED


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format='%(levelname)s %(name)s: %(message)s')
    if args.command == 'run':
        return run(args)
    return compare(args)


if __name__ == "__main__":
    sys.exit(main())
