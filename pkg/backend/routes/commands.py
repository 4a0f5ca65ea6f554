"""
One handler per command-line subcommand.

Each handler takes the parsed arguments and the active configuration class,
writes its artifacts and returns the process exit code.
"""

import logging
import time
from typing import List

import numpy as np
import pandas as pd

from backend.errors import VALIDATION_FAILED_EXIT, RangeError
from backend.models.domain_models import PhaseSweep, RunManifest, SimConfig, SolverSettings
from backend.routes.artifacts import output_path, parse_range, write_csv, write_json
from backend.services import noisy_grover_sim as sim
from backend.services.oracle_validate import run_validation_suite
from backend.services.perturbation import build_table, fixed_p_curve, truncation_study
from backend.services.phase_solver import curve_frame, phase_curve, reference_frame

logger = logging.getLogger(__name__)


def _parameters(args) -> dict:
    return {key: value for key, value in sorted(vars(args).items()) if key not in ('handler', 'command')}


def _manifest(args, seeds: List[int] = None) -> RunManifest:
    return RunManifest(command=args.command, parameters=_parameters(args), seeds=list(seeds or []))


def _finish(manifest: RunManifest, started: float, *paths: str):
    manifest.outputs = list(paths)
    manifest.duration_s = round(time.perf_counter() - started, 3)


def _table(args, cfg):
    return build_table(order=getattr(args, 'order', cfg.PERTURBATION_ORDER),
                       degree=getattr(args, 'degree', cfg.POLYNOMIAL_DEGREE),
                       crossover=cfg.EXPPOLY_CROSSOVER, threads=cfg.THREADS)


def coeffs(args, cfg) -> int:
    """C_k as exact rationals and C̄_k as floats, one row per (k, power)"""
    started = time.perf_counter()
    manifest = _manifest(args)
    table = _table(args, cfg)
    rows = []
    for k, series in enumerate(table.C):
        for power, value in enumerate(series.coeffs):
            rows.append({
                'k': k,
                'power': power,
                'c_exact': f"{value.numerator}/{value.denominator}",
                'c_float': float(table.Cbar[k, power]),
            })
    frame = pd.DataFrame(rows, columns=['k', 'power', 'c_exact', 'c_float'])
    csv_path = output_path(args.out, 'coeffs.csv')
    paths = [csv_path]
    if args.closed_form:
        paths.append(output_path(args.out, 'closed_forms.json'))
    _finish(manifest, started, *paths)
    write_csv(frame, csv_path, manifest)
    if args.closed_form:
        forms = {str(k): {'divisor': divisor, 'terms': closed.to_list()}
                 for k, (closed, divisor) in enumerate(table.F_closed)}
        write_json({'F_closed': forms}, paths[1], manifest)
    return 0


def pbar_grid(args, cfg) -> int:
    """⟨P̄⟩ on a (Θ, x) grid, or along a fixed-p finite-n curve"""
    started = time.perf_counter()
    manifest = _manifest(args)
    thetas = parse_range(args.theta, 'theta')
    table = _table(args, cfg)
    if args.fixed_p is not None:
        if not 0.0 <= args.fixed_p <= 1.0:
            raise RangeError(f"--fixed-p must lie in [0, 1], got {args.fixed_p}")
        frame = fixed_p_curve(table, args.n, args.fixed_p, thetas)
        name = 'fixed_p.csv'
    else:
        xs = parse_range(args.x, 'x')
        theta_grid, x_grid = np.meshgrid(thetas, xs, indexing='ij')
        frame = pd.DataFrame({
            'theta': theta_grid.ravel(),
            'x': x_grid.ravel(),
            'p_bar': table.p_bar(theta_grid.ravel(), x_grid.ravel()),
        })
        name = 'pbar_grid.csv'
    frame['out_of_window'] = ~((frame['theta'] >= table.theta_window[0]) & (frame['theta'] <= table.theta_window[1])
                               & (frame['x'] >= table.x_window[0]) & (frame['x'] <= table.x_window[1]))
    if frame['out_of_window'].any():
        logger.warning("%d grid points lie outside the certified window", int(frame['out_of_window'].sum()))
    path = output_path(args.out, name)
    _finish(manifest, started, path)
    write_csv(frame, path, manifest)
    return 0


def phase(args, cfg) -> int:
    """Critical curve x_c(P_th) plus its tangent and logarithmic reference lines"""
    started = time.perf_counter()
    manifest = _manifest(args)
    sweep = PhaseSweep.from_config(cfg, p_th_start=args.pth_start, p_th_end=args.pth_end,
                                   schedule=args.schedule, coarse_step=args.step)
    settings = SolverSettings.from_config(cfg)
    table = _table(args, cfg)
    points = phase_curve(table, sweep, settings, parallel=args.parallel, threads=cfg.THREADS)
    frame = curve_frame(points)
    curve_path = output_path(args.out, 'phase_curve.csv')
    paths = [curve_path]
    if args.reference and args.out == '-':
        logger.warning("--reference is ignored with --out -; phase_reference.csv needs an output directory")
    elif args.reference:
        paths.append(output_path(args.out, 'phase_reference.csv'))
    _finish(manifest, started, *paths)
    write_csv(frame, curve_path, manifest)
    if len(paths) > 1:
        write_csv(reference_frame(frame['p_th']), paths[1], manifest)
    return 0


def _step_frame(result, n: int) -> pd.DataFrame:
    m = np.arange(result.m_max + 1)
    stderr = result.stderr if result.stderr is not None else [np.nan] * len(m)
    return pd.DataFrame({
        'M': m,
        'theta': sim.step_thetas(n, result.m_max),
        'probability': result.values,
        'stderr': stderr,
    })


def mc(args, cfg) -> int:
    """Monte Carlo trajectory estimate of the per-step success probability"""
    started = time.perf_counter()
    manifest = _manifest(args, seeds=[args.seed])
    config = SimConfig(n=args.n, m_max=args.m, p=args.p, trials=args.trials, seed=args.seed)
    result = sim.mc_estimate(config, batch=cfg.TRAJECTORY_BATCH, threads=cfg.THREADS,
                             cap=cfg.TRAJECTORY_QUBIT_CAP)
    path = output_path(args.out, 'mc.csv')
    _finish(manifest, started, path)
    write_csv(_step_frame(result, args.n), path, manifest)
    return 0


def exact(args, cfg) -> int:
    """Density-matrix evolution of the dephasing channel"""
    started = time.perf_counter()
    manifest = _manifest(args)
    config = SimConfig(n=args.n, m_max=args.m, p=args.p)
    result = sim.run_exact_channel(config, cap=cfg.EXACT_QUBIT_CAP)
    path = output_path(args.out, 'exact.csv')
    _finish(manifest, started, path)
    write_csv(_step_frame(result, args.n), path, manifest)
    return 0


def validate(args, cfg) -> int:
    """Full oracle suite; exit code reflects the outcome"""
    started = time.perf_counter()
    manifest = _manifest(args, seeds=[cfg.SEED])
    table = _table(args, cfg)
    report = run_validation_suite(table, cfg)
    path = output_path(args.out, 'validation.json')
    _finish(manifest, started, path)
    write_json(report.to_dict(), path, manifest)
    return 0 if report.passed else VALIDATION_FAILED_EXIT


def truncation(args, cfg) -> int:
    """Partial Taylor sums of C_k at several polynomial degrees"""
    started = time.perf_counter()
    manifest = _manifest(args)
    try:
        degrees = [int(d) for d in args.degrees.split(',') if d.strip()]
    except ValueError:
        raise RangeError(f"--degrees '{args.degrees}' must be a comma-separated list of integers") from None
    if len(degrees) < 2:
        raise RangeError("--degrees needs at least two degrees")
    thetas = parse_range(args.theta, 'theta')
    frame, departures = truncation_study(args.order, degrees, thetas, threshold=args.threshold)
    csv_path = output_path(args.out, 'truncation.csv')
    paths = [csv_path]
    if args.out == '-':
        logger.warning("truncation_departures.json is not written with --out -")
    else:
        paths.append(output_path(args.out, 'truncation_departures.json'))
    _finish(manifest, started, *paths)
    write_csv(frame, csv_path, manifest)
    if len(paths) > 1:
        write_json({'threshold': args.threshold,
                    'departures': {str(d): theta for d, theta in departures.items()}}, paths[1], manifest)
    return 0


HANDLERS = {
    'coeffs': coeffs,
    'pbar-grid': pbar_grid,
    'phase': phase,
    'mc': mc,
    'exact': exact,
    'validate': validate,
    'truncation': truncation,
}
