"""
Critical-point solvers on the perturbative surface ⟨P̄⟩(Θ, x).

    p_max(x)       maximum of ⟨P̄⟩(·, x) over the Θ window
    theta_th(x, P) smallest Θ with ⟨P̄⟩(Θ, x) = P
    x_c(P)         sup{x : p_max(x) ≥ P}, by bisection on p_max(x) − P
"""

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy import optimize

from backend.errors import ContractViolation, SolverError
from backend.models.domain_models import PhaseCurvePoint, PhaseSweep, SolverSettings
from backend.services.perturbation import PerturbationTable, ThetaSection

logger = logging.getLogger(__name__)

TANGENT_SLOPE = 8.0 / 5.0


def _check_x(x: float, settings: SolverSettings):
    if not 0.0 <= x <= settings.x_window_max:
        raise ContractViolation(f"x must lie in [0, {settings.x_window_max}], got {x}")


def _check_p_th(p_th: float):
    if not 0.0 < p_th <= 1.0:
        raise ContractViolation(f"p_th must lie in (0, 1], got {p_th}")


def _local_bracket(section: ThetaSection, center: float, half_width: float,
                   window: Tuple[float, float]) -> Optional[Tuple[float, float, float]]:
    lo, hi = window
    left, right = max(lo, center - half_width), min(hi, center + half_width)
    if not left < center < right:
        return None
    mid_value = section.value(center)
    if mid_value > section.value(left) and mid_value > section.value(right):
        return left, center, right
    return None


def _scan_bracket(section: ThetaSection, settings: SolverSettings) -> Tuple[float, ...]:
    grid = np.linspace(*settings.theta_window, settings.scan_points)
    values = section.value(grid)
    best = int(np.argmax(values))
    if best == 0 or best == len(grid) - 1:
        return (float(grid[best]),)
    return float(grid[best - 1]), float(grid[best]), float(grid[best + 1])


def _polish_maximum(section: ThetaSection, theta: float, bounds: Tuple[float, float],
                    settings: SolverSettings) -> float:
    """Newton on dP/dΘ, kept inside ``bounds``"""
    for _ in range(settings.newton_max_iter):
        curvature = section.curvature(theta)
        if curvature >= 0:
            break
        step = section.slope(theta) / curvature
        candidate = theta - step
        if not bounds[0] <= candidate <= bounds[1]:
            break
        theta = candidate
        if abs(step) <= 4 * np.finfo(float).eps * max(1.0, abs(theta)):
            break
    return theta


def p_max(table: PerturbationTable, x: float, settings: SolverSettings,
          theta_guess: Optional[float] = None) -> Tuple[float, float]:
    """
    Maximizer and maximum of ⟨P̄⟩(Θ, x) over ``settings.theta_window``.

    Args:
        table: perturbation table
        x: perturbative parameter
        settings: solver settings
        theta_guess: warm start from a neighbouring solve; a local bracket
            around it is tried before the full scan

    Returns:
        (theta_star, p_star)
    """
    _check_x(x, settings)
    section = table.section(x)
    lo, hi = settings.theta_window
    spacing = (hi - lo) / (settings.scan_points - 1)

    bracket = None
    if theta_guess is not None:
        bracket = _local_bracket(section, theta_guess, 2 * spacing, settings.theta_window)
    if bracket is None:
        bracket = _scan_bracket(section, settings)
    if len(bracket) == 1:
        # maximum sits on the window edge
        theta_star = bracket[0]
        return theta_star, float(section.value(theta_star))

    objective = lambda t: -section.value(t)  # noqa: E731
    try:
        result = optimize.minimize_scalar(objective, bracket=bracket, method='golden')
    except (ValueError, RuntimeError):
        # ties on a flat top break scipy's strict bracket check
        result = optimize.minimize_scalar(objective, bounds=(bracket[0], bracket[2]), method='bounded')
    theta_star = float(result.x)
    if not bracket[0] <= theta_star <= bracket[2]:
        theta_star = bracket[1]
    theta_star = _polish_maximum(section, theta_star, (bracket[0], bracket[2]), settings)
    p_star = float(section.value(theta_star))
    logger.debug("p_max x=%.6g theta*=%.12f p*=%.15f", x, theta_star, p_star)
    return theta_star, p_star


def _newton_bisection(section: ThetaSection, target: float, lo: float, hi: float,
                      settings: SolverSettings) -> float:
    """
    Root of ⟨P̄⟩(Θ) − target inside [lo, hi], where the function rises from
    negative at lo to non-negative at hi. Newton steps that leave the bracket
    or stall fall back to bisection.
    """
    def residual(theta):
        return float(section.value(theta)) - target, float(section.slope(theta))

    trace = []
    theta = 0.5 * (lo + hi)
    dx_old = dx = hi - lo
    f, df = residual(theta)
    for iteration in range(1, settings.newton_max_iter + 1):
        trace.append((iteration, theta, f))
        if f == 0.0:
            break
        if f < 0.0:
            lo = theta
        else:
            hi = theta
        if (((theta - hi) * df - f) * ((theta - lo) * df - f) >= 0.0
                or abs(2.0 * f) > abs(dx_old * df)):
            dx_old, dx = dx, 0.5 * (hi - lo)
            theta = lo + dx
        else:
            dx_old, dx = dx, f / df
            theta -= dx
        f, df = residual(theta)
        if abs(dx) <= 4 * np.finfo(float).eps * max(1.0, abs(theta)) or hi - lo <= 0.0:
            break
    trace.append((len(trace) + 1, theta, f))
    if abs(f) > settings.newton_tol:
        raise SolverError(f"theta_th did not converge: residual {f:.3e} at theta={theta!r}", trace)
    return theta


def theta_th(table: PerturbationTable, x: float, p_th: float, settings: SolverSettings,
             theta_guess: Optional[float] = None) -> Optional[float]:
    """
    Smallest Θ in the window where ⟨P̄⟩(Θ, x) reaches p_th, or None when the
    threshold is out of reach at this x.

    Every returned Θ satisfies |⟨P̄⟩(Θ, x) − p_th| ≤ settings.newton_tol.
    """
    _check_p_th(p_th)
    theta_star, p_star = p_max(table, x, settings, theta_guess)
    if abs(p_star - p_th) <= settings.newton_tol:
        return theta_star
    if p_star < p_th:
        return None

    section = table.section(x)
    lo = settings.theta_window[0]
    grid = np.linspace(lo, theta_star, settings.scan_points)
    above = np.nonzero(section.value(grid) - p_th >= 0.0)[0]
    first = int(above[0])
    if first == 0:
        # threshold already met at the window's lower edge
        return float(grid[0])
    return _newton_bisection(section, p_th, float(grid[first - 1]), float(grid[first]), settings)


def critical_point(table: PerturbationTable, p_th: float, settings: SolverSettings,
                   x_bracket: Optional[Tuple[float, float]] = None,
                   theta_guess: Optional[float] = None) -> PhaseCurvePoint:
    """
    x_c(p_th) with the Θ where the threshold is last attained.

    ``x_bracket`` is a warm-start interval; it is used only when it actually
    brackets the crossing, otherwise the full [0, x_window_max] is searched.
    """
    _check_p_th(p_th)
    x_hi = settings.x_window_max
    if p_th == 1.0:
        theta_star, _ = p_max(table, 0.0, settings, theta_guess)
        return PhaseCurvePoint(p_th=1.0, x_c=0.0, theta_at_threshold=theta_star)

    guesses = {'theta': theta_guess}

    def excess(x):
        theta_star, p_star = p_max(table, x, settings, guesses['theta'])
        guesses['theta'] = theta_star
        return p_star - p_th

    theta_edge, p_edge = p_max(table, x_hi, settings)
    if p_edge >= p_th:
        logger.warning("x_c saturated at the window edge x=%g for p_th=%g", x_hi, p_th)
        return PhaseCurvePoint(p_th=p_th, x_c=x_hi, theta_at_threshold=theta_edge, saturated=True)

    lo, hi = 0.0, x_hi
    if x_bracket is not None:
        a, b = max(0.0, x_bracket[0]), min(x_hi, x_bracket[1])
        if a < b and excess(a) >= 0.0 > excess(b):
            lo, hi = a, b
    x_c = optimize.bisect(excess, lo, hi, xtol=settings.bisection_tol_x,
                          maxiter=max(100, settings.newton_max_iter))
    # report the attainable side of the final bracket
    while x_c > 0.0 and excess(x_c) < 0.0:
        x_c = max(0.0, x_c - settings.bisection_tol_x)
    theta_star, _ = p_max(table, x_c, settings, guesses['theta'])
    return PhaseCurvePoint(p_th=p_th, x_c=float(x_c), theta_at_threshold=theta_star)


def x_c(table: PerturbationTable, p_th: float, settings: SolverSettings) -> float:
    """Critical error budget x_c(p_th); x_window_max when saturated"""
    return critical_point(table, p_th, settings).x_c


def phase_curve(table: PerturbationTable, sweep: PhaseSweep, settings: SolverSettings,
                parallel: bool = False, threads: int = 1) -> List[PhaseCurvePoint]:
    """
    x_c along the decreasing p_th grid of ``sweep``.

    Sequential mode warm-starts each solve from the previous point. Parallel
    mode solves every point from a fresh bracket on a thread pool.
    """
    grid = sweep.grid()
    started = time.perf_counter()
    logger.info("phase sweep: %d points from p_th=%g to %g (%s, %s)", len(grid), grid[0], grid[-1],
                sweep.schedule, 'parallel' if parallel else 'sequential')

    if parallel:
        with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
            points = list(executor.map(lambda p: critical_point(table, p, settings), grid))
    else:
        points = []
        previous = None
        for p_th in grid:
            bracket = theta_guess = None
            if previous is not None:
                width = 8.0 * max(previous.x_c - (points[-2].x_c if len(points) > 1 else 0.0),
                                  settings.bisection_tol_x)
                bracket = (previous.x_c - settings.bisection_tol_x, previous.x_c + width)
                theta_guess = previous.theta_at_threshold
            previous = critical_point(table, p_th, settings, bracket, theta_guess)
            points.append(previous)

    saturated = sum(point.saturated for point in points)
    if saturated:
        logger.warning("%d of %d sweep points saturated at x=%g", saturated, len(points), settings.x_window_max)
    logger.info("phase sweep finished in %.2fs", time.perf_counter() - started)
    return points


def curve_frame(points: List[PhaseCurvePoint]) -> pd.DataFrame:
    return pd.DataFrame([point.to_row() for point in points],
                        columns=['p_th', 'x_c', 'theta_at_threshold', 'saturated'])


def reference_frame(p_ths) -> pd.DataFrame:
    """Tangent line (8/5)(1 − P_th) and the small-P_th bound −(8/5) ln P_th"""
    p_ths = np.asarray(p_ths, dtype=np.float64)
    return pd.DataFrame({
        'p_th': p_ths,
        'tangent': TANGENT_SLOPE * (1.0 - p_ths),
        'log_bound': -TANGENT_SLOPE * np.log(p_ths),
    })


def secant_slope(points: List[PhaseCurvePoint], p_lo: float = 0.99) -> float:
    """Least-squares slope dx_c/dP_th over p_th ∈ [p_lo, 1]"""
    selected = [(pt.p_th, pt.x_c) for pt in points if pt.p_th >= p_lo]
    if len(selected) < 2:
        raise ContractViolation(f"need at least two points with p_th >= {p_lo}")
    p, x = np.array(selected).T
    slope, _ = np.polyfit(p, x, 1)
    return float(slope)


def log_bound_violations(points: List[PhaseCurvePoint], p_range: Tuple[float, float] = (0.004, 0.05)):
    """Points in ``p_range`` where x_c fails to exceed −(8/5) ln p_th"""
    return [pt for pt in points
            if p_range[0] <= pt.p_th <= p_range[1] and not pt.x_c > -TANGENT_SLOPE * math.log(pt.p_th)]
