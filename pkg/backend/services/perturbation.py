"""
Perturbative success probability ⟨P̄⟩(Θ, x) = Σ_{k=0}^{K} C̄_k(Θ) xᵏ/k!.

C_k is assembled from the exact F_j series and only then rounded to the
float polynomials C̄_k; the alternating sum defining C_k cancels heavily and
must not be done in floats.
"""

import logging
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from numpy.polynomial import polynomial as npoly
from scipy import optimize

from backend.errors import ContractViolation
from backend.models.exp_poly import ExpPoly, ep_at_quarter_period
from backend.models.rational_series import TruncatedSeries, factorials
from backend.services.recurrence import F_of, compute_fg

logger = logging.getLogger(__name__)

THETA_WINDOW = (0.0, math.pi)
X_WINDOW = (0.0, 10.0)


def compute_C(F: Sequence[TruncatedSeries], K: int) -> List[TruncatedSeries]:
    """
    C_k = (−1)ᵏ Σ_{j=0}^{k} (−1/2)ʲ k!/(k−j)! F_j for k = 0..K, in exact rationals.

    Args:
        F: exact F_j series for j = 0..K, all of the same cap
        K: highest order

    Returns:
        List of K+1 exact series
    """
    if len(F) < K + 1:
        raise ContractViolation(f"need F_0..F_{K}, got {len(F)} series")
    fact = factorials(K)
    out = []
    for k in range(K + 1):
        acc = TruncatedSeries.zero(F[0].cap)
        for j in range(k + 1):
            weight = Fraction(-1, 2) ** j * (fact[k] // fact[k - j])
            acc = acc + F[j].scale(weight)
        out.append(acc if k % 2 == 0 else -acc)
    return out


@dataclass
class PerturbationTable:
    """
    Exact F_k and C_k, the float truncations C̄_k and the next-order polynomial.

    ``Cbar[k, d]`` is the float coefficient of Θᵈ in C̄_k. ``Cbar_next`` is
    C̄_{K+1} (C̄₄₀ by default), kept for the truncation error bound.
    """
    order: int
    degree: int
    C: List[TruncatedSeries]
    Cbar: np.ndarray
    Cbar_next: np.ndarray
    F: List[TruncatedSeries] = field(default_factory=list)
    F_closed: List[Tuple[ExpPoly, int]] = field(default_factory=list)
    theta_window: Tuple[float, float] = THETA_WINDOW
    x_window: Tuple[float, float] = X_WINDOW
    _surface: np.ndarray = field(init=False, repr=False)
    _surface_dtheta: np.ndarray = field(init=False, repr=False)
    _surface_d2theta: np.ndarray = field(init=False, repr=False)
    _surface_dx: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        inv_fact = np.array([1.0 / math.factorial(k) for k in range(self.order + 1)])
        # surface[k, d] multiplies xᵏ Θᵈ
        self._surface = self.Cbar * inv_fact[:, None]
        self._surface_dtheta = npoly.polyder(self._surface, m=1, axis=1)
        self._surface_d2theta = npoly.polyder(self._surface, m=2, axis=1)
        self._surface_dx = npoly.polyder(self._surface, m=1, axis=0)
        for array in (self._surface, self._surface_dtheta, self._surface_d2theta, self._surface_dx):
            array.setflags(write=False)

    @property
    def C40bar(self) -> np.ndarray:
        return self.Cbar_next

    def in_window(self, theta, x) -> bool:
        theta_arr, x_arr = np.asarray(theta), np.asarray(x)
        return bool(np.all((theta_arr >= self.theta_window[0]) & (theta_arr <= self.theta_window[1])
                           & (x_arr >= self.x_window[0]) & (x_arr <= self.x_window[1])))

    @staticmethod
    def _evaluate(surface: np.ndarray, theta, x):
        theta_arr, x_arr = np.broadcast_arrays(np.asarray(theta, dtype=np.float64),
                                               np.asarray(x, dtype=np.float64))
        out = npoly.polyval2d(x_arr, theta_arr, surface)
        return float(out) if np.ndim(out) == 0 else out

    def p_bar(self, theta, x):
        return self._evaluate(self._surface, theta, x)

    def p_bar_dtheta(self, theta, x):
        return self._evaluate(self._surface_dtheta, theta, x)

    def p_bar_d2theta(self, theta, x):
        return self._evaluate(self._surface_d2theta, theta, x)

    def p_bar_dx(self, theta, x):
        return self._evaluate(self._surface_dx, theta, x)

    def Cbar_at(self, k: int, theta):
        return npoly.polyval(theta, self.Cbar[k])

    def section(self, x: float) -> 'ThetaSection':
        """⟨P̄⟩(·, x) collapsed to one polynomial in Θ"""
        powers = float(x) ** np.arange(self.order + 1)
        return ThetaSection(x=float(x), coeffs=powers @ self._surface)


class ThetaSection:
    """⟨P̄⟩ at fixed x with its first two Θ-derivatives"""

    __slots__ = ('x', 'coeffs', 'd1', 'd2')

    def __init__(self, x: float, coeffs: np.ndarray):
        self.x = x
        self.coeffs = coeffs
        self.d1 = npoly.polyder(coeffs, 1)
        self.d2 = npoly.polyder(coeffs, 2)

    def value(self, theta):
        return npoly.polyval(theta, self.coeffs)

    def slope(self, theta):
        return npoly.polyval(theta, self.d1)

    def curvature(self, theta):
        return npoly.polyval(theta, self.d2)


def build_table(order: int = 39, degree: int = 40, crossover: int = 10, threads: int = 1) -> PerturbationTable:
    """Run the recurrences to order+1 and assemble the perturbation table"""
    if order < 0:
        raise ContractViolation(f"order must be >= 0, got {order}")
    started = time.perf_counter()
    pairs = compute_fg(order + 1, degree=degree, crossover=crossover, threads=threads)
    F_series, F_closed = [], []
    for pair in pairs:
        series, closed = F_of(pair)
        F_series.append(series)
        if closed is not None:
            F_closed.append(closed)
    C = compute_C(F_series, order + 1)
    Cbar = np.array([c.to_floats() for c in C[:order + 1]])
    table = PerturbationTable(
        order=order,
        degree=degree,
        C=C[:order + 1],
        Cbar=Cbar,
        Cbar_next=np.array(C[order + 1].to_floats()),
        F=F_series[:order + 1],
        F_closed=F_closed,
    )
    logger.info("perturbation table K=%d D=%d built in %.2fs", order, degree, time.perf_counter() - started)
    return table


def p_bar(table: PerturbationTable, theta, x):
    """⟨P̄⟩(Θ, x); accepts scalars or broadcastable arrays"""
    return table.p_bar(theta, x)


def p_bar_flagged(table: PerturbationTable, theta: float, x: float) -> Tuple[float, bool]:
    """(⟨P̄⟩(Θ, x), out_of_window) where the flag marks inputs outside the certified window"""
    out_of_window = not table.in_window(theta, x)
    if out_of_window:
        logger.warning("p_bar evaluated outside the certified window at theta=%r x=%r", theta, x)
    return float(table.p_bar(theta, x)), out_of_window


def p_bar_dtheta(table: PerturbationTable, theta, x):
    """∂⟨P̄⟩/∂Θ from the analytically differentiated polynomials"""
    return table.p_bar_dtheta(theta, x)


def c40_bound(table: PerturbationTable, step: float = 1e-3) -> float:
    """
    max over Θ ∈ [0, π] of |C̄_{K+1}(Θ)/(K+1)!|.

    Dense grid with spacing ≤ step, then a bounded scalar refinement around
    the best grid point.
    """
    lo, hi = table.theta_window
    scaled = table.Cbar_next / math.factorial(table.order + 1)
    points = int(math.ceil((hi - lo) / step)) + 1
    grid = np.linspace(lo, hi, points)
    values = np.abs(npoly.polyval(grid, scaled))
    best = int(np.argmax(values))
    left, right = grid[max(best - 1, 0)], grid[min(best + 1, points - 1)]
    refined = optimize.minimize_scalar(lambda t: -abs(npoly.polyval(t, scaled)),
                                       bounds=(left, right), method='bounded',
                                       options={'xatol': 1e-12})
    return float(max(values[best], -refined.fun))


def exact_C_at_quarter_period(F_closed: Sequence[Tuple[ExpPoly, int]], k: int) -> Union[Fraction, Dict[int, Fraction]]:
    """
    C_k(π/4) from the closed forms F_0..F_k.

    Each F_j collapses to a Laurent polynomial in π/4. A rational is returned
    when only the constant term survives, the Laurent map otherwise.
    """
    if len(F_closed) < k + 1:
        raise ContractViolation(f"need closed forms F_0..F_{k}, got {len(F_closed)}")
    fact = factorials(k)
    total: Dict[int, Fraction] = {}
    for j in range(k + 1):
        closed, divisor = F_closed[j]
        weight = Fraction(-1, 2) ** j * (fact[k] // fact[k - j]) * (-1) ** k
        for exponent, value in ep_at_quarter_period(closed, divisor).items():
            total[exponent] = total.get(exponent, Fraction(0)) + weight * value
    total = {e: v for e, v in total.items() if v}
    if not total:
        return Fraction(0)
    if set(total) == {0}:
        return total[0]
    return total


def tangent_slope(table: PerturbationTable) -> Fraction:
    """c = −1/C₁(π/4), the slope of x_c(P_th) at P_th = 1 in units of (1 − P_th)"""
    c1 = exact_C_at_quarter_period(table.F_closed, 1)
    if not isinstance(c1, Fraction):
        raise ContractViolation(f"C_1(π/4) is not rational: {c1}")
    return -1 / c1


def fixed_p_curve(table: PerturbationTable, n: int, p: float, thetas) -> pd.DataFrame:
    """⟨P̄⟩ along x = 2Θnp/arcsin(2^{−n/2}) for a finite register of n qubits"""
    if n < 2:
        raise ContractViolation(f"n must be >= 2, got {n}")
    thetas = np.asarray(thetas, dtype=np.float64)
    x = 2.0 * thetas * n * p / math.asin(2.0 ** (-n / 2))
    return pd.DataFrame({'theta': thetas, 'x': x, 'p_bar': table.p_bar(thetas, x)})


def truncation_study(k: int, degrees: Sequence[int], thetas, threshold: float = 1e-3,
                     crossover: int = -1) -> Tuple[pd.DataFrame, Dict[int, Optional[float]]]:
    """
    Partial Taylor sums of C_k at several degrees on a Θ grid.

    Returns the table of partial sums and, for every degree below the highest,
    the first Θ at which it departs from the highest-degree sum by more than
    ``threshold`` (None if it never does on the grid).
    """
    degrees = sorted(set(int(d) for d in degrees))
    if not degrees or degrees[0] < 2:
        raise ContractViolation("degrees must be >= 2")
    top = degrees[-1]
    pairs = compute_fg(k, degree=top, crossover=crossover)
    F_series = [F_of(pair)[0] for pair in pairs]
    C_k = compute_C(F_series, k)[k]
    thetas = np.asarray(thetas, dtype=np.float64)
    frame = pd.DataFrame({'theta': thetas})
    for d in degrees:
        frame[f'degree_{d}'] = C_k.truncate(d).evaluate(thetas)
    departures: Dict[int, Optional[float]] = {}
    reference = frame[f'degree_{top}'].to_numpy()
    for d in degrees[:-1]:
        gap = np.abs(frame[f'degree_{d}'].to_numpy() - reference)
        hits = np.nonzero(gap > threshold)[0]
        departures[d] = float(thetas[hits[0]]) if hits.size else None
    return frame, departures
