"""
Recurrences for the families f_k, g_k and the normalized elements F_k.

    f_0 = sin²2Θ,  g_0 = cos²2Θ
    f_k = ∫₀^Θ [f_{k−1}(Θ−φ) cos²2φ + g_{k−1}(Θ−φ) sin²2φ] dφ
    g_k = ∫₀^Θ [g_{k−1}(Θ−φ) cos²2φ + f_{k−1}(Θ−φ) sin²2φ] dφ
    F_k = f_k / Θᵏ
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from typing import List, Optional, Tuple

from backend.errors import ContractViolation
from backend.models.domain_models import OrderPair
from backend.models.exp_poly import ExpPoly, ep_convolve, ep_trig
from backend.models.rational_series import TruncatedSeries, factorials, series_convolve, taylor_trig

logger = logging.getLogger(__name__)


class RecurrenceEngine:
    """
    Builds OrderPair records order by order.

    Series are carried to degree k + degree at order k so that F_k keeps
    ``degree`` after the division by Θᵏ. Closed forms are built only up to
    ``crossover``.
    """

    def __init__(self, degree: int = 40, crossover: int = 10, threads: int = 1):
        if degree < 2:
            raise ContractViolation(f"degree must be >= 2, got {degree}")
        self.degree = degree
        self.crossover = crossover
        self.threads = max(1, int(threads))

    def base_pair(self) -> OrderPair:
        return OrderPair(
            k=0,
            f_series=taylor_trig('sin2_2phi', self.degree),
            g_series=taylor_trig('cos2_2phi', self.degree),
            f_closed=ep_trig('sin2_2phi'),
            g_closed=ep_trig('cos2_2phi'),
        )

    def step(self, previous: OrderPair, executor: Optional[ThreadPoolExecutor] = None) -> OrderPair:
        """Advance one order"""
        k = previous.k + 1
        cap = k + self.degree
        cos2 = taylor_trig('cos2_2phi', cap)
        sin2 = taylor_trig('sin2_2phi', cap)

        def f_series():
            return (series_convolve(previous.f_series, cos2, cap)
                    + series_convolve(previous.g_series, sin2, cap))

        def g_series():
            return (series_convolve(previous.g_series, cos2, cap)
                    + series_convolve(previous.f_series, sin2, cap))

        if executor is not None:
            f_future, g_future = executor.submit(f_series), executor.submit(g_series)
            f_next, g_next = f_future.result(), g_future.result()
        else:
            f_next, g_next = f_series(), g_series()

        f_closed = g_closed = None
        if k <= self.crossover and previous.has_closed_form:
            cos2_ep, sin2_ep = ep_trig('cos2_2phi'), ep_trig('sin2_2phi')
            f_closed = ep_convolve(previous.f_closed, cos2_ep) + ep_convolve(previous.g_closed, sin2_ep)
            g_closed = ep_convolve(previous.g_closed, cos2_ep) + ep_convolve(previous.f_closed, sin2_ep)
        return OrderPair(k=k, f_series=f_next, g_series=g_next, f_closed=f_closed, g_closed=g_closed)

    def compute(self, max_order: int) -> List[OrderPair]:
        if max_order < 0:
            raise ContractViolation(f"max order must be >= 0, got {max_order}")
        started = time.perf_counter()
        pairs = [self.base_pair()]
        executor = ThreadPoolExecutor(max_workers=2) if self.threads > 1 else None
        try:
            for _ in range(max_order):
                pairs.append(self.step(pairs[-1], executor))
                logger.debug("order %d done (series cap %d)", pairs[-1].k, pairs[-1].f_series.cap)
        finally:
            if executor is not None:
                executor.shutdown()
        logger.info("computed f_k, g_k for k = 0..%d at degree %d in %.2fs",
                    max_order, self.degree, time.perf_counter() - started)
        return pairs


def compute_fg(max_order: int, degree: int = 40, crossover: int = 10, threads: int = 1) -> List[OrderPair]:
    """f_k, g_k for k = 0..max_order, series carried to degree k + degree"""
    return RecurrenceEngine(degree=degree, crossover=crossover, threads=threads).compute(max_order)


def F_of(pair: OrderPair) -> Tuple[TruncatedSeries, Optional[Tuple[ExpPoly, int]]]:
    """
    F_k = f_k/Θᵏ as a degree-shifted series plus the closed form tagged with its divisor.

    Raises InvariantViolation if f_k has a nonzero coefficient below Θᵏ.
    """
    series = pair.f_series.shift_down(pair.k)
    closed = (pair.f_closed, pair.k) if pair.has_closed_form else None
    return series, closed


def trace_series(k: int, cap: int) -> TruncatedSeries:
    """Θᵏ/k!, the exact value of f_k + g_k"""
    return TruncatedSeries.monomial(k, Fraction(1, factorials(k)[k]), cap)
