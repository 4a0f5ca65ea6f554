"""
Recurrences for f_k, g_k and F_k.

Structural facts checked exactly: leading powers, parity, the trace identity
f_k + g_k = Θᵏ/k!, plus an independent symbolic expansion of f₁.
"""

import math
from fractions import Fraction

import numpy as np
import pytest
import sympy

from backend.errors import ContractViolation, InvariantViolation
from backend.models.domain_models import OrderPair
from backend.models.rational_series import TruncatedSeries
from backend.services.recurrence import RecurrenceEngine, F_of, compute_fg, trace_series


@pytest.fixture(scope='module')
def pairs():
    return compute_fg(20, degree=12, crossover=-1)


def symbolic_f1_taylor(order: int):
    """Taylor coefficients of f₁ up to Θ^order, computed with sympy"""
    theta, phi, u = sympy.symbols('theta phi u')

    def taylor(expr):
        return sympy.series(expr, u, 0, order + 1).removeO()

    sin2 = taylor(sympy.sin(2 * u) ** 2)
    cos2 = taylor(sympy.cos(2 * u) ** 2)
    integrand = sympy.expand(sin2.subs(u, theta - phi) * cos2.subs(u, phi)
                             + cos2.subs(u, theta - phi) * sin2.subs(u, phi))
    poly = sympy.Poly(sympy.integrate(integrand, (phi, 0, theta)), theta)
    coeffs = {}
    for power in range(order + 1):
        value = poly.coeff_monomial(theta ** power)
        coeffs[power] = Fraction(int(value.p), int(value.q))
    return coeffs


class TestBaseCase:

    def test_f0_and_g0(self, pairs):
        f0, g0 = pairs[0].f_series, pairs[0].g_series
        assert (f0[2], f0[4], f0[6]) == (4, Fraction(-16, 3), Fraction(128, 45))
        assert (g0[0], g0[2], g0[4]) == (1, -4, Fraction(16, 3))


class TestStructure:
    """Leading powers, parity and the trace identity for k ≤ 20"""

    def test_leading_powers(self, pairs):
        for pair in pairs:
            assert pair.f_series.leading_power() == pair.k + 2
            assert pair.g_series.leading_power() == pair.k

    def test_parity(self, pairs):
        for pair in pairs:
            for series in (pair.f_series, pair.g_series):
                assert all((power - pair.k) % 2 == 0 for power in series.nonzero_terms())

    def test_trace_identity(self, pairs):
        for pair in pairs:
            assert pair.f_series + pair.g_series == trace_series(pair.k, pair.f_series.cap)

    def test_series_cap_grows_with_order(self, pairs):
        assert [pair.f_series.cap for pair in pairs] == [12 + k for k in range(21)]

    def test_f1_against_symbolic_expansion(self, pairs):
        expected = symbolic_f1_taylor(11)
        f1 = pairs[1].f_series
        assert f1[3] == Fraction(8, 3)
        assert f1[5] == Fraction(-16, 5)
        for power, value in expected.items():
            assert f1[power] == value, f"power {power}"


class TestNormalizedElements:
    """F_k = f_k/Θᵏ"""

    def test_F0_is_sin2(self, table):
        thetas = np.linspace(0.0, math.pi / 2, 51)
        np.testing.assert_allclose(table.F[0].evaluate(thetas), np.sin(2 * thetas) ** 2, atol=1e-12)

    def test_quarter_period_values(self, table):
        assert table.F[1].evaluate(math.pi / 4) == pytest.approx(0.75, abs=1e-10)
        assert table.F[2].evaluate(math.pi / 4) == pytest.approx(5 / 16, abs=1e-10)

    def test_bounded_by_inverse_factorial(self, table):
        thetas = np.linspace(0.0, math.pi / 2, 201)
        for k in range(1, 12):
            values = table.F[k].evaluate(thetas)
            assert np.all(values >= -1e-9)
            assert np.all(values <= 1.0 / math.factorial(k) + 1e-9)

    def test_closed_form_is_tagged_with_its_divisor(self, table):
        assert len(table.F_closed) == 11
        _, divisor = table.F_closed[3]
        assert divisor == 3

    def test_malformed_pair_rejected(self):
        bad = TruncatedSeries.from_mapping({1: 1}, cap=6)
        pair = OrderPair(k=2, f_series=bad, g_series=bad)
        with pytest.raises(InvariantViolation):
            F_of(pair)


class TestEngine:

    def test_threads_do_not_change_the_result(self):
        serial = compute_fg(4, degree=10, crossover=-1)
        threaded = compute_fg(4, degree=10, crossover=-1, threads=2)
        for a, b in zip(serial, threaded):
            assert a.f_series == b.f_series
            assert a.g_series == b.g_series

    def test_crossover_limits_closed_forms(self):
        pairs = compute_fg(4, degree=6, crossover=2)
        assert [pair.has_closed_form for pair in pairs] == [True, True, True, False, False]

    def test_invalid_arguments(self):
        with pytest.raises(ContractViolation):
            RecurrenceEngine(degree=1)
        with pytest.raises(ContractViolation):
            compute_fg(-1)
