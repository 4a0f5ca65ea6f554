"""
Perturbation table: exact C_k, float C̄_k and the surface ⟨P̄⟩(Θ, x).
"""

import math
from fractions import Fraction

import numpy as np
import pytest

from backend.errors import ContractViolation
from backend.models.rational_series import TruncatedSeries
from backend.services.perturbation import (
    c40_bound, compute_C, exact_C_at_quarter_period, fixed_p_curve, p_bar, p_bar_dtheta, p_bar_flagged,
    tangent_slope, truncation_study,
)


class TestExactCoefficients:
    """C_k assembled in rationals from F_0..F_k"""

    def test_C0_is_F0(self, table):
        assert table.C[0] == table.F[0]

    def test_C1_combination(self, table):
        assert table.C[1] == table.F[1].scale(Fraction(1, 2)) - table.F[0]

    def test_vanish_at_origin(self, table):
        assert all(c[0] == 0 for c in table.C)

    def test_even_powers_only(self, table):
        for c in table.C:
            assert all(power % 2 == 0 for power in c.nonzero_terms())

    def test_too_few_elements(self):
        with pytest.raises(ContractViolation):
            compute_C([TruncatedSeries.zero(4)], 2)

    def test_float_truncation_shape(self, table):
        assert table.Cbar.shape == (table.order + 1, table.degree + 1)
        assert table.C40bar.shape == (table.degree + 1,)
        assert table.Cbar[1, 2] == float(table.C[1][2])


class TestQuarterPeriod:
    """Exact values at Θ = π/4 from the closed forms"""

    def test_C0(self, table):
        assert exact_C_at_quarter_period(table.F_closed, 0) == Fraction(1)

    def test_C1(self, table):
        assert exact_C_at_quarter_period(table.F_closed, 1) == Fraction(-5, 8)

    def test_C2(self, table):
        assert exact_C_at_quarter_period(table.F_closed, 2) == Fraction(13, 32)

    def test_tangent_slope(self, table):
        assert tangent_slope(table) == Fraction(8, 5)

    def test_float_polynomial_agrees(self, table):
        assert table.Cbar_at(1, math.pi / 4) == pytest.approx(-0.625, abs=1e-10)

    def test_needs_enough_closed_forms(self, table):
        with pytest.raises(ContractViolation):
            exact_C_at_quarter_period(table.F_closed[:2], 3)


class TestSurface:
    """⟨P̄⟩ and its derivatives"""

    def test_unperturbed_section(self, table):
        thetas = np.linspace(0.0, math.pi / 2, 201)
        np.testing.assert_allclose(p_bar(table, thetas, 0.0), np.sin(2 * thetas) ** 2, rtol=0, atol=1e-10)

    def test_scalar_in_scalar_out(self, table):
        value = p_bar(table, math.pi / 4, 0.0)
        assert isinstance(value, float)
        assert value == pytest.approx(1.0, abs=1e-12)

    def test_broadcasting(self, table):
        values = p_bar(table, np.linspace(0.1, 1.0, 7), 0.5)
        assert values.shape == (7,)

    def test_first_order_slope_in_x(self, table):
        assert table.p_bar_dx(math.pi / 4, 0.0) == pytest.approx(-0.625, abs=1e-10)

    def test_dx_matches_finite_difference(self, table):
        theta, x, h = 0.9, 2.0, 1e-5
        fd = (p_bar(table, theta, x + h) - p_bar(table, theta, x - h)) / (2 * h)
        assert table.p_bar_dx(theta, x) == pytest.approx(fd, abs=1e-6)

    def test_dtheta_closed_form(self, table):
        assert p_bar_dtheta(table, math.pi / 8, 0.0) == pytest.approx(2.0, abs=1e-9)
        assert p_bar_dtheta(table, math.pi / 4, 0.0) == pytest.approx(0.0, abs=1e-9)

    def test_dtheta_matches_finite_difference(self, table):
        theta, x, h = 0.6, 3.0, 1e-5
        fd = (p_bar(table, theta + h, x) - p_bar(table, theta - h, x)) / (2 * h)
        assert p_bar_dtheta(table, theta, x) == pytest.approx(fd, abs=1e-6)

    def test_d2theta_matches_finite_difference(self, table):
        theta, x, h = 0.8, 1.5, 1e-5
        fd = (p_bar_dtheta(table, theta + h, x) - p_bar_dtheta(table, theta - h, x)) / (2 * h)
        assert table.p_bar_d2theta(theta, x) == pytest.approx(fd, abs=1e-5)

    def test_quarter_period_decays_in_x(self, table):
        values = p_bar(table, math.pi / 4, np.linspace(0.0, 10.0, 101))
        assert values[0] == pytest.approx(1.0, abs=1e-12)
        assert np.all(np.diff(values) < 0)

    def test_section_matches_surface(self, table):
        section = table.section(2.5)
        thetas = np.linspace(0.0, math.pi / 2, 9)
        np.testing.assert_allclose(section.value(thetas), p_bar(table, thetas, 2.5), rtol=0, atol=1e-13)
        np.testing.assert_allclose(section.slope(thetas), p_bar_dtheta(table, thetas, 2.5), rtol=0, atol=1e-11)

    def test_probabilities_in_range(self, table):
        theta, x = np.meshgrid(np.linspace(0.0, math.pi / 2, 61), np.linspace(0.0, 10.0, 21))
        values = p_bar(table, theta, x)
        assert values.min() >= -1e-8
        assert values.max() <= 1.0 + 1e-8

    def test_out_of_window_is_flagged(self, table, caplog):
        value, flagged = p_bar_flagged(table, 4.0, 1.0)
        assert flagged
        assert isinstance(value, float)
        assert 'outside the certified window' in caplog.text
        assert p_bar_flagged(table, 1.0, 1.0)[1] is False


class TestTruncationBound:
    """Next-order term over the certified window"""

    def test_order_40_bound(self, table):
        bound = c40_bound(table)
        assert bound <= 1.24e-50 * 1.05
        assert bound * 1e40 <= 1.24e-10 * 1.05

    def test_bound_is_positive(self, table):
        assert c40_bound(table) > 0.0


class TestFixedPCurve:

    def test_noiseless_curve_is_C0(self, table):
        thetas = np.linspace(0.0, 1.5, 16)
        frame = fixed_p_curve(table, 9, 0.0, thetas)
        assert list(frame.columns) == ['theta', 'x', 'p_bar']
        assert np.all(frame['x'] == 0.0)
        np.testing.assert_allclose(frame['p_bar'], table.Cbar_at(0, thetas), atol=1e-14)

    def test_x_grows_linearly(self, table):
        frame = fixed_p_curve(table, 9, 0.01, [0.0, 17 * math.asin(2 ** -4.5)])
        assert frame['x'].iloc[0] == 0.0
        # 17 iterations at n = 9 give x = 306p
        assert frame['x'].iloc[1] == pytest.approx(3.06, rel=1e-12)


class TestTruncationStudy:

    def test_low_degrees_agree_near_origin(self):
        thetas = np.linspace(0.0, 0.5, 26)
        frame, departures = truncation_study(6, [20, 30], thetas)
        np.testing.assert_allclose(frame['degree_20'], frame['degree_30'], atol=1e-8)
        assert departures == {20: None}

    def test_degree_validation(self):
        with pytest.raises(ContractViolation):
            truncation_study(2, [1, 4], [0.0])

    @pytest.mark.slow
    def test_order_40_partial_sums(self):
        thetas = np.arange(0.0, 6.0 + 1e-9, 0.01)
        frame, departures = truncation_study(40, [30, 40, 50], thetas)
        near = frame[frame['theta'] <= 2.0]
        np.testing.assert_allclose(near['degree_30'], near['degree_50'], atol=1e-6)
        np.testing.assert_allclose(near['degree_40'], near['degree_50'], atol=1e-6)
        assert departures[30] is not None
        assert departures[40] is None or departures[30] < departures[40]
